#pragma once

#include "twave/factory.hpp"

// Shared benchmark waves; disk-cached under the working directory so suites
// and reruns do not repeat the continuation work.
namespace twf {

inline const twave::WaveProfile& q5_eps0() {
  static twave::WaveProfile w = twave::gks_wave(0.0, 6.3, 5.0);
  return w;
}

inline const twave::WaveProfile& q5_eps02() {
  static twave::WaveProfile w = twave::gks_wave(0.2, 6.3, 5.0);
  return w;
}

inline const twave::WaveProfile& sh_bench() {
  static twave::WaveProfile w = twave::sh_wave(0.187, 0.1);
  return w;
}

}  // namespace twf
