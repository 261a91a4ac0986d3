#pragma once

#include <string>

#include "twave/profile.hpp"

namespace twave {

// Cache-backed construction of the waves the studies revolve around.
// Construction is by continuation from the family's small-amplitude end;
// converged profiles are cached on disk keyed by (family, scaling, eps, X,
// q or omega).
struct FactoryOpts {
  std::string cache_dir = "twave_cache";
  bool use_cache = true;
  RefineOpts refine;
};

// gamma = 1 gKS wave with fixed period and speed c = 0; delta comes out of
// the continuation.
WaveProfile gks_wave(double eps, double X, double q,
                     const FactoryOpts& opts = {});

// Thin-film (gamma = delta, eps^2 + delta^2 = 1) wave of period X, zero-mean
// Galilean representative.
WaveProfile thin_film_wave(double eps, double X, const FactoryOpts& opts = {});

// Stationary Swift-Hohenberg roll at the given omega.
WaveProfile sh_wave(double eps, double omega, const FactoryOpts& opts = {});

}  // namespace twave
