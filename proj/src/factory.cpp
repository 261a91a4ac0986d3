#include "twave/factory.hpp"
#include <functional>

#include <cmath>
#include <numbers>

namespace twave {

namespace {

constexpr double kPi = std::numbers::pi;

WaveProfile cached_or(const FactoryOpts& opts, const ModelParams& p, double X,
                      double key_val, const std::function<WaveProfile()>& make) {
  const std::string key = profile_cache_key(p, X, key_val);
  if (opts.use_cache)
    if (auto hit = load_profile(opts.cache_dir, key)) return *hit;
  WaveProfile w = make();
  if (opts.use_cache) save_profile(w, opts.cache_dir, key);
  return w;
}

}  // namespace

WaveProfile gks_wave(double eps, double X, double q, const FactoryOpts& opts) {
  ModelParams p = ModelParams::gks_gamma_one(eps, 1.0);
  return cached_or(opts, p, X, q, [&]() {
    // The eps = 0 family seeds everything: a zero-mean harmonic ansatz
    // converges readily, and nonzero eps is reached by continuation in eps
    // at fixed (X, q).
    ModelParams p0 = ModelParams::gks_gamma_one(0.0, 1.0);
    const double q0 = std::min(0.5, q);
    WaveProfile start =
        refine(harmonic_seed(p0, q0, X), RefineFree::delta, opts.refine);
    if (q != q0) {
      ContinuationBranch br =
          continue_branch(start, SweepRange{"q", q, q, 0.0}, opts.refine);
      if (!br.complete || br.profiles.empty())
        throw ProfileError("gks_wave: q continuation failed: " +
                           br.diagnostic);
      start = br.profiles.back();
    }
    if (eps != 0.0) {
      ContinuationBranch br = continue_branch(
          start, SweepRange{"epsilon", eps, eps, 0.0}, opts.refine);
      if (!br.complete || br.profiles.empty())
        throw ProfileError("gks_wave: eps continuation failed: " +
                           br.diagnostic);
      start = br.profiles.back();
    }
    return start;
  });
}

WaveProfile thin_film_wave(double eps, double X, const FactoryOpts& opts) {
  ModelParams p = ModelParams::gks_thin_film(eps);
  return cached_or(opts, p, X, 0.0, [&]() {
    const double delta = p.delta;
    // KdV route: seed at small delta, then walk the scaling circle
    // eps^2 + delta^2 = 1 up to the target.
    auto kdv_route = [&]() {
      const double d0 = std::min(0.05, delta);
      WaveProfile w =
          refine(kdv_seed_for_period(X, d0), RefineFree::speed_and_q,
                 opts.refine);
      if (delta <= 0.05 + 1e-12) {
        if (std::abs(w.params.delta - delta) > 1e-12) {
          WaveProfile s = w;
          s.params = p;
          s.residual = -1.0;
          w = refine(s, RefineFree::speed_and_q, opts.refine);
        }
        return w;
      }
      SweepRange sweep{"delta_tf", delta, delta, 0.0};
      ContinuationBranch br = continue_branch(w, sweep, opts.refine);
      if (!br.complete || br.profiles.empty())
        throw ProfileError("thin_film_wave: delta homotopy failed: " +
                           br.diagnostic);
      return br.profiles.back();
    };
    // Onset route: small wave at X ~ 2 pi, then continuation in X.
    auto onset_route = [&]() {
      const double A = 0.1;
      WaveProfile seed;
      seed.params = p;
      seed.X = 2.0 * kPi + 0.05;
      seed.c = -eps * p.lambda_nl;
      seed.q = 0.5 * A * A;
      seed.b = Vector4d(A, 0.0, -A, 0.0);
      const int N = 512;
      seed.n_samples = N;
      seed.samples.resize(4, N);
      const double k = 2.0 * kPi / seed.X;
      for (int j = 0; j < N; ++j) {
        const double x = seed.X * j / N;
        seed.samples.col(j) =
            Vector4d(A * std::cos(k * x), -A * k * std::sin(k * x),
                     -A * k * k * std::cos(k * x),
                     A * k * k * k * std::sin(k * x));
      }
      WaveProfile start =
          refine(seed, RefineFree::speed_and_q, opts.refine);
      SweepRange sweep{"X", X, X, 0.0};
      ContinuationBranch br = continue_branch(start, sweep, opts.refine);
      if (!br.complete || br.profiles.empty())
        throw ProfileError("thin_film_wave: X continuation failed: " +
                           br.diagnostic);
      return br.profiles.back();
    };
    if (X > 2.0 * kPi + 0.2) {
      try {
        return kdv_route();
      } catch (const ProfileError&) {
        return onset_route();
      }
    }
    return onset_route();
  });
}

WaveProfile sh_wave(double eps, double omega, const FactoryOpts& opts) {
  ModelParams p = ModelParams::swift_hohenberg(eps);
  const double X = 2.0 * kPi / (1.0 + eps * omega);
  return cached_or(opts, p, X, omega, [&]() {
    WaveProfile start = refine(sh_seed(0.0, 0.0, eps), RefineFree::sh_even,
                               opts.refine);
    if (omega == 0.0) return start;
    SweepRange sweep{"omega", omega, omega, 0.0};
    ContinuationBranch br = continue_branch(start, sweep, opts.refine);
    if (!br.complete || br.profiles.empty())
      throw ProfileError("sh_wave: omega continuation failed: " +
                         br.diagnostic);
    return br.profiles.back();
  });
}

}  // namespace twave
