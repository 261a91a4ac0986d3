#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twave/model.hpp"
#include "twave/ode.hpp"

namespace twave {

class ProfileError : public std::runtime_error {
 public:
  explicit ProfileError(const std::string& what) : std::runtime_error(what) {}
};

// Newton left the basin: the boundary defect grew twice in a row.
class NewtonDivergence : public ProfileError {
 public:
  NewtonDivergence(const std::string& what, double defect)
      : ProfileError(what), last_defect(defect) {}
  double last_defect;
};

// Shooting Jacobian lost rank; the wave sits near the degenerate set where
// the transversality assumption fails.
class RankDeficient : public ProfileError {
 public:
  explicit RankDeficient(const std::string& what) : ProfileError(what) {}
};

// A converged (or seed) periodic orbit of the traveling-wave ODE.
// b holds (u,u',u'') for gKS and (u,u',u'',u''') for SH; the phase is pinned
// by u'(0) = 0 with u''(0) < 0 (crest at x = 0).
struct WaveProfile {
  ModelParams params;
  double X = 0.0;
  double c = 0.0;
  double q = 0.0;  // gKS only
  Vector4d b = Vector4d::Zero();
  int n_samples = 0;
  Eigen::Matrix<double, 4, Eigen::Dynamic> samples;  // column j = state at x_j
  double residual = -1.0;  // boundary defect; < 0 while still a raw seed
  double sup_u = 0.0;      // certified upper bound for |u| on the period
  double sup_du = 0.0;     // same for |u'|
  double mean_u = 0.0;
  std::string note;  // seed warnings etc.

  double x_of(int j) const { return X * double(j) / double(n_samples); }
  bool converged() const { return residual >= 0.0; }
  double defect_tol() const { return 1e-9 * (1.0 + b.norm()); }
};

struct RefineOpts {
  OdeTol tol{1e-12, 1e-10, 1e8};
  int max_newton = 25;
  int n_samples = 512;
  double fd_scale = 1e-7;
  // Boundary-defect target as a multiple of (1 + |b|); precision probes of
  // the defective origin pair need tighter than the default working value.
  double defect_scale = 1e-9;
};

enum class RefineFree {
  delta,        // fix (X, c, q), free (b1, b3, delta)
  q,            // fix (X, c, delta), free (b1, b3, q)
  speed_and_q,  // fix (X, equation, mean), free (b1, b3, c, q)
  sh_even       // fix X, free (b1, b3); even half-period shooting, c == 0
};

// u at arbitrary x by quintic Hermite interpolation of the sample jet.
double profile_value(const WaveProfile& w, double x);

// Integrate the traveling-wave ODE from `w0` over [0, L].
Vector4d integrate_profile(const ModelParams& p, double c, double q,
                           const Vector4d& w0, double L, const OdeTol& tol);

// Boundary defect of a candidate profile at the given tolerance.
double profile_defect(const WaveProfile& w, const OdeTol& tol);

// Newton-polish a seed into a converged profile; throws NewtonDivergence or
// RankDeficient on failure.
WaveProfile refine(const WaveProfile& seed, RefineFree mode,
                   const RefineOpts& opts = {});

// Small orbit around the equilibrium U+(q) = sqrt(2q) near the Hopf point
// eps * delta = sqrt(2q).  Frequency sqrt(delta), so the seed period is
// 2 pi / sqrt(delta).  A Newton starting guess, not a converged profile.
WaveProfile hopf_seed(const ModelParams& params, double q, double amplitude);

// Zero-mean harmonic ansatz u = 2 sqrt(q) cos(2 pi x / X) with
// delta = gamma (2 pi / X)^2; the small-q start of the eps = 0 branches,
// where the U+ Hopf point is out of reach.
WaveProfile harmonic_seed(const ModelParams& params, double q, double X);

// Cnoidal KdV wave u0 + 12 p^2 k^2 cn^2(k x, p), speed 8 k^2 p^2 - 4 k^2 + u0.
WaveProfile kdv_seed(double u0, double kappa, double p, double delta);

// Solvability-selected zero-mean cnoidal seed with period X for the
// thin-film equation at the given delta.
WaveProfile kdv_seed_for_period(double X, double delta);

// kappa(p) from the solvability condition <(U')^2> = k^2 <(U'')^2>.
double kdv_solvability_kappa(double p);
// Period of the solvability-selected wave as a function of the modulus.
double kdv_period_of_modulus(double p);

// Small-amplitude stationary SH roll 2 eps sqrt((1-4w^2)/3) cos((1+eps w)x),
// period 2 pi / (1 + eps w).
WaveProfile sh_seed(double omega, double phi, double eps);

struct ContinuationBranch {
  std::string swept;  // "q", "X", "omega" or "delta"
  std::vector<double> values;
  std::vector<WaveProfile> profiles;
  bool complete = true;
  std::string diagnostic;
  const WaveProfile& back() const {
    if (profiles.empty())
      throw ProfileError("empty continuation branch: " + diagnostic);
    return profiles.back();
  }
  std::size_t size() const { return profiles.size(); }
};

struct SweepRange {
  std::string parameter;
  double from = 0.0;
  double to = 0.0;
  double step = 0.0;
};

// Secant predictor / Newton corrector continuation from a converged start.
// On corrector failure the step is halved down to step/64, then the partial
// branch is returned with complete = false.
ContinuationBranch continue_branch(const WaveProfile& start,
                                   const SweepRange& sweep,
                                   const RefineOpts& opts = {});

// Galilean companion of a gKS profile: u -> u + c0 with (c, q) remapped.
WaveProfile galilean_shift(const WaveProfile& w, double c0);

// Map a gamma_one profile to the thin-film normalization (gamma = delta,
// eps^2 + delta^2 = 1); Evans data rescales by the returned time factor.
struct ThinFilmImage {
  WaveProfile profile;
  double L, U, T;  // x = L xt, u = U ut, t = T tt
};
ThinFilmImage rescale_to_thin_film(const WaveProfile& w);

// ---- profile cache -------------------------------------------------------
std::string profile_cache_key(const ModelParams& p, double X, double q_or_om);
void save_profile(const WaveProfile& w, const std::string& dir,
                  const std::string& key);
std::optional<WaveProfile> load_profile(const std::string& dir,
                                        const std::string& key);

}  // namespace twave
