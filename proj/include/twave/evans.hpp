#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "twave/model.hpp"
#include "twave/ode.hpp"
#include "twave/profile.hpp"

namespace twave {

class EvansError : public std::runtime_error {
 public:
  explicit EvansError(const std::string& what) : std::runtime_error(what) {}
};

// lambda sits on (or too close to) a dispersion curve, where the spatial
// eigenvalue counts behind the rescaled variant are undefined.
class RescalingUndefined : public EvansError {
 public:
  explicit RescalingUndefined(const std::string& what) : EvansError(what) {}
};

// First-order spectral system Y' = H(x, lambda) Y on one period, assembled
// from a converged profile (or a constant state, for closed-form checks).
// Coefficients come from the stored sample jet by quintic Hermite
// interpolation: re-integrating the profile alongside the spectral solve
// would ride the orbit's unstable manifold on long periods and poison the
// coefficients with an artificial defect mode.
struct SpectralSystem {
  ModelParams params;
  double c = 0.0;
  double q = 0.0;
  double X = 0.0;
  Vector4d w0 = Vector4d::Zero();
  bool constant_coeff = false;
  // rows: u, u', u'', u''', u'''', u''''' at the sample grid
  Eigen::Matrix<double, 6, Eigen::Dynamic> jet;

  Vector4d state_at(double x) const;
  Matrix4cd H_at(double x, Complex lambda) const {
    return spectral_matrix(params, c, state_at(x), lambda);
  }
  Matrix4cd H_of(const Vector4d& w, Complex lambda) const {
    return spectral_matrix(params, c, w, lambda);
  }
  double trace_integral() const { return spectral_trace(params) * X; }
};

SpectralSystem linearized_symbol(const WaveProfile& profile);
SpectralSystem constant_system(const ModelParams& params, double c, double u0,
                               double X);

enum class EvansVariant { plain, lifted_unscaled, lifted_scaled, balanced,
                          rescaled };

struct EvansQuery {
  Complex lambda;
  Complex xi;
  EvansVariant variant = EvansVariant::lifted_unscaled;
};

struct RescalingData {
  int n = 0;            // spatial eigenvalues of H(0, lambda) with Re < 0
  double alpha_plus = 0.0;   // sum of positive real parts
  double alpha_minus = 0.0;  // sum of negative real parts
};

struct EvansValue {
  Complex value;
  std::optional<Matrix4cd> monodromy;
  std::optional<RescalingData> rescaling;
};

// One D(lambda, .) evaluation handle: all xi reuse a single ODE solve.
using DRow = std::function<Complex(Complex xi)>;
using DProvider = std::function<DRow(Complex lambda)>;

class EvansSolver {
 public:
  explicit EvansSolver(SpectralSystem sys, OdeTol tol = {1e-8, 1e-10});

  struct Solve {
    // Lifted polar frame at x = X: columns span the evolved [I; I] block,
    // log_radius the accumulated log det of its triangular factor.
    Eigen::Matrix<Complex, 8, 4> frame;
    Complex log_radius{0.0, 0.0};
    // Balanced half-period propagators, filled on first use.
    bool have_balanced = false;
    Matrix4cd prop_left;   // P(-X/2 -> 0)
    Matrix4cd prop_right;  // P(+X/2 -> 0)
    // Spatial eigenvalue data of H(0, lambda).
    RescalingData resc;
    bool rescalable = false;
  };

  const SpectralSystem& system() const { return sys_; }
  const OdeTol& tol() const { return tol_; }

  // Monodromy by direct integration, Abel-checked against exp(int tr H).
  Matrix4cd monodromy(Complex lambda, double abel_rtol = 1e-8);

  EvansValue evaluate(const EvansQuery& query);
  Complex eval(Complex lambda, Complex xi,
               EvansVariant v = EvansVariant::lifted_unscaled);

  // Evaluation handle for contour work: one solve, many xi.
  DRow row(Complex lambda, EvansVariant v);
  DProvider provider(EvansVariant v);

  std::size_t solve_count() const { return solves_; }

 private:
  const Solve& solve(Complex lambda);
  void fill_balanced(Solve& s, Complex lambda);
  Complex eval_on(const Solve& s, Complex lambda, Complex xi,
                  EvansVariant v) const;

  SpectralSystem sys_;
  OdeTol tol_;
  std::map<std::pair<double, double>, std::shared_ptr<Solve>> cache_;
  std::size_t solves_ = 0;
};

}  // namespace twave
