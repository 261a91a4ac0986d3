#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace twave {

using Complex = std::complex<double>;
using Eigen::Matrix4cd;
using Eigen::Vector4d;

enum class Family { gks, swift_hohenberg };
enum class Scaling { gamma_one, thin_film };

inline const char* family_name(Family f) {
  return f == Family::gks ? "gks" : "sh";
}
inline const char* scaling_name(Scaling s) {
  return s == Scaling::gamma_one ? "gamma_one" : "thin_film";
}

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Which PDE is being studied and with which coefficients.  For gKS
//   u_t + gamma u_xxxx + eps u_xxx + delta u_xx + Lambda (u^2/2)_x = 0,
// for Swift-Hohenberg
//   u_t = (r - 1) u - 2 u_xx - u_xxxx - u^3,  eps = sqrt(r).
struct ModelParams {
  Family family = Family::gks;
  Scaling scaling = Scaling::gamma_one;
  double gamma = 1.0;
  double epsilon = 0.0;
  double delta = 1.0;
  double lambda_nl = 1.0;
  double r = 0.0;  // SH only

  int dimension() const { return family == Family::gks ? 3 : 4; }

  void validate() const {
    if (family == Family::gks) {
      if (gamma <= 0 || delta <= 0)
        throw ModelError("gKS requires gamma > 0 and delta > 0");
      if (lambda_nl <= 0) throw ModelError("gKS requires Lambda > 0");
      if (scaling == Scaling::thin_film) {
        if (std::abs(gamma - delta) > 1e-12)
          throw ModelError("thin_film scaling requires gamma == delta");
        if (std::abs(epsilon * epsilon + delta * delta - 1.0) > 1e-12)
          throw ModelError("thin_film scaling requires eps^2 + delta^2 == 1");
      }
    } else {
      if (std::abs(epsilon * epsilon - r) > 1e-12)
        throw ModelError("SH requires epsilon == sqrt(r)");
    }
  }

  static ModelParams gks_gamma_one(double eps, double delta,
                                   double lambda = 1.0) {
    ModelParams p;
    p.family = Family::gks;
    p.scaling = Scaling::gamma_one;
    p.gamma = 1.0;
    p.epsilon = eps;
    p.delta = delta;
    p.lambda_nl = lambda;
    return p;
  }

  static ModelParams gks_thin_film(double eps) {
    if (eps <= 0.0 || eps >= 1.0)
      throw ModelError("thin_film requires 0 < eps < 1");
    ModelParams p;
    p.family = Family::gks;
    p.scaling = Scaling::thin_film;
    p.epsilon = eps;
    p.delta = std::sqrt(1.0 - eps * eps);
    p.gamma = p.delta;
    p.lambda_nl = 1.0;
    return p;
  }

  static ModelParams swift_hohenberg(double eps) {
    ModelParams p;
    p.family = Family::swift_hohenberg;
    p.epsilon = eps;
    p.r = eps * eps;
    p.gamma = 1.0;
    p.delta = 0.0;
    p.lambda_nl = 0.0;
    return p;
  }

  // Nonlinearity f, kept behind one evaluation point so the high-frequency
  // bounds stay family-generic.
  double f(double u) const {
    return family == Family::gks ? 0.5 * lambda_nl * u * u : u * u * u;
  }
  double fp(double u) const {
    return family == Family::gks ? lambda_nl * u : 3.0 * u * u;
  }
  double fpp(double u) const {
    return family == Family::gks ? lambda_nl : 6.0 * u;
  }
};

// Phase-space vector field of the traveling-wave ODE.  gKS uses the
// once-integrated third-order system
//   (u, u', u'')' = (u', u'', (c u - eps u'' - delta u' - f(u) + q)/gamma),
// SH the unintegrable fourth-order one,
//   u'''' = c u' - 2 u'' - (1 - r) u - u^3.
// State components beyond the family's dimension are ignored and returned 0.
inline Vector4d traveling_rhs(const ModelParams& p, double c, double q,
                              const Vector4d& w) {
  Vector4d d = Vector4d::Zero();
  if (p.family == Family::gks) {
    d[0] = w[1];
    d[1] = w[2];
    d[2] = (c * w[0] - p.epsilon * w[2] - p.delta * w[1] - p.f(w[0]) + q) /
           p.gamma;
  } else {
    d[0] = w[1];
    d[1] = w[2];
    d[2] = w[3];
    d[3] = c * w[1] - 2.0 * w[2] - (1.0 - p.r) * w[0] - p.f(w[0]);
  }
  return d;
}

// Checked entry point matching the spec'd operation signature.
inline Eigen::VectorXd traveling_rhs_checked(const ModelParams& p, double c,
                                             double q,
                                             const Eigen::VectorXd& state) {
  if (state.size() != p.dimension())
    throw ModelError("traveling_rhs: state dimension " +
                     std::to_string(state.size()) + " does not match family");
  Vector4d w = Vector4d::Zero();
  for (int i = 0; i < state.size(); ++i) w[i] = state[i];
  Vector4d d = traveling_rhs(p, c, q, w);
  return d.head(p.dimension());
}

// u'''' along a profile, from differentiating the traveling-wave ODE (gKS)
// or from the ODE itself (SH).
inline double profile_u4(const ModelParams& p, double c, const Vector4d& w) {
  if (p.family == Family::gks)
    return ((c - p.fp(w[0])) * w[1] - p.epsilon * traveling_rhs(p, c, 0, w)[2] -
            p.delta * w[2]) /
           p.gamma;
  return traveling_rhs(p, c, 0, w)[3];
}

// Coefficient matrix H(x, lambda) of the first-order spectral system
// Y' = H Y, Y = (v, v', v'', v'''), given the profile phase state w at x.
// gKS: lambda v = ((c - f'(u)) v)' - gamma v'''' - eps v''' - delta v''
// SH:  lambda v = c v' - v'''' - 2 v'' + (r - 1) v - 3 u^2 v
// H is affine in lambda; only the (3,0) entry carries it.
inline Matrix4cd spectral_matrix(const ModelParams& p, double c,
                                 const Vector4d& w, Complex lambda) {
  Matrix4cd H = Matrix4cd::Zero();
  H(0, 1) = 1.0;
  H(1, 2) = 1.0;
  H(2, 3) = 1.0;
  if (p.family == Family::gks) {
    const double a = p.fp(w[0]);
    const double ap = p.fpp(w[0]) * w[1];
    H(3, 0) = (-lambda - ap) / p.gamma;
    H(3, 1) = (c - a) / p.gamma;
    H(3, 2) = -p.delta / p.gamma;
    H(3, 3) = -p.epsilon / p.gamma;
  } else {
    H(3, 0) = (p.r - 1.0) - 3.0 * w[0] * w[0] - lambda;
    H(3, 1) = c;
    H(3, 2) = -2.0;
    H(3, 3) = 0.0;
  }
  return H;
}

// tr H is constant in x for both families.
inline double spectral_trace(const ModelParams& p) {
  return p.family == Family::gks ? -p.epsilon / p.gamma : 0.0;
}

// Constant-state dispersion relation lambda(k): the eigenvalue of the
// linearization about u == u0 for Fourier mode e^{ikx}, k possibly complex.
inline Complex constant_dispersion(const ModelParams& p, double c, double u0,
                                   Complex k) {
  const Complex ik(0.0, 1.0);
  const Complex mu = ik * k;
  if (p.family == Family::gks)
    return mu * (c - p.fp(u0)) - p.gamma * mu * mu * mu * mu -
           p.epsilon * mu * mu * mu - p.delta * mu * mu;
  return (p.r - 1.0) - 3.0 * u0 * u0 + c * mu - 2.0 * mu * mu -
         mu * mu * mu * mu;
}

// Galilean map for gKS with f = Lambda u^2 / 2: shifting u by c0 sends
// (c, q) -> (c + Lambda c0, q - c c0 - Lambda c0^2 / 2).
struct GalileanImage {
  double shift;  // added to u
  double c;
  double q;
};
inline GalileanImage galilean_map(const ModelParams& p, double c, double q,
                                  double c0) {
  if (p.family != Family::gks)
    throw ModelError("galilean_map: gKS only");
  return {c0, c + p.lambda_nl * c0,
          q - c * c0 - 0.5 * p.lambda_nl * c0 * c0};
}

// Rescaling of a gamma_one problem to the gamma = Lambda = 1 normal form
// used by the high-frequency bounds: x = L xt, t = T tt, u = U ut.
struct NormalFormScale {
  double L, U, T;
  double eps1, delta1;
};
inline NormalFormScale to_unit_gamma(const ModelParams& p) {
  const double L = std::cbrt(p.gamma / p.lambda_nl);
  const double U = 1.0;
  const double T = L / (p.lambda_nl * U);
  return {L, U, T, p.epsilon / (p.lambda_nl * U * L * L),
          p.delta / (p.lambda_nl * U * L)};
}

}  // namespace twave
