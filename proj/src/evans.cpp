#include "twave/evans.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace twave {

namespace {

using Vec16 = Eigen::Matrix<Complex, 16, 1>;
using Vec33 = Eigen::Matrix<Complex, 33, 1>;
using Frame = Eigen::Matrix<Complex, 8, 4>;

double hermite5(double f0, double g0, double G0, double f1, double g1,
                double G1, double h, double s) {
  g0 *= h;
  g1 *= h;
  G0 *= h * h;
  G1 *= h * h;
  const double A = f1 - f0 - g0 - 0.5 * G0;
  const double B = g1 - g0 - G0;
  const double C = G1 - G0;
  const double a3 = 10.0 * A - 4.0 * B + 0.5 * C;
  const double a4 = -15.0 * A + 7.0 * B - C;
  const double a5 = 6.0 * A - 3.0 * B + 0.5 * C;
  return f0 + s * (g0 + s * (0.5 * G0 + s * (a3 + s * (a4 + s * a5))));
}

// Joint 4x4 propagator over [x0, x1] with interpolated coefficients.
Matrix4cd propagator(const SpectralSystem& sys, Complex lambda, double x0,
                     double x1, const OdeTol& tol) {
  Vec16 y;
  Eigen::Map<Matrix4cd>(y.data()).setIdentity();
  auto rhs = [&](double x, const Vec16& s, Vec16& d) {
    const Matrix4cd H = sys.H_at(x, lambda);
    Eigen::Map<Matrix4cd>(d.data()) =
        H * Eigen::Map<const Matrix4cd>(s.data());
  };
  integrate_dp54(rhs, y, x0, x1, tol);
  return Eigen::Map<Matrix4cd>(y.data());
}

}  // namespace

Vector4d SpectralSystem::state_at(double x) const {
  if (constant_coeff) return w0;
  const int N = int(jet.cols());
  const double h = X / N;
  double y = std::fmod(x, X);
  if (y < 0) y += X;
  int j = std::min(int(y / h), N - 1);
  const int k = (j + 1) % N;
  const double s = y / h - j;
  Vector4d out;
  for (int r = 0; r < 4; ++r)
    out[r] = hermite5(jet(r, j), jet(r + 1, j), jet(r + 2, j), jet(r, k),
                      jet(r + 1, k), jet(r + 2, k), h, s);
  return out;
}

SpectralSystem linearized_symbol(const WaveProfile& profile) {
  if (!profile.converged())
    throw EvansError("linearized_symbol: profile not converged");
  SpectralSystem sys;
  sys.params = profile.params;
  sys.c = profile.c;
  sys.q = profile.q;
  sys.X = profile.X;
  sys.w0 = profile.b;
  sys.constant_coeff = false;

  // Refine the coefficient grid 4x by short integrations from each stored
  // sample.  A span of one sample spacing cannot ride the unstable manifold,
  // and the finer grid pushes the interpolation error to machine level -
  // the defective origin pair splits with the square root of any
  // coefficient perturbation, so this headroom matters.
  const ModelParams& p = profile.params;
  const int N0 = profile.n_samples;
  const int refine = 4;
  const int N = N0 * refine;
  sys.jet.resize(6, N);
  const OdeTol tol{1e-13, 1e-12};
  for (int j = 0; j < N0; ++j) {
    Vector4d y = profile.samples.col(j);
    if (p.family == Family::gks) y[3] = 0.0;
    auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
      d = traveling_rhs(p, profile.c, profile.q, s);
    };
    const double x0 = profile.X * j / N0;
    for (int m = 0; m < refine; ++m) {
      if (m > 0)
        integrate_dp54(rhs, y, x0 + profile.X * (m - 1) / N,
                       x0 + profile.X * m / N, tol);
      Vector4d w = y;
      if (p.family == Family::gks)
        w[3] = traveling_rhs(p, profile.c, profile.q, w)[2];
      const int col = j * refine + m;
      for (int r = 0; r < 4; ++r) sys.jet(r, col) = w[r];
      const double u4 = profile_u4(p, profile.c, w);
      sys.jet(4, col) = u4;
      // one more derivative of the traveling ODE
      if (p.family == Family::gks)
        sys.jet(5, col) = ((profile.c - p.fp(w[0])) * w[2] -
                           p.fpp(w[0]) * w[1] * w[1] - p.epsilon * u4 -
                           p.delta * w[3]) /
                          p.gamma;
      else
        sys.jet(5, col) = profile.c * w[2] - 2.0 * w[3] -
                          (1.0 - p.r) * w[1] - 3.0 * w[0] * w[0] * w[1];
    }
  }
  return sys;
}

SpectralSystem constant_system(const ModelParams& params, double c, double u0,
                               double X) {
  SpectralSystem sys;
  sys.params = params;
  sys.c = c;
  sys.q = 0.0;
  sys.X = X;
  sys.w0 = Vector4d(u0, 0.0, 0.0, 0.0);
  sys.constant_coeff = true;
  return sys;
}

EvansSolver::EvansSolver(SpectralSystem sys, OdeTol tol)
    : sys_(std::move(sys)), tol_(tol) {}

Matrix4cd EvansSolver::monodromy(Complex lambda, double abel_rtol) {
  Matrix4cd psi = propagator(sys_, lambda, 0.0, sys_.X, tol_);
  const Complex expected = std::exp(Complex(sys_.trace_integral(), 0.0));
  const Complex det = psi.determinant();
  if (std::abs(det - expected) > abel_rtol * std::abs(expected))
    throw EvansError(
        "monodromy: Abel identity violated (rel " +
        std::to_string(std::abs(det - expected) / std::abs(expected)) +
        "); tolerance too loose for this (lambda, X)");
  return psi;
}

const EvansSolver::Solve& EvansSolver::solve(Complex lambda) {
  const std::pair<double, double> key{lambda.real(), lambda.imag()};
  if (auto it = cache_.find(key); it != cache_.end()) return *it->second;

  auto rec = std::make_shared<Solve>();
  ++solves_;

  // Lifted polar evolution of the block [I; I]: orthonormal 8x4 frame plus
  // a complex log-radius, re-orthonormalized chunk by chunk.
  Vec33 y;
  Frame Q0 = Frame::Zero();
  for (int i = 0; i < 4; ++i) {
    Q0(i, i) = 1.0 / std::numbers::sqrt2;
    Q0(i + 4, i) = 1.0 / std::numbers::sqrt2;
  }
  Eigen::Map<Frame>(y.data()) = Q0;
  y[32] = Complex(4.0 * 0.5 * std::log(2.0), 0.0);  // log det(sqrt(2) I)

  auto rhs = [&](double x, const Vec33& s, Vec33& d) {
    const Matrix4cd H = sys_.H_at(x, lambda);
    Eigen::Map<const Frame> Q(s.data());
    Frame T = Frame::Zero();
    T.topRows<4>() = H * Q.topRows<4>();
    const Matrix4cd M = Q.adjoint() * T;
    Eigen::Map<Frame>(d.data()) = T - Q * M;
    d[32] = M.trace();
  };

  const int chunks = 64;
  for (int k = 0; k < chunks; ++k) {
    integrate_dp54(rhs, y, sys_.X * k / chunks, sys_.X * (k + 1) / chunks,
                   tol_);
    Eigen::Map<Frame> Q(y.data());
    const double drift =
        (Q.adjoint() * Q - Matrix4cd::Identity()).cwiseAbs().maxCoeff();
    if (drift > 1e-6)
      throw EvansError("lifted frame degeneracy (orthonormality drift " +
                       std::to_string(drift) + ")");
    if (drift > 1e-10) {
      Eigen::HouseholderQR<Frame> qr(Q);
      Frame Qn = qr.householderQ() * Eigen::Matrix<Complex, 8, 4>::Identity();
      Eigen::Matrix<Complex, 4, 4> R =
          qr.matrixQR().topRows<4>().template triangularView<Eigen::Upper>();
      Complex logdet = 0.0;
      for (int i = 0; i < 4; ++i) logdet += std::log(R(i, i));
      Q = Qn;
      y[32] += logdet;
    }
  }
  rec->frame = Eigen::Map<Frame>(y.data());
  rec->log_radius = y[32];

  // Spatial eigenvalue data at x = 0 for the rescaled variant.
  Eigen::ComplexEigenSolver<Matrix4cd> es(sys_.H_at(0.0, lambda), false);
  rec->rescalable = true;
  for (int i = 0; i < 4; ++i) {
    const double re = es.eigenvalues()[i].real();
    if (std::abs(re) <= 1e-8) rec->rescalable = false;
    if (re < 0) {
      ++rec->resc.n;
      rec->resc.alpha_minus += re;
    } else {
      rec->resc.alpha_plus += re;
    }
  }

  auto [it, ok] = cache_.emplace(key, std::move(rec));
  return *it->second;
}

void EvansSolver::fill_balanced(Solve& s, Complex lambda) {
  if (s.have_balanced) return;
  // Both half-period propagators by integration, never by inversion; the
  // profile coefficients wrap periodically.
  s.prop_left = propagator(sys_, lambda, -0.5 * sys_.X, 0.0, tol_);
  s.prop_right = propagator(sys_, lambda, 0.5 * sys_.X, 0.0, tol_);
  s.have_balanced = true;
}

Complex EvansSolver::eval_on(const Solve& s, Complex lambda, Complex xi,
                             EvansVariant v) const {
  const Complex z = std::exp(Complex(0.0, 1.0) * xi * sys_.X);
  switch (v) {
    case EvansVariant::plain:
    case EvansVariant::lifted_unscaled:
    case EvansVariant::lifted_scaled: {
      // det(Psi - zI) = det(Q_top - z Q_bot) det R with [Psi; I] = Q R.
      const Matrix4cd M = s.frame.topRows<4>() - z * s.frame.bottomRows<4>();
      const Complex core = M.determinant();
      if (v == EvansVariant::lifted_scaled)
        return core * std::exp(Complex(0.0, s.log_radius.imag()));
      if (s.log_radius.real() > 700.0)
        throw EvansError("unscaled Evans value overflows; use lifted_scaled");
      return core * std::exp(s.log_radius);
    }
    case EvansVariant::balanced: {
      return (s.prop_left - z * s.prop_right).determinant();
    }
    case EvansVariant::rescaled: {
      if (!s.rescalable)
        throw RescalingUndefined(
            "rescaling undefined here: spatial eigenvalue within 1e-8 of "
            "the imaginary axis");
      const Complex bal = (s.prop_left - z * s.prop_right).determinant();
      const Complex pre =
          std::exp(Complex(
              (s.resc.alpha_minus - s.resc.alpha_plus) * sys_.X / 2.0, 0.0)) *
          std::exp(Complex(0.0, -double(s.resc.n)) * xi * sys_.X);
      return pre * bal;
    }
  }
  throw EvansError("bad variant");
}

Complex EvansSolver::eval(Complex lambda, Complex xi, EvansVariant v) {
  Solve& s = const_cast<Solve&>(solve(lambda));
  if (v == EvansVariant::balanced || v == EvansVariant::rescaled)
    fill_balanced(s, lambda);
  return eval_on(s, lambda, xi, v);
}

EvansValue EvansSolver::evaluate(const EvansQuery& query) {
  EvansValue out;
  out.value = eval(query.lambda, query.xi, query.variant);
  if (query.variant == EvansVariant::plain)
    out.monodromy = monodromy(query.lambda);
  if (query.variant == EvansVariant::rescaled)
    out.rescaling = solve(query.lambda).resc;
  return out;
}

DRow EvansSolver::row(Complex lambda, EvansVariant v) {
  Solve& s = const_cast<Solve&>(solve(lambda));
  if (v == EvansVariant::balanced || v == EvansVariant::rescaled)
    fill_balanced(s, lambda);
  // The shared_ptr in the cache keeps the record alive for the row's life.
  auto rec = cache_.at({lambda.real(), lambda.imag()});
  return [this, rec, lambda, v](Complex xi) {
    return eval_on(*rec, lambda, xi, v);
  };
}

DProvider EvansSolver::provider(EvansVariant v) {
  return [this, v](Complex lambda) { return row(lambda, v); };
}

}  // namespace twave
