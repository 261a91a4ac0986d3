#include "twave/hill.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

namespace twave {

namespace {
constexpr double kPi = std::numbers::pi;

// Fourier coefficients of the multiplication coefficient a(x): f'(u) for
// gKS, 3 u^2 for SH.  Direct sums; the grids are tiny.
std::vector<Complex> coefficient_modes(const WaveProfile& w, int M) {
  const int Ns = w.n_samples;
  std::vector<double> a(Ns);
  for (int j = 0; j < Ns; ++j) {
    const double u = w.samples(0, j);
    a[j] = w.params.family == Family::gks ? w.params.fp(u) : 3.0 * u * u;
  }
  std::vector<Complex> out(2 * M + 1);
  for (int m = -M; m <= M; ++m) {
    Complex acc{0.0, 0.0};
    for (int j = 0; j < Ns; ++j)
      acc += a[j] * std::exp(Complex(0.0, -2.0 * kPi * m * j / double(Ns)));
    out[m + M] = acc / double(Ns);
  }
  return out;
}

}  // namespace

HillMatrix hill_assemble(const WaveProfile& profile, double xi, int N) {
  if (N < 4) throw HillError("hill_assemble: N >= 4 required");
  if (!profile.converged())
    throw HillError("hill_assemble: profile not converged");
  if (profile.n_samples < 4 * N)
    throw HillError("hill_assemble: sample grid too coarse for N");

  const ModelParams& p = profile.params;
  const double X = profile.X;
  const int dim = 2 * N + 1;
  HillMatrix out;
  out.N = N;
  out.xi = xi;
  out.provenance = profile_cache_key(p, X, profile.q) + "_N" +
                   std::to_string(N);
  out.entries.resize(dim, dim);

  const std::vector<Complex> ahat = coefficient_modes(profile, 2 * N);

  // Aliasing guard: the coefficient tail beyond N must be negligible.
  double head = 0.0, tail = 0.0;
  for (int m = -2 * N; m <= 2 * N; ++m) {
    const double e = std::norm(ahat[m + 2 * N]);
    (std::abs(m) > N ? tail : head) += e;
  }
  if (tail > 1e-8 * (head + tail))
    out.warning = "coefficient tail beyond N carries " +
                  std::to_string(tail / (head + tail)) + " relative energy";

  for (int mi = -N; mi <= N; ++mi) {
    const Complex Dm(0.0, xi + 2.0 * kPi * mi / X);
    for (int ni = -N; ni <= N; ++ni) {
      const Complex Dn(0.0, xi + 2.0 * kPi * ni / X);
      Complex v{0.0, 0.0};
      const Complex am = ahat[mi - ni + 2 * N];
      if (p.family == Family::gks) {
        if (mi == ni)
          v += -p.gamma * Dn * Dn * Dn * Dn - p.epsilon * Dn * Dn * Dn -
               p.delta * Dn * Dn + profile.c * Dn;
        v -= Dm * am;  // d/dx acting on (a v)
      } else {
        if (mi == ni)
          v += (p.r - 1.0) - 2.0 * Dn * Dn - Dn * Dn * Dn * Dn +
               profile.c * Dn;
        v -= am;
      }
      out.entries(mi + N, ni + N) = v;
    }
  }
  return out;
}

std::vector<Complex> hill_eigenvalues(const WaveProfile& profile, double xi,
                                      int N) {
  HillMatrix m = hill_assemble(profile, xi, N);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m.entries, false);
  if (es.info() != Eigen::Success)
    throw HillError("hill_eigenvalues: eigensolver failed");
  std::vector<Complex> out(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

HillSweep hill_sweep(const WaveProfile& profile,
                     const std::vector<double>& xi_grid, int N) {
  HillSweep out;
  out.xi = xi_grid;

  // Convergence monitor at a few stations: track everything that is not
  // strongly damped, compare N against 2N, and escalate once if needed.
  auto monitor = [&](int n) {
    double worst = 0.0;
    for (double xi : {xi_grid.front(), xi_grid[xi_grid.size() / 2],
                      xi_grid.back()}) {
      std::vector<Complex> a = hill_eigenvalues(profile, xi, n);
      std::vector<Complex> b = hill_eigenvalues(profile, xi, 2 * n);
      for (const Complex& la : a) {
        // Skip the strongly damped part and the defective origin cluster,
        // whose split scales like sqrt(solver noise) rather than truncation.
        if (la.real() < -1.0 || std::abs(la) < 1e-3) continue;
        double best = 1e300;
        for (const Complex& lb : b) best = std::min(best, std::abs(la - lb));
        worst = std::max(worst, best);
      }
    }
    return worst;
  };
  out.N = N;
  out.convergence = monitor(N);
  if (out.convergence > 1e-6) {
    out.N = 2 * N;
    out.convergence = monitor(out.N);
  }
  for (double xi : xi_grid)
    out.eigs.push_back(hill_eigenvalues(profile, xi, out.N));
  HillMatrix probe = hill_assemble(profile, xi_grid.front(), out.N);
  out.warning = probe.warning;
  return out;
}

std::vector<Complex> hill_nearest(const WaveProfile& profile, double xi,
                                  int N, Complex sigma, int count) {
  HillMatrix m = hill_assemble(profile, xi, N);
  const int dim = 2 * N + 1;
  Eigen::MatrixXcd shifted =
      m.entries - sigma * Eigen::MatrixXcd::Identity(dim, dim);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(shifted);
  Eigen::MatrixXcd inv = lu.solve(Eigen::MatrixXcd::Identity(dim, dim));
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(inv, false);
  if (es.info() != Eigen::Success)
    throw HillError("hill_nearest: eigensolver failed");
  std::vector<Complex> mu(es.eigenvalues().data(),
                          es.eigenvalues().data() + dim);
  std::sort(mu.begin(), mu.end(),
            [](Complex a, Complex b) { return std::abs(a) > std::abs(b); });
  std::vector<Complex> out;
  for (int i = 0; i < count && i < dim; ++i)
    out.push_back(sigma + 1.0 / mu[i]);
  return out;
}

double hill_max_real(const HillSweep& sweep) {
  double m = -1e300;
  for (const auto& eig : sweep.eigs)
    for (const Complex& l : eig) m = std::max(m, l.real());
  return m;
}

}  // namespace twave
