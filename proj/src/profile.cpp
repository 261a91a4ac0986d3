#include "twave/profile.hpp"

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>
#include <boost/math/special_functions/jacobi_elliptic.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>

namespace twave {

namespace {

constexpr double kPi = std::numbers::pi;

// Quintic Hermite on one interval from endpoint values/derivatives.
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

// Fill the fourth jet row (gKS), certify sup norms by a dense Hermite scan,
// and record the mean.
void finish_profile(WaveProfile& w) {
  const int N = w.n_samples;
  const double h = w.X / N;
  if (w.params.family == Family::gks)
    for (int j = 0; j < N; ++j)
      w.samples(3, j) = traveling_rhs(w.params, w.c, w.q, w.samples.col(j))[2];
  auto scan = [&](int row) {
    double best = 0.0;
    int best_j = 0;
    for (int j = 0; j < N; ++j) {
      const int k = (j + 1) % N;
      const auto a = w.samples.col(j);
      const auto bb = w.samples.col(k);
      for (int m = 0; m < 4; ++m) {
        const double v =
            std::abs(hermite5(a[row], a[row + 1], a[row + 2], bb[row],
                              bb[row + 1], bb[row + 2], h, m / 4.0));
        if (v > best) {
          best = v;
          best_j = j;
        }
      }
    }
    for (int j = best_j - 1; j <= best_j + 1; ++j) {
      const int jj = (j + N) % N;
      const int k = (jj + 1) % N;
      const auto a = w.samples.col(jj);
      const auto bb = w.samples.col(k);
      for (int m = 0; m <= 64; ++m)
        best = std::max(
            best, std::abs(hermite5(a[row], a[row + 1], a[row + 2], bb[row],
                                    bb[row + 1], bb[row + 2], h, m / 64.0)));
    }
    return best * (1.0 + 1e-7);
  };
  w.sup_u = scan(0);
  w.sup_du = scan(1);
  double mean = 0.0;
  for (int j = 0; j < N; ++j) mean += w.samples(0, j);
  w.mean_u = mean / N;
}

int unknown_count(const WaveProfile& w, RefineFree mode) {
  if (w.params.family == Family::swift_hohenberg && mode != RefineFree::sh_even)
    throw ProfileError("SH profiles refine with sh_even");
  if (w.params.family == Family::gks && mode == RefineFree::sh_even)
    throw ProfileError("sh_even mode is for SH profiles");
  switch (mode) {
    case RefineFree::delta:
    case RefineFree::q:
      return 3;
    case RefineFree::speed_and_q:
      return 4;
    case RefineFree::sh_even:
      return 2;
  }
  throw ProfileError("bad refine mode");
}

Eigen::VectorXd pack_unknowns(const WaveProfile& w, RefineFree mode) {
  Eigen::VectorXd z;
  switch (mode) {
    case RefineFree::delta:
      z.resize(3);
      z << w.b[0], w.b[2], w.params.delta;
      break;
    case RefineFree::q:
      z.resize(3);
      z << w.b[0], w.b[2], w.q;
      break;
    case RefineFree::speed_and_q:
      z.resize(4);
      z << w.b[0], w.b[2], w.c, w.q;
      break;
    case RefineFree::sh_even:
      z.resize(2);
      z << w.b[0], w.b[2];
      break;
  }
  return z;
}

void unpack_unknowns(WaveProfile& w, RefineFree mode,
                     const Eigen::VectorXd& z) {
  w.b[1] = 0.0;  // phase condition u'(0) = 0
  switch (mode) {
    case RefineFree::delta:
      w.b[0] = z[0];
      w.b[2] = z[1];
      w.params.delta = z[2];
      break;
    case RefineFree::q:
      w.b[0] = z[0];
      w.b[2] = z[1];
      w.q = z[2];
      break;
    case RefineFree::speed_and_q:
      w.b[0] = z[0];
      w.b[2] = z[1];
      w.c = z[2];
      w.q = z[3];
      break;
    case RefineFree::sh_even:
      w.b[0] = z[0];
      w.b[2] = z[1];
      w.b[3] = 0.0;
      w.c = 0.0;
      break;
  }
}

Eigen::VectorXd shoot_residual(const WaveProfile& base, RefineFree mode,
                               const Eigen::VectorXd& z, const OdeTol& tol) {
  WaveProfile w = base;
  unpack_unknowns(w, mode, z);
  const ModelParams& p = w.params;
  if (mode == RefineFree::sh_even) {
    // Even orbits of the reversible SH ODE: match u', u''' at the half period.
    Vector4d y = w.b;
    auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
      d = traveling_rhs(p, 0.0, 0.0, s);
    };
    integrate_dp54(rhs, y, 0.0, 0.5 * w.X, tol);
    Eigen::VectorXd F(2);
    F << y[1], y[3];
    return F;
  }
  if (mode == RefineFree::speed_and_q) {
    Vector4d y = w.b;
    y[3] = 0.0;  // running integral of u closes the system with mean(u) = 0
    auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
      d = traveling_rhs(p, w.c, w.q, s);
      d[3] = s[0];
    };
    integrate_dp54(rhs, y, 0.0, w.X, tol);
    Eigen::VectorXd F(4);
    F << y[0] - w.b[0], y[1] - w.b[1], y[2] - w.b[2], y[3] / w.X;
    return F;
  }
  Vector4d y = w.b;
  auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
    d = traveling_rhs(p, w.c, w.q, s);
  };
  integrate_dp54(rhs, y, 0.0, w.X, tol);
  Eigen::VectorXd F(3);
  F << y[0] - w.b[0], y[1] - w.b[1], y[2] - w.b[2];
  return F;
}

void fill_samples(WaveProfile& w, const RefineOpts& opts) {
  const int N = opts.n_samples;
  w.n_samples = N;
  w.samples.resize(4, N);
  const ModelParams& p = w.params;
  Vector4d y = w.b;
  auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
    d = traveling_rhs(p, w.c, w.q, s);
  };
  const double h = w.X / N;
  for (int j = 0; j < N; ++j) {
    w.samples.col(j) = y;
    integrate_dp54(rhs, y, j * h, (j + 1) * h, opts.tol);
  }
  // Segmented sampling accumulates restart error; the authoritative defect
  // comes from one continuous solve.
  const double resampled = (y - w.b).head(p.dimension()).norm();
  if (resampled > 1e-6 * (1.0 + w.b.norm()))
    throw ProfileError("fill_samples: resampled defect " +
                       std::to_string(resampled));
  w.residual = profile_defect(w, opts.tol);
  finish_profile(w);
}

// Segment count for multiple shooting: cap the per-segment error
// amplification near exp(6).  The thin-film families carry a fast mode of
// rate ~ gamma^{-1/3}, which makes single shooting hopeless for large X.
int shooting_segments(const ModelParams& p, double X) {
  const double rate =
      p.family == Family::gks ? std::max(1.0, std::cbrt(1.0 / p.gamma)) : 1.0;
  int m = 1;
  while (m < 64 && rate * X / m > 6.0) m *= 2;
  return m;
}

WaveProfile refine_multi_speedq(const WaveProfile& seed, int m,
                                const RefineOpts& opts) {
  const ModelParams p = seed.params;
  if (p.family != Family::gks)
    throw ProfileError("multiple shooting: gKS thin-film mode only");
  const double X = seed.X;
  const int nz = 3 * m + 1;  // (b1,b3), interior nodes, c, q
  if (seed.n_samples <= 0 || seed.n_samples % m != 0)
    throw ProfileError("multiple shooting: seed must carry samples");

  Eigen::VectorXd z(nz);
  z[0] = seed.b[0];
  z[1] = seed.b[2];
  const int stride = seed.n_samples / m;
  for (int i = 1; i < m; ++i)
    for (int k = 0; k < 3; ++k) z[2 + 3 * (i - 1) + k] =
        seed.samples(k, i * stride);
  z[3 * m - 1] = seed.c;
  z[3 * m] = seed.q;

  auto node_state = [&](const Eigen::VectorXd& zz, int i) {
    if (i == 0) return Vector4d(zz[0], 0.0, zz[1], 0.0);
    return Vector4d(zz[2 + 3 * (i - 1)], zz[3 + 3 * (i - 1)],
                    zz[4 + 3 * (i - 1)], 0.0);
  };

  struct Segment {
    Vector4d end;
    double mass;  // integral of u over the segment
  };
  auto shoot_segment = [&](const Eigen::VectorXd& zz, int i) {
    const double c = zz[3 * m - 1], q = zz[3 * m];
    Vector4d y = node_state(zz, i);
    y[3] = 0.0;
    auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
      d = traveling_rhs(p, c, q, s);
      d[3] = s[0];
    };
    try {
      integrate_dp54(rhs, y, X * i / m, X * (i + 1) / m, opts.tol);
    } catch (const OdeError& e) {
      throw NewtonDivergence(std::string("refine: ") + e.what(),
                             std::numeric_limits<double>::infinity());
    }
    return Segment{Vector4d(y[0], y[1], y[2], 0.0), y[3]};
  };
  auto assemble = [&](const Eigen::VectorXd& zz,
                      const std::vector<Segment>& segs) {
    Eigen::VectorXd F(nz);
    double mass = 0.0;
    for (int i = 0; i < m; ++i) {
      const Vector4d nxt = node_state(zz, (i + 1) % m);
      for (int k = 0; k < 3; ++k) F[3 * i + k] = segs[i].end[k] - nxt[k];
      mass += segs[i].mass;
    }
    F[3 * m] = mass / X;  // zero-mean normalization
    return F;
  };
  auto full_residual = [&](const Eigen::VectorXd& zz) {
    std::vector<Segment> segs(m);
    for (int i = 0; i < m; ++i) segs[i] = shoot_segment(zz, i);
    return assemble(zz, segs);
  };

  Eigen::VectorXd F = full_residual(z);
  double defect = F.norm();
  const double tol_def =
      opts.defect_scale * (1.0 + Vector4d(z[0], 0, z[1], 0).norm());
  bool done = false;
  for (int iter = 0; iter < opts.max_newton && !done; ++iter) {
    if (defect < tol_def) {
      done = true;
      break;
    }
    // Structured finite differences: a node column touches one segment plus
    // identity couplings; only c and q touch every segment.
    Eigen::MatrixXd J(nz, nz);
    for (int j = 0; j < nz; ++j) {
      Eigen::VectorXd zj = z;
      const double h = opts.fd_scale * (1.0 + std::abs(z[j]));
      zj[j] += h;
      if (j >= 3 * m - 1) {
        J.col(j) = (full_residual(zj) - F) / h;
        continue;
      }
      const int node = j < 2 ? 0 : (j - 2) / 3 + 1;
      Eigen::VectorXd Fj = F;
      Segment s = shoot_segment(zj, node);
      const Vector4d nxt = node_state(zj, (node + 1) % m);
      for (int k = 0; k < 3; ++k) Fj[3 * node + k] = s.end[k] - nxt[k];
      // identity coupling in the predecessor's matching rows
      const int prev = (node + m - 1) % m;
      const Segment sp = shoot_segment(z, prev);  // unperturbed
      const Vector4d nxt_p = node_state(zj, node);
      for (int k = 0; k < 3; ++k) Fj[3 * prev + k] = sp.end[k] - nxt_p[k];
      // mean row: recompute mass delta from the perturbed segment
      Segment s0 = shoot_segment(z, node);
      Fj[3 * m] = F[3 * m] + (s.mass - s0.mass) / X;
      J.col(j) = (Fj - F) / h;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    lu.setThreshold(1e-11);
    if (lu.rank() < nz)
      throw RankDeficient("refine: multishoot Jacobian rank-deficient");
    const Eigen::VectorXd dz = lu.solve(-F);

    bool accepted = false;
    double alpha = 1.0;
    for (int trial = 0; trial < 6 && !accepted; ++trial, alpha *= 0.5) {
      Eigen::VectorXd zt = z + alpha * dz;
      try {
        Eigen::VectorXd Ft = full_residual(zt);
        const double dt = Ft.norm();
        if (dt < defect || dt < 4.0 * tol_def) {
          z = zt;
          F = Ft;
          defect = dt;
          accepted = true;
        }
      } catch (const NewtonDivergence&) {
      }
    }
    if (!accepted)
      throw NewtonDivergence(
          "refine: no damping level reduced the defect (last " +
              std::to_string(defect) + ")",
          defect);
    if (defect < tol_def) done = true;
  }
  if (!done) throw NewtonDivergence("refine: Newton iteration cap", defect);

  // Assemble the profile by sampling each segment from its node.
  WaveProfile w = seed;
  w.c = z[3 * m - 1];
  w.q = z[3 * m];
  w.b = node_state(z, 0);
  const int N = opts.n_samples;
  w.n_samples = N;
  w.samples.resize(4, N);
  const int per = N / m;
  double res = 0.0;
  for (int i = 0; i < m; ++i) {
    Vector4d y = node_state(z, i);
    auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
      d = traveling_rhs(p, w.c, w.q, s);
    };
    for (int j = 0; j < per; ++j) {
      w.samples.col(i * per + j) = y;
      integrate_dp54(rhs, y, X * (i * per + j) / N, X * (i * per + j + 1) / N,
                     opts.tol);
    }
    const Vector4d nxt = node_state(z, (i + 1) % m);
    res = std::max(res, (y - nxt).head(3).norm());
  }
  w.residual = res;
  finish_profile(w);
  return w;
}

WaveProfile refine_impl(const WaveProfile& seed, RefineFree mode,
                        const RefineOpts& opts) {
  const int n = unknown_count(seed, mode);
  WaveProfile w = seed;
  Eigen::VectorXd z = pack_unknowns(w, mode);

  // Diverging trial trajectories surface as OdeError; for shooting that is
  // just a failed trial.
  auto residual = [&](const Eigen::VectorXd& zz) {
    try {
      return shoot_residual(w, mode, zz, opts.tol);
    } catch (const OdeError& e) {
      throw NewtonDivergence(std::string("refine: ") + e.what(),
                             std::numeric_limits<double>::infinity());
    }
  };

  // Damped Newton: the period map amplifies initial-condition errors by the
  // unstable Floquet factor, so full steps routinely leave the basin.
  Eigen::VectorXd F = residual(z);
  double defect = F.norm();
  bool done = false;
  for (int iter = 0; iter < opts.max_newton; ++iter) {
    unpack_unknowns(w, mode, z);
    if (defect < opts.defect_scale * (1.0 + w.b.norm())) {
      done = true;
      break;
    }
    Eigen::MatrixXd J(n, n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd zi = z;
      const double h = opts.fd_scale * (1.0 + std::abs(z[i]));
      zi[i] += h;
      J.col(i) = (residual(zi) - F) / h;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    lu.setThreshold(1e-11);
    if (lu.rank() < n)
      throw RankDeficient("refine: shooting Jacobian rank-deficient");
    const Eigen::VectorXd dz = lu.solve(-F);

    bool accepted = false;
    double alpha = 1.0;
    for (int trial = 0; trial < 6 && !accepted; ++trial, alpha *= 0.5) {
      Eigen::VectorXd zt = z + alpha * dz;
      double dt;
      Eigen::VectorXd Ft;
      try {
        Ft = residual(zt);
        dt = Ft.norm();
      } catch (const NewtonDivergence&) {
        continue;
      }
      if (dt < defect || dt < 4.0 * opts.defect_scale * (1.0 + w.b.norm())) {
        z = zt;
        F = Ft;
        defect = dt;
        accepted = true;
      }
    }
    if (!accepted)
      throw NewtonDivergence(
          "refine: no damping level reduced the defect (last " +
              std::to_string(defect) + ")",
          defect);
  }
  if (!done)
    throw NewtonDivergence("refine: Newton iteration cap", defect);

  unpack_unknowns(w, mode, z);
  fill_samples(w, opts);
  // Refuse silent collapse onto the constant-state manifold.
  const double amp =
      w.samples.row(0).maxCoeff() - w.samples.row(0).minCoeff();
  if (amp < 1e-8 * (1.0 + std::abs(w.b[0])))
    throw NewtonDivergence("refine: collapsed to a constant state", defect);
  return w;
}

}  // namespace

double profile_value(const WaveProfile& w, double x) {
  if (w.n_samples <= 0) throw ProfileError("profile_value: no samples");
  const int N = w.n_samples;
  const double h = w.X / N;
  double y = std::fmod(x, w.X);
  if (y < 0) y += w.X;
  const int j = std::min(int(y / h), N - 1);
  const int k = (j + 1) % N;
  const auto a = w.samples.col(j);
  const auto b = w.samples.col(k);
  return hermite5(a[0], a[1], a[2], b[0], b[1], b[2], h, y / h - j);
}

Vector4d integrate_profile(const ModelParams& p, double c, double q,
                           const Vector4d& w0, double L, const OdeTol& tol) {
  Vector4d y = w0;
  auto rhs = [&](double, const Vector4d& s, Vector4d& d) {
    d = traveling_rhs(p, c, q, s);
  };
  integrate_dp54(rhs, y, 0.0, L, tol);
  return y;
}

double profile_defect(const WaveProfile& w, const OdeTol& tol) {
  Vector4d end = integrate_profile(w.params, w.c, w.q, w.b, w.X, tol);
  return (end - w.b).head(w.params.dimension()).norm();
}

WaveProfile refine(const WaveProfile& seed, RefineFree mode,
                   const RefineOpts& opts) {
  const int m = mode == RefineFree::speed_and_q
                    ? shooting_segments(seed.params, seed.X)
                    : 1;
  auto run = [&](const WaveProfile& s) {
    return m > 1 ? refine_multi_speedq(s, m, opts) : refine_impl(s, mode, opts);
  };
  WaveProfile w = run(seed);
  if (w.b[2] >= 0.0) {
    // Newton settled on the trough; re-anchor at the crest and polish once.
    int jmax = 0;
    for (int j = 1; j < w.n_samples; ++j)
      if (w.samples(0, j) > w.samples(0, jmax)) jmax = j;
    WaveProfile shifted = w;
    if (m > 1) {
      // Rotate the sample grid so the crest sits at x = 0.
      for (int j = 0; j < w.n_samples; ++j)
        shifted.samples.col(j) = w.samples.col((j + jmax) % w.n_samples);
    }
    shifted.b = w.samples.col(jmax);
    shifted.b[1] = 0.0;
    if (w.params.family == Family::gks) shifted.b[3] = 0.0;
    shifted.residual = -1.0;
    w = run(shifted);
    if (w.b[2] >= 0.0)
      throw ProfileError("refine: could not anchor the crest at x = 0");
  }
  if (w.residual > 10.0 * opts.defect_scale * (1.0 + w.b.norm()))
    throw ProfileError("refine: converged defect above tolerance");
  return w;
}

WaveProfile hopf_seed(const ModelParams& params, double q, double amplitude) {
  params.validate();
  if (params.family != Family::gks) throw ProfileError("hopf_seed: gKS only");
  if (q <= 0.0)
    throw ProfileError("hopf_seed: q must be positive (no real equilibria)");
  WaveProfile w;
  w.params = params;
  w.q = q;
  w.c = 0.0;
  const double k = std::sqrt(params.delta / params.gamma);
  w.X = 2.0 * kPi / k;
  const double uplus = std::sqrt(2.0 * q / params.lambda_nl);
  if (amplitude > 0.1)
    w.note = "hopf_seed: amplitude above linear-ansatz range";
  w.b = Vector4d(uplus + amplitude, 0.0, -amplitude * k * k, 0.0);
  const int N = 512;
  w.n_samples = N;
  w.samples.resize(4, N);
  for (int j = 0; j < N; ++j) {
    const double x = w.X * j / N;
    w.samples.col(j) = Vector4d(uplus + amplitude * std::cos(k * x),
                                -amplitude * k * std::sin(k * x),
                                -amplitude * k * k * std::cos(k * x),
                                amplitude * k * k * k * std::sin(k * x));
  }
  w.mean_u = uplus;
  return w;
}

WaveProfile harmonic_seed(const ModelParams& params, double q, double X) {
  if (params.family != Family::gks)
    throw ProfileError("harmonic_seed: gKS only");
  if (q <= 0.0) throw ProfileError("harmonic_seed: q must be positive");
  WaveProfile w;
  w.params = params;
  const double k = 2.0 * kPi / X;
  w.params.delta = params.gamma * k * k;
  w.q = q;
  w.c = 0.0;
  w.X = X;
  const double A = 2.0 * std::sqrt(q / params.lambda_nl);
  w.b = Vector4d(A, 0.0, -A * k * k, 0.0);
  const int N = 512;
  w.n_samples = N;
  w.samples.resize(4, N);
  for (int j = 0; j < N; ++j) {
    const double x = X * j / N;
    w.samples.col(j) =
        Vector4d(A * std::cos(k * x), -A * k * std::sin(k * x),
                 -A * k * k * std::cos(k * x), A * k * k * k * std::sin(k * x));
  }
  return w;
}

double kdv_solvability_kappa(double p) {
  using boost::math::jacobi_elliptic;
  const double K = boost::math::ellint_1(p);
  const int n = 4096;
  double i1 = 0.0, i2 = 0.0;
  for (int j = 0; j < n; ++j) {
    const double y = 2.0 * K * j / n;
    double cn, dn;
    const double sn = jacobi_elliptic(p, y, &cn, &dn);
    const double d1 = -2.0 * cn * sn * dn;
    const double d2 = -2.0 * (cn * cn * dn * dn - sn * sn * dn * dn -
                              p * p * sn * sn * cn * cn);
    i1 += d1 * d1;
    i2 += d2 * d2;
  }
  return std::sqrt(i1 / i2);
}

double kdv_period_of_modulus(double p) {
  return 2.0 * boost::math::ellint_1(p) / kdv_solvability_kappa(p);
}

WaveProfile kdv_seed(double u0, double kappa, double p, double delta) {
  if (p < 0.0 || p >= 1.0) throw ProfileError("kdv_seed: modulus in [0,1)");
  if (delta <= 0.0 || delta > 0.1)
    throw ProfileError("kdv_seed: requires 0 < delta <= 0.1");
  using boost::math::jacobi_elliptic;
  WaveProfile w;
  w.params = ModelParams::gks_thin_film(std::sqrt(1.0 - delta * delta));
  const double K = boost::math::ellint_1(p);
  w.X = p > 0.0 ? 2.0 * K / kappa : 2.0 * kPi / kappa;
  w.c = 8.0 * kappa * kappa * p * p - 4.0 * kappa * kappa + u0;
  const double amp = 12.0 * p * p * kappa * kappa;
  const int N = 512;
  w.n_samples = N;
  w.samples.resize(4, N);
  for (int j = 0; j < N; ++j) {
    const double y = kappa * w.X * j / N;
    double cn, dn;
    const double sn = jacobi_elliptic(p, y, &cn, &dn);
    const double u = u0 + amp * cn * cn;
    const double du = -2.0 * amp * kappa * cn * sn * dn;
    const double ddu =
        -2.0 * amp * kappa * kappa *
        (cn * cn * dn * dn - sn * sn * dn * dn - p * p * sn * sn * cn * cn);
    w.samples.col(j) = Vector4d(u, du, ddu, 0.0);
  }
  w.b = w.samples.col(0);
  // q from the seed's own jet at the crest (u''' = 0 there).
  w.q = -w.c * w.b[0] + w.params.epsilon * w.b[2] + w.params.delta * w.b[1] +
        w.params.f(w.b[0]);
  w.mean_u =
      p > 0.0 ? u0 + amp * (boost::math::ellint_2(p) - (1.0 - p * p) * K) /
                         (p * p * K)
              : u0;
  return w;
}

WaveProfile kdv_seed_for_period(double X, double delta) {
  if (X <= 2.0 * kPi)
    throw ProfileError("kdv_seed_for_period: period below the p -> 0 limit");
  double lo = 1e-6, hi = 1.0 - 1e-12;
  if (kdv_period_of_modulus(lo) > X)
    throw ProfileError("kdv_seed_for_period: solvability root not bracketed");
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kdv_period_of_modulus(mid) < X ? lo : hi) = mid;
  }
  const double p = 0.5 * (lo + hi);
  const double kappa = kdv_solvability_kappa(p);
  const double K = boost::math::ellint_1(p);
  const double u0 = -12.0 * kappa * kappa *
                    (boost::math::ellint_2(p) - (1.0 - p * p) * K) / K;
  WaveProfile w = kdv_seed(u0, kappa, p, delta);
  w.X = X;  // pin the requested period; the modulus solve is 1e-9 close
  return w;
}

WaveProfile sh_seed(double omega, double phi, double eps) {
  if (4.0 * omega * omega >= 1.0)
    throw ProfileError("sh_seed: |4 w^2| >= 1 gives zero amplitude");
  WaveProfile w;
  w.params = ModelParams::swift_hohenberg(eps);
  const double k = 1.0 + eps * omega;
  w.X = 2.0 * kPi / k;
  w.c = 0.0;
  const double A = 2.0 * eps * std::sqrt((1.0 - 4.0 * omega * omega) / 3.0);
  const int N = 512;
  w.n_samples = N;
  w.samples.resize(4, N);
  for (int j = 0; j < N; ++j) {
    const double x = w.X * j / N;
    const double ph = k * x + phi;
    w.samples.col(j) =
        Vector4d(A * std::cos(ph), -A * k * std::sin(ph),
                 -A * k * k * std::cos(ph), A * k * k * k * std::sin(ph));
  }
  w.b = w.samples.col(0);
  return w;
}

namespace {

void apply_sweep_value(WaveProfile& w, const std::string& name, double v) {
  if (name == "q") {
    w.q = v;
  } else if (name == "X") {
    w.X = v;
  } else if (name == "omega") {
    w.X = 2.0 * kPi / (1.0 + w.params.epsilon * v);
  } else if (name == "epsilon") {
    w.params.epsilon = v;
  } else if (name == "delta_tf") {
    w.params.delta = v;
    w.params.gamma = v;
    w.params.epsilon = std::sqrt(1.0 - v * v);
  } else {
    throw ProfileError("continue_branch: unknown sweep parameter " + name);
  }
}

double sweep_value_of(const WaveProfile& w, const std::string& name) {
  if (name == "q") return w.q;
  if (name == "X") return w.X;
  if (name == "omega")
    return (2.0 * kPi / w.X - 1.0) / w.params.epsilon;
  if (name == "epsilon") return w.params.epsilon;
  if (name == "delta_tf") return w.params.delta;
  throw ProfileError("continue_branch: unknown sweep parameter " + name);
}

int crest_count(const WaveProfile& w) {
  int n = 0;
  const int N = w.n_samples;
  for (int j = 0; j < N; ++j) {
    const double um = w.samples(0, (j + N - 1) % N);
    const double u0 = w.samples(0, j);
    const double up = w.samples(0, (j + 1) % N);
    if (u0 > um && u0 >= up) ++n;
  }
  return n;
}

RefineFree mode_for_sweep(const WaveProfile& w, const std::string& name) {
  if (w.params.family == Family::swift_hohenberg) return RefineFree::sh_even;
  if (name == "q" || name == "epsilon") return RefineFree::delta;
  if (name == "X" && w.params.scaling == Scaling::gamma_one)
    return RefineFree::q;
  return RefineFree::speed_and_q;  // thin-film families carry free c, q
}

}  // namespace

ContinuationBranch continue_branch(const WaveProfile& start,
                                   const SweepRange& sweep,
                                   const RefineOpts& opts) {
  if (!start.converged())
    throw ProfileError("continue_branch: start profile not converged");
  ContinuationBranch br;
  br.swept = sweep.parameter;
  const RefineFree mode = mode_for_sweep(start, sweep.parameter);

  std::vector<double> targets;
  if (sweep.step == 0.0 || sweep.from == sweep.to) {
    targets.push_back(sweep.from);
  } else {
    const double dir = sweep.to > sweep.from ? 1.0 : -1.0;
    const double h = dir * std::abs(sweep.step);
    for (double v = sweep.from;
         dir * (v - sweep.to) < std::abs(sweep.step) * 1e-9; v += h)
      targets.push_back(v);
  }

  WaveProfile cur = start;
  double v_cur = sweep_value_of(start, sweep.parameter);
  WaveProfile prev = start;
  double v_prev = v_cur;
  bool have_prev = false;

  for (double target : targets) {
    double step = target - v_cur;
    const double floor = (sweep.step != 0.0 ? std::abs(sweep.step) / 64.0
                                            : std::abs(step) / 4096.0) +
                         1e-15;
    while (std::abs(target - v_cur) > 1e-12) {
      double next = v_cur + step;
      if ((step > 0 && next >= target - 1e-9 * std::abs(step)) ||
          (step < 0 && next <= target + 1e-9 * std::abs(step)))
        next = target;
      WaveProfile guess = cur;
      apply_sweep_value(guess, sweep.parameter, next);
      if (have_prev && v_cur != v_prev) {
        Eigen::VectorXd zc = pack_unknowns(cur, mode);
        Eigen::VectorXd zp = pack_unknowns(prev, mode);
        Eigen::VectorXd zg =
            zc + (zc - zp) * ((next - v_cur) / (v_cur - v_prev));
        unpack_unknowns(guess, mode, zg);
      }
      guess.residual = -1.0;
      try {
        WaveProfile corr = refine(guess, mode, opts);
        // A crest-count change means the corrector hopped onto another
        // branch (period-multiplied structure); treat it as a failed step.
        if (cur.n_samples > 0 && crest_count(corr) != crest_count(cur))
          throw NewtonDivergence("continue_branch: branch jump (crest count)",
                                 0.0);
        prev = cur;
        v_prev = v_cur;
        cur = corr;
        v_cur = next;
        have_prev = true;
      } catch (const ProfileError&) {
        step *= 0.5;
        if (std::abs(step) < floor) {
          br.complete = false;
          br.diagnostic = "step floor reached near " + sweep.parameter +
                          " = " + std::to_string(next) +
                          "; fold or period-doubling suspected";
          return br;
        }
      }
    }
    if (!cur.converged()) cur = refine(cur, mode, opts);
    br.values.push_back(target);
    br.profiles.push_back(cur);
  }
  return br;
}

WaveProfile galilean_shift(const WaveProfile& w, double c0) {
  GalileanImage g = galilean_map(w.params, w.c, w.q, c0);
  WaveProfile out = w;
  out.c = g.c;
  out.q = g.q;
  out.b[0] += c0;
  for (int j = 0; j < out.n_samples; ++j) out.samples(0, j) += c0;
  out.mean_u += c0;
  out.residual = -1.0;  // state is exact up to roundoff; caller re-refines
  return out;
}

ThinFilmImage rescale_to_thin_film(const WaveProfile& w) {
  if (w.params.family != Family::gks ||
      w.params.scaling != Scaling::gamma_one || w.params.lambda_nl != 1.0)
    throw ProfileError("rescale_to_thin_film: needs gamma_one gKS, Lambda=1");
  const double d1 = w.params.delta, e1 = w.params.epsilon;
  const double L = 1.0 / std::sqrt(d1);
  const double T = 1.0 / (std::pow(d1, 1.5) * std::sqrt(e1 * e1 + d1));
  const double U = L / T;
  ThinFilmImage img;
  img.L = L;
  img.U = U;
  img.T = T;
  WaveProfile& o = img.profile;
  o.params.family = Family::gks;
  o.params.scaling = Scaling::thin_film;
  o.params.delta = d1 * d1 * T;
  o.params.gamma = o.params.delta;
  o.params.epsilon = e1 * T * std::pow(d1, 1.5);
  o.params.lambda_nl = 1.0;
  o.X = w.X / L;
  o.c = w.c * T / L;
  o.n_samples = w.n_samples;
  o.samples.resize(4, w.n_samples);
  for (int j = 0; j < w.n_samples; ++j)
    for (int k = 0; k < 4; ++k)
      o.samples(k, j) = w.samples(k, j) * std::pow(L, k) / U;
  o.b = o.samples.col(0);
  o.q = -o.c * o.b[0] + o.params.gamma * o.samples(3, 0) +
        o.params.epsilon * o.b[2] + o.params.delta * o.b[1] +
        o.params.f(o.b[0]);
  o.mean_u = w.mean_u / U;
  o.sup_u = w.sup_u / U;
  o.sup_du = w.sup_du * L / U;
  o.residual = w.residual;  // same orbit, rescaled
  return img;
}

// ---- cache ----------------------------------------------------------------

std::string profile_cache_key(const ModelParams& p, double X, double q_or_om) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_%s_eps%.10g_X%.10g_v%.10g",
                family_name(p.family), scaling_name(p.scaling), p.epsilon, X,
                q_or_om);
  return buf;
}

void save_profile(const WaveProfile& w, const std::string& dir,
                  const std::string& key) {
  static_assert(std::endian::native == std::endian::little,
                "profile cache assumes a little-endian host");
  std::filesystem::create_directories(dir);
  std::ofstream f(dir + "/" + key + ".prof", std::ios::binary);
  if (!f) throw ProfileError("save_profile: cannot open " + dir);
  f << "twave-profile 1\n";
  f << "family " << family_name(w.params.family) << "\n";
  f << "scaling " << scaling_name(w.params.scaling) << "\n";
  char line[512];
  std::snprintf(line, sizeof line, "coeffs %.17g %.17g %.17g %.17g %.17g\n",
                w.params.gamma, w.params.epsilon, w.params.delta,
                w.params.lambda_nl, w.params.r);
  f << line;
  std::snprintf(line, sizeof line, "wave %.17g %.17g %.17g\n", w.X, w.c, w.q);
  f << line;
  std::snprintf(line, sizeof line, "b %.17g %.17g %.17g %.17g\n", w.b[0],
                w.b[1], w.b[2], w.b[3]);
  f << line;
  std::snprintf(line, sizeof line, "stats %.17g %.17g %.17g %.17g\n",
                w.residual, w.sup_u, w.sup_du, w.mean_u);
  f << line;
  f << "n " << w.n_samples << "\n";
  f << "data float64 little-endian 4x" << w.n_samples << "\nBINARY\n";
  f.write(reinterpret_cast<const char*>(w.samples.data()),
          std::streamsize(sizeof(double) * 4 * w.n_samples));
}

std::optional<WaveProfile> load_profile(const std::string& dir,
                                        const std::string& key) {
  std::ifstream f(dir + "/" + key + ".prof", std::ios::binary);
  if (!f) return std::nullopt;
  WaveProfile w;
  std::string tag, s;
  int version;
  f >> tag >> version;
  if (tag != "twave-profile" || version != 1) return std::nullopt;
  f >> tag >> s;
  w.params.family = (s == "gks") ? Family::gks : Family::swift_hohenberg;
  f >> tag >> s;
  w.params.scaling =
      (s == "gamma_one") ? Scaling::gamma_one : Scaling::thin_film;
  f >> tag >> w.params.gamma >> w.params.epsilon >> w.params.delta >>
      w.params.lambda_nl >> w.params.r;
  f >> tag >> w.X >> w.c >> w.q;
  f >> tag >> w.b[0] >> w.b[1] >> w.b[2] >> w.b[3];
  f >> tag >> w.residual >> w.sup_u >> w.sup_du >> w.mean_u;
  f >> tag >> w.n_samples;
  std::getline(f, s);
  std::getline(f, s);
  std::getline(f, s);
  w.samples.resize(4, w.n_samples);
  f.read(reinterpret_cast<char*>(w.samples.data()),
         std::streamsize(sizeof(double) * 4 * w.n_samples));
  if (!f) return std::nullopt;
  return w;
}

}  // namespace twave
