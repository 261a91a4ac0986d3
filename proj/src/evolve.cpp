#include "twave/evolve.hpp"

#include <unsupported/Eigen/FFT>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "twave/hill.hpp"
#include "twave/protocol.hpp"

namespace twave {

namespace {
constexpr double kPi = std::numbers::pi;

struct Spectral {
  int M = 0;
  double L = 0.0;
  std::vector<double> k;        // wavenumbers per FFT bin
  std::vector<bool> keep;       // 2/3-rule mask
  Eigen::FFT<double> fft;

  explicit Spectral(int m, double domain) : M(m), L(domain), k(m), keep(m) {
    for (int j = 0; j < M; ++j) {
      const int idx = j <= M / 2 ? j : j - M;
      k[j] = 2.0 * kPi * idx / L;
      keep[j] = std::abs(idx) <= M / 3;
    }
  }
  Eigen::VectorXcd forward(const Eigen::VectorXd& u) {
    Eigen::VectorXcd out(M);
    Eigen::VectorXcd in = u.cast<Complex>();
    fft.fwd(out, in);
    return out;
  }
  Eigen::VectorXd inverse(const Eigen::VectorXcd& uh) {
    Eigen::VectorXcd out(M);
    Eigen::VectorXcd in = uh;
    fft.inv(out, in);
    return out.real();
  }
};

// phi-style ETDRK4 coefficients by averaging over a small complex circle
// around each z = L dt, which sidesteps the cancellation at small |z|.
struct EtdCoeffs {
  Eigen::VectorXcd E, E2, Q, f1, f2, f3;
};

EtdCoeffs etd_coefficients(const std::vector<Complex>& symbol, double dt) {
  const int M = int(symbol.size());
  EtdCoeffs c;
  c.E.resize(M);
  c.E2.resize(M);
  c.Q.resize(M);
  c.f1.resize(M);
  c.f2.resize(M);
  c.f3.resize(M);
  const int n_avg = 32;
  for (int j = 0; j < M; ++j) {
    const Complex z = symbol[j] * dt;
    c.E[j] = std::exp(z);
    c.E2[j] = std::exp(0.5 * z);
    Complex q{0, 0}, f1{0, 0}, f2{0, 0}, f3{0, 0};
    for (int m = 0; m < n_avg; ++m) {
      const Complex r =
          z + std::exp(Complex(0.0, kPi * (m + 0.5) / n_avg));  // upper circle
      const Complex er = std::exp(r), r2 = r * r, r3 = r2 * r;
      q += (std::exp(0.5 * r) - 1.0) / r;
      f1 += (-4.0 - r + er * (4.0 - 3.0 * r + r2)) / r3;
      f2 += (2.0 + r + er * (-2.0 + r)) / r3;
      f3 += (-4.0 - 3.0 * r - r2 + er * (4.0 - r)) / r3;
    }
    // Real symbols: the upper semicircle average plus conjugation gives the
    // full circle mean.
    const bool real_symbol = std::abs(symbol[j].imag()) < 1e-300;
    auto mean = [&](Complex v) {
      return real_symbol ? Complex(v.real() / n_avg, 0.0) : v / double(n_avg);
    };
    c.Q[j] = dt * mean(q);
    c.f1[j] = dt * mean(f1);
    c.f2[j] = dt * mean(f2);
    c.f3[j] = dt * mean(f3);
  }
  return c;
}

}  // namespace

EvolutionResult evolve(const EvolutionRun& run) {
  const WaveProfile& w = run.base;
  const ModelParams& p = w.params;
  const int M = run.n_cells * run.pts_per_cell;
  const double L = run.n_cells * w.X;
  Spectral sp(M, L);

  // Initial data: the tiled wave plus the requested perturbation.
  Eigen::VectorXd u(M);
  for (int j = 0; j < M; ++j) u[j] = profile_value(w, L * j / M);
  if (run.perturb.kind == Perturbation::Kind::gaussian) {
    const double width = run.perturb.width > 0 ? run.perturb.width : w.X;
    const double center =
        run.perturb.center >= 0 ? run.perturb.center : 0.5 * L;
    for (int j = 0; j < M; ++j) {
      const double x = L * j / M;
      u[j] += run.perturb.amplitude *
              std::exp(-0.5 * std::pow((x - center) / width, 2.0));
    }
  } else if (run.perturb.kind == Perturbation::Kind::bloch_mode) {
    const double xi = 2.0 * kPi * run.perturb.bloch_index / L;
    const int N = run.perturb.bloch_modes;
    HillMatrix hm = hill_assemble(w, xi, N);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hm.entries, true);
    int best = 0;
    for (int i = 1; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real())
        best = i;
    const Eigen::VectorXcd v = es.eigenvectors().col(best);
    for (int j = 0; j < M; ++j) {
      const double x = L * j / M;
      Complex wv{0.0, 0.0};
      for (int n = -N; n <= N; ++n)
        wv += v[n + N] * std::exp(Complex(0.0, 2.0 * kPi * n * x / w.X));
      u[j] += run.perturb.amplitude *
              (wv * std::exp(Complex(0.0, xi * x))).real();
    }
  }

  // Advective stability limit for the explicit nonlinear term.
  const double umax0 = u.cwiseAbs().maxCoeff();
  if (p.family == Family::gks) {
    const double dt_adv = (L / M) / (p.lambda_nl * std::max(umax0, 1e-12));
    if (run.dt > 0.5 * dt_adv)
      throw EvolveError("evolve: dt above the advective stability limit " +
                        std::to_string(0.5 * dt_adv));
  }

  std::vector<Complex> symbol(M);
  for (int j = 0; j < M; ++j) {
    const Complex ik(0.0, sp.k[j]);
    if (p.family == Family::gks)
      symbol[j] = -p.gamma * ik * ik * ik * ik - p.epsilon * ik * ik * ik -
                  p.delta * ik * ik + run.frame_speed * ik;
    else
      symbol[j] = (p.r - 1.0) - 2.0 * ik * ik - ik * ik * ik * ik +
                  run.frame_speed * ik;
  }
  EtdCoeffs cf = etd_coefficients(symbol, run.dt);

  auto nonlinear = [&](const Eigen::VectorXcd& vh) {
    Eigen::VectorXd uu = sp.inverse(vh);
    Eigen::VectorXd nl(M);
    if (p.family == Family::gks)
      nl = 0.5 * p.lambda_nl * uu.array().square();
    else
      nl = -uu.array().cube();
    Eigen::VectorXcd nh = sp.forward(nl);
    for (int j = 0; j < M; ++j) {
      if (!sp.keep[j]) {
        nh[j] = 0.0;
        continue;
      }
      if (p.family == Family::gks) nh[j] *= Complex(0.0, -sp.k[j]);
    }
    return nh;
  };

  EvolutionResult out;
  out.domain = L;
  out.grid = M;
  Eigen::VectorXcd vh = sp.forward(u);
  out.mass0 = vh[0].real() / M * L;

  const int steps = int(std::lround(run.t_end / run.dt));
  const int snaps = std::max(2, run.snapshots);
  std::vector<int> snap_at(snaps);
  for (int s = 0; s < snaps; ++s)
    snap_at[s] = int(std::lround(double(steps) * s / (snaps - 1)));

  int next_snap = 0;
  const double blowup_at = 100.0 * std::max(umax0, 1.0);
  for (int step = 0; step <= steps; ++step) {
    if (next_snap < snaps && step == snap_at[next_snap]) {
      Eigen::VectorXd uu = sp.inverse(vh);
      out.snapshots.push_back({step * run.dt, uu});
      ++next_snap;
      const double mass = vh[0].real() / M * L;
      if (p.family == Family::gks)
        out.max_mass_drift =
            std::max(out.max_mass_drift, std::abs(mass - out.mass0));
      if (uu.cwiseAbs().maxCoeff() > blowup_at) {
        out.blew_up = true;
        out.t_blowup = step * run.dt;
        return out;
      }
    }
    if (step == steps) break;
    const Eigen::VectorXcd Nv = nonlinear(vh);
    const Eigen::VectorXcd a = cf.E2.cwiseProduct(vh) + cf.Q.cwiseProduct(Nv);
    const Eigen::VectorXcd Na = nonlinear(a);
    const Eigen::VectorXcd b = cf.E2.cwiseProduct(vh) + cf.Q.cwiseProduct(Na);
    const Eigen::VectorXcd Nb = nonlinear(b);
    const Eigen::VectorXcd cvec =
        cf.E2.cwiseProduct(a) + cf.Q.cwiseProduct(2.0 * Nb - Nv);
    const Eigen::VectorXcd Nc = nonlinear(cvec);
    vh = cf.E.cwiseProduct(vh) + cf.f1.cwiseProduct(Nv) +
         2.0 * cf.f2.cwiseProduct(Na + Nb) + cf.f3.cwiseProduct(Nc);
  }
  return out;
}

ExtremaTracks track_extrema(const EvolutionResult& result) {
  ExtremaTracks tr;
  if (result.snapshots.empty()) return tr;
  const int M = result.grid;
  const double dx = result.domain / M;

  struct Ext {
    double x;
    bool peak;
  };
  auto find = [&](const Eigen::VectorXd& u) {
    std::vector<Ext> es;
    for (int j = 0; j < M; ++j) {
      const double um = u[(j + M - 1) % M], u0 = u[j], up = u[(j + 1) % M];
      const bool peak = u0 > um && u0 >= up;
      const bool trough = u0 < um && u0 <= up;
      if (!peak && !trough) continue;
      // sub-grid quadratic fit
      const double denom = um - 2 * u0 + up;
      const double frac =
          std::abs(denom) > 1e-300 ? 0.5 * (um - up) / denom : 0.0;
      es.push_back({dx * (j + frac), peak});
    }
    return es;
  };

  std::vector<Ext> first = find(result.snapshots.front().u);
  const std::size_t n = first.size();
  tr.position.assign(n, {});
  tr.is_peak.resize(n);
  tr.terminated.assign(n, false);
  std::vector<double> cur(n);
  for (std::size_t i = 0; i < n; ++i) {
    cur[i] = first[i].x;
    tr.is_peak[i] = first[i].peak;
  }

  for (const Snapshot& s : result.snapshots) {
    tr.times.push_back(s.t);
    std::vector<Ext> es = find(s.u);
    for (std::size_t i = 0; i < n; ++i) {
      if (tr.terminated[i]) {
        tr.position[i].push_back(NAN);
        continue;
      }
      double best = 1e300, bx = NAN;
      for (const Ext& e : es) {
        if (e.peak != tr.is_peak[i]) continue;
        double d = std::abs(e.x - cur[i]);
        d = std::min(d, result.domain - d);  // periodic distance
        if (d < best) {
          best = d;
          bx = e.x;
        }
      }
      // A jump beyond half a cell means the extremum merged or died.
      if (!std::isfinite(bx) || best > 0.5 * result.domain / (n / 2.0 + 1)) {
        tr.terminated[i] = true;
        tr.position[i].push_back(NAN);
        continue;
      }
      // unwrap across the periodic boundary
      double x = bx;
      while (x - cur[i] > 0.5 * result.domain) x -= result.domain;
      while (x - cur[i] < -0.5 * result.domain) x += result.domain;
      cur[i] = x;
      tr.position[i].push_back(x);
    }
  }
  return tr;
}

PacketSpeeds packet_speeds(const EvolutionResult& run,
                           const EvolutionResult& clean, double t_from) {
  if (run.snapshots.size() != clean.snapshots.size())
    throw EvolveError("packet_speeds: snapshot grids differ");
  const int M = run.grid;
  const double mid = 0.5 * run.domain;
  std::vector<double> ts, xl, xr;
  for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
    if (run.snapshots[s].t < t_from) continue;
    const Eigen::VectorXd v = run.snapshots[s].u - clean.snapshots[s].u;
    double wl = 0, wxl = 0, wr = 0, wxr = 0;
    for (int j = 0; j < M; ++j) {
      const double x = run.domain * j / M;
      const double e = v[j] * v[j];
      if (x < mid) {
        wl += e;
        wxl += e * x;
      } else {
        wr += e;
        wxr += e * x;
      }
    }
    ts.push_back(run.snapshots[s].t);
    xl.push_back(wxl / wl);
    xr.push_back(wxr / wr);
  }
  if (ts.size() < 3) throw EvolveError("packet_speeds: too few snapshots");
  auto slope = [&](const std::vector<double>& y) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    const double n = double(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      st += ts[i];
      sy += y[i];
      stt += ts[i] * ts[i];
      sty += ts[i] * y[i];
    }
    return (n * sty - st * sy) / (n * stt - st * st);
  };
  return {slope(xl), slope(xr)};
}

ContinuationBranch k_branch(const WaveProfile& base, int half_points,
                            double rel_step) {
  // Small spans keep the cubic-fit slope bias negligible.
  if (!base.converged()) throw EvolveError("k_branch: base not converged");
  const double X = base.X;
  ContinuationBranch down = continue_branch(
      base, {"X", X * (1.0 - rel_step), X * (1.0 - rel_step * half_points),
             X * rel_step});
  ContinuationBranch up = continue_branch(
      base, {"X", X * (1.0 + rel_step), X * (1.0 + rel_step * half_points),
             X * rel_step});
  ContinuationBranch br;
  br.swept = "X";
  for (std::size_t i = down.size(); i-- > 0;) {
    br.values.push_back(down.values[i]);
    br.profiles.push_back(down.profiles[i]);
  }
  br.values.push_back(X);
  br.profiles.push_back(base);
  for (std::size_t i = 0; i < up.size(); ++i) {
    br.values.push_back(up.values[i]);
    br.profiles.push_back(up.profiles[i]);
  }
  br.complete = down.complete && up.complete;
  return br;
}

WhithamPrediction whitham_prediction(const ContinuationBranch& branch,
                                     const WaveProfile& base) {
  if (branch.size() < 3)
    throw EvolveError("whitham_prediction: branch too short for differences");
  WhithamPrediction out;

  // Averaged quantities along the branch: m(k) the mean, H(k) the mean of
  // f(u), with k = 1/X.
  std::vector<double> ks, ms, Hs;
  std::size_t ibase = 0;
  for (std::size_t i = 0; i < branch.size(); ++i) {
    const WaveProfile& w = branch.profiles[i];
    ks.push_back(1.0 / w.X);
    double H = 0.0;
    for (int j = 0; j < w.n_samples; ++j)
      H += w.params.f(w.samples(0, j));
    Hs.push_back(H / w.n_samples);
    ms.push_back(w.mean_u);
    if (std::abs(w.X - base.X) < 1e-9 * base.X) ibase = i;
  }
  const double kbar = 1.0 / base.X;
  out.mean_zero_speed = ms[ibase];

  // Least-squares quadratic through (k, m) and (k, H) gives the slopes.
  // Cubic least squares in (k - kbar): the averaged fluxes curve strongly
  // near band edges, so the fit order matters for the slope.
  auto slope_at = [&](const std::vector<double>& y) {
    const int order = ks.size() >= 4 ? 3 : 2;
    Eigen::MatrixXd A(ks.size(), order + 1);
    Eigen::VectorXd b(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double d = ks[i] - kbar;
      double pw = 1.0;
      for (int c = 0; c <= order; ++c) {
        A(i, c) = pw;
        pw *= d;
      }
      b(i) = y[i];
    }
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
    return coef[1];
  };
  const double mk = slope_at(ms);
  const double Hk = slope_at(Hs);
  out.k_h_prime = kbar * Hk;

  // Characteristics of (m(k)+c)_T + (H - m c)_X = 0, k_T + (ck)_X = 0 at
  // c = 0: a^2 - (m - k m') a - k H' = 0.
  const double b_lin = ms[ibase] - kbar * mk;
  const double disc = b_lin * b_lin / 4.0 + kbar * Hk;
  if (disc >= 0.0) {
    out.speeds = {b_lin / 2.0 + std::sqrt(disc), b_lin / 2.0 - std::sqrt(disc)};
  }  // complex characteristics: hyperbolicity lost, speeds left empty

  // Evans side from the critical expansion of the base wave.
  EvansSolver solver(linearized_symbol(base));
  CriticalExpansion e = critical_modes(
      taylor_coeffs(solver.provider(EvansVariant::lifted_unscaled),
                    Family::gks),
      Family::gks);
  out.evans_speeds = e.whitham_speeds;
  for (const Complex& be : e.beta) out.diffusion.push_back(be.real());
  return out;
}

ScalingProbe boundary_scaling_probe(const std::vector<WaveProfile>& family,
                                    const std::vector<double>& eta,
                                    int hill_modes, int xi_points) {
  if (family.size() != eta.size() || family.size() < 3)
    throw EvolveError("boundary_scaling_probe: need >= 3 usable eta points");
  ScalingProbe out;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double xm = kPi / family[i].X;
    std::vector<double> grid;
    for (int j = 0; j <= xi_points; ++j)
      grid.push_back(-xm + 2.0 * xm * j / xi_points);
    HillSweep sweep = hill_sweep(family[i], grid, hill_modes);
    const double g = hill_max_real(sweep);
    out.eta.push_back(eta[i]);
    out.max_growth.push_back(g);
  }
  // The defective origin pair shows up as O(sqrt(eps ||M||)) noise, so the
  // growth floor sits above it.
  if (*std::max_element(out.max_growth.begin(), out.max_growth.end()) <=
      1e-4) {
    out.no_growth = true;
    return out;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(out.eta.size());
  for (std::size_t i = 0; i < out.eta.size(); ++i) {
    const double x = std::log(out.eta[i]);
    const double y = std::log(std::max(out.max_growth[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

}  // namespace twave
