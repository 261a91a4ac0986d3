#include "twave/protocol.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace twave {

namespace {
constexpr double kPi = std::numbers::pi;

std::string fmt_complex(Complex z) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g%+.6gi", z.real(), z.imag());
  return buf;
}
}  // namespace

// ---- high-frequency bounds --------------------------------------------------

HighFrequencyBound hf_radius(const WaveProfile& profile, double margin) {
  if (!profile.converged() || profile.sup_u < 0.0)
    throw ProtocolError("hf_radius: needs a converged profile with norms");
  HighFrequencyBound out;
  const ModelParams& p = profile.params;

  if (p.family == Family::swift_hohenberg) {
    // Self-adjoint case: spectrum real, bounded above by eps^2 = r.
    out.R_re = p.r;
    out.R_mixed = p.r;
    out.R0 = p.r;
    out.inputs = {0.0, 0.0, 0.0, p.epsilon};
    return out;
  }

  // Work in the unit-gamma normal form, map the radius back by 1/T.
  const NormalFormScale s = to_unit_gamma(p);
  const double n_du = p.lambda_nl * profile.sup_du * s.L / s.U;  // ||f''(u)u'||
  const double n_u = p.lambda_nl * profile.sup_u / s.U;          // ||f'(u)||
  const double d1 = s.delta1, e1 = s.eps1;
  out.inputs = {n_du, n_u, d1, e1};

  const double R_re = 0.5 * n_du + d1 * d1 / 4.0;
  const double mixed =
      0.5 * (n_du + n_u * n_u + d1 * d1 +
             std::pow(1.0 + 2.0 * e1 * e1, 2.0) / 2.0);
  double best = mixed;
  if (e1 > 0.0) {
    // Large-eps alternative: Re + |Im|/(2 e1^2) <= B gives |z| <= B(1+2e1^2)
    // on the right half plane.
    const double B =
        0.5 * (n_du + d1 * d1 +
               (0.25 * n_u * n_u + 4.0 / (3.0 * e1 * e1)) / (e1 * e1));
    best = std::min(best, B * (1.0 + 2.0 * e1 * e1));
  }
  best = std::max(best, R_re);
  out.R_re = R_re / s.T;
  out.R_mixed = best / s.T;
  out.R0 = (best + margin) / s.T;
  return out;
}

// ---- contours ----------------------------------------------------------------

namespace {

struct Piece {
  std::function<Complex(double)> f;
  double len;
};

Contour from_pieces(std::vector<Piece> pieces, Contour::Kind kind) {
  double total = 0.0;
  for (const auto& p : pieces) total += p.len;
  std::vector<double> cuts{0.0};
  for (const auto& p : pieces) cuts.push_back(cuts.back() + p.len / total);
  cuts.back() = 1.0;
  Contour c;
  c.kind = kind;
  c.corners.assign(cuts.begin(), cuts.end() - 1);
  c.at = [pieces = std::move(pieces), cuts](double t) {
    t = t - std::floor(t);
    std::size_t i = 0;
    while (i + 1 < cuts.size() - 1 && t >= cuts[i + 1]) ++i;
    const double local = (t - cuts[i]) / (cuts[i + 1] - cuts[i]);
    return pieces[i].f(local);
  };
  return c;
}

}  // namespace

Contour Contour::circle(Complex center, double radius) {
  Contour c;
  c.kind = Kind::disk;
  c.center = center;
  c.radius = radius;
  c.at = [center, radius](double t) {
    return center + radius * std::exp(Complex(0.0, 2.0 * kPi * t));
  };
  c.corners = {0.0};
  return c;
}

Contour Contour::gamma0(double r0, double R0) {
  if (!(0.0 < r0 && r0 < R0)) throw ProtocolError("gamma0: need 0 < r0 < R0");
  std::vector<Piece> ps;
  ps.push_back({[R0](double t) {
                  return R0 * std::exp(Complex(0.0, -kPi / 2 + kPi * t));
                },
                kPi * R0});
  ps.push_back(
      {[r0, R0](double t) { return Complex(0.0, R0 + t * (r0 - R0)); },
       R0 - r0});
  ps.push_back({[r0](double t) {
                  return r0 * std::exp(Complex(0.0, kPi / 2 - kPi * t));
                },
                kPi * r0});
  ps.push_back(
      {[r0, R0](double t) { return Complex(0.0, -r0 - t * (R0 - r0)); },
       R0 - r0});
  Contour c = from_pieces(std::move(ps), Kind::gamma0);
  c.r0 = r0;
  c.R0 = R0;
  return c;
}

Contour Contour::gamma1(double R0) {
  if (R0 <= 0.0) throw ProtocolError("gamma1: need R0 > 0");
  std::vector<Piece> ps;
  ps.push_back({[R0](double t) {
                  return R0 * std::exp(Complex(0.0, -kPi / 2 + kPi * t));
                },
                kPi * R0});
  ps.push_back(
      {[R0](double t) { return Complex(0.0, R0 - 2.0 * R0 * t); }, 2.0 * R0});
  Contour c = from_pieces(std::move(ps), Kind::gamma1);
  c.R0 = R0;
  return c;
}

Contour Contour::shifted_semicircle(double c0, double radius, double flat) {
  // Boundary of { Re z >= -flat } intersected with B(c0, radius).
  const double cosv = std::clamp((-flat - c0) / radius, -1.0, 1.0);
  const double thc = std::acos(cosv);
  const double sinv = std::sin(thc);
  std::vector<Piece> ps;
  ps.push_back({[c0, radius, thc](double t) {
                  return c0 +
                         radius * std::exp(Complex(0.0, -thc + 2 * thc * t));
                },
                2.0 * thc * radius});
  ps.push_back({[flat, radius, sinv](double t) {
                  return Complex(-flat, radius * sinv * (1.0 - 2.0 * t));
                },
                2.0 * radius * sinv});
  Contour c = from_pieces(std::move(ps), Kind::shifted_semicircle);
  c.center = Complex(c0, 0.0);
  c.radius = radius;
  return c;
}

// ---- winding engine -----------------------------------------------------------

ContourWorker::ContourWorker(Contour contour, DProvider provider,
                             WindingOpts opts)
    : contour_(std::move(contour)),
      provider_(std::move(provider)),
      opts_(opts) {
  std::vector<double> ts = contour_.corners;
  const int n = std::max(opts_.initial_points, 8);
  for (int i = 0; i < n; ++i) ts.push_back(double(i) / n);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double a, double b) {
                         return std::abs(a - b) < 1e-12;
                       }),
           ts.end());
  for (double t : ts) insert(t);
}

void ContourWorker::insert(double t) {
  auto it = std::lower_bound(mesh_.begin(), mesh_.end(), t,
                             [](const Node& n, double v) { return n.t < v; });
  if (it != mesh_.end() && std::abs(it->t - t) < 1e-13) return;
  Node n;
  n.t = t;
  n.lambda = contour_.at(t);
  n.row = provider_(n.lambda);
  mesh_.insert(it, std::move(n));
}

std::vector<Complex> ContourWorker::mesh_lambdas() const {
  std::vector<Complex> out;
  out.reserve(mesh_.size());
  for (const auto& n : mesh_) out.push_back(n.lambda);
  return out;
}

std::vector<double> ContourWorker::mesh_ts() const {
  std::vector<double> out;
  out.reserve(mesh_.size());
  for (const auto& n : mesh_) out.push_back(n.t);
  return out;
}

std::vector<Complex> ContourWorker::values(Complex xi) {
  std::vector<Complex> v;
  v.reserve(mesh_.size());
  for (auto& n : mesh_) v.push_back(n.row(xi));
  return v;
}

bool ContourWorker::refine_once(Complex xi) {
  // One sweep of the successive-point rule; returns true when clean.
  std::vector<double> midpoints;
  std::vector<Complex> v = values(xi);
  const std::size_t n = mesh_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    const double denom = std::min(std::abs(v[i]), std::abs(v[j]));
    if (std::abs(v[j] - v[i]) > opts_.max_rel_jump * denom || denom == 0.0) {
      const double t0 = mesh_[i].t;
      const double t1 = j == 0 ? 1.0 : mesh_[j].t;
      midpoints.push_back(std::fmod(0.5 * (t0 + t1), 1.0));
    }
  }
  if (midpoints.empty()) return true;
  if (int(mesh_.size() + midpoints.size()) > opts_.max_points) {
    double mn = 1e300, mx = 0.0;
    for (const Complex& z : v) {
      mn = std::min(mn, std::abs(z));
      mx = std::max(mx, std::abs(z));
    }
    throw RootOnContour("winding: refinement cap at " +
                        std::to_string(mesh_.size()) +
                        " points, |D| contrast " + std::to_string(mn / mx) +
                        "; root on contour suspected");
  }
  for (double t : midpoints) insert(t);
  return false;
}

WindingReport ContourWorker::winding(Complex xi) {
  for (int round = 0; round < 64; ++round)
    if (refine_once(xi)) break;

  std::vector<Complex> v = values(xi);
  double mn = 1e300, mx = 0.0;
  for (const Complex& z : v) {
    const double a = std::abs(z);
    mn = std::min(mn, a);
    mx = std::max(mx, a);
  }
  if (mn == 0.0) throw RootOnContour("winding: exact zero on contour");
  // A root on the curve cannot pass the successive-point rule: refinement
  // would cap out instead, so a converged mesh with mn > 0 is sound; the
  // contrast is recorded for the evidence trail.

  double total = 0.0, max_jump = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Complex a = v[i];
    const Complex b = v[(i + 1) % v.size()];
    total += std::arg(b / a);
    max_jump = std::max(
        max_jump, std::abs(b - a) / std::min(std::abs(a), std::abs(b)));
  }
  const double w_real = total / (2.0 * kPi);
  const int w = int(std::lround(w_real));
  WindingReport rep;
  rep.winding = w;
  rep.arg_defect = std::abs(w_real - w);
  rep.min_over_max = mn / mx;
  rep.max_jump = max_jump;
  rep.mesh_points = int(mesh_.size());
  if (rep.arg_defect > 0.2)
    throw ProtocolError("winding: argument defect " +
                        std::to_string(rep.arg_defect) + " above 0.2");
  return rep;
}

WindingReport winding_number(const DProvider& provider, const Contour& contour,
                             Complex xi, const WindingOpts& opts) {
  ContourWorker worker(contour, provider, opts);
  return worker.winding(xi);
}

// ---- Taylor coefficients -------------------------------------------------------

namespace {

// Coefficient of lambda^r xi^s by the tensor Cauchy double sum on the bidisk.
Complex cauchy_coeff(const std::vector<std::vector<Complex>>& V, double h,
                     int r, int s) {
  const int nl = int(V.size()), nx = int(V[0].size());
  Complex acc{0.0, 0.0};
  for (int j = 0; j < nl; ++j) {
    Complex inner{0.0, 0.0};
    for (int l = 0; l < nx; ++l) {
      const double phi = 2.0 * kPi * l / nx;
      inner += V[j][l] * std::exp(Complex(0.0, -s * phi));
    }
    const double th = 2.0 * kPi * j / nl;
    acc += inner * std::exp(Complex(0.0, -r * th));
  }
  return acc / (double(nl) * double(nx) * std::pow(h, r + s));
}

}  // namespace

namespace {

CriticalCoeffs extract_coeffs(const DProvider& provider, Family family,
                              double h, int n_lambda, int n_xi) {
  std::vector<std::vector<Complex>> V(n_lambda, std::vector<Complex>(n_xi));
  for (int j = 0; j < n_lambda; ++j) {
    const Complex mu = h * std::exp(Complex(0.0, 2.0 * kPi * j / n_lambda));
    DRow row = provider(mu);
    for (int l = 0; l < n_xi; ++l) {
      const Complex k = h * std::exp(Complex(0.0, 2.0 * kPi * l / n_xi));
      V[j][l] = row(k);
    }
  }
  CriticalCoeffs out;
  out.h = h;
  out.low = {cauchy_coeff(V, h, 0, 0), cauchy_coeff(V, h, 1, 0),
             cauchy_coeff(V, h, 0, 1)};
  if (family == Family::gks) {
    out.a = {cauchy_coeff(V, h, 2, 0), cauchy_coeff(V, h, 1, 1),
             cauchy_coeff(V, h, 0, 2), cauchy_coeff(V, h, 3, 0),
             cauchy_coeff(V, h, 2, 1), cauchy_coeff(V, h, 1, 2),
             cauchy_coeff(V, h, 0, 3)};
  } else {
    out.sh = {out.low[1], out.low[2], cauchy_coeff(V, h, 2, 0),
              cauchy_coeff(V, h, 1, 1), cauchy_coeff(V, h, 0, 2)};
  }
  return out;
}

}  // namespace

CriticalCoeffs taylor_coeffs(const DProvider& provider, Family family,
                             const TaylorOpts& opts) {
  double h = opts.h;
  std::string last_error;
  for (int attempt = 0; attempt <= opts.max_halvings; ++attempt, h *= 0.5) {
    CriticalCoeffs out =
        extract_coeffs(provider, family, h, opts.n_lambda, opts.n_xi);

    // Validate leading coefficients against 4th-order finite differences.
    const double fd = h;
    DRow row_p1 = provider(Complex(fd, 0));
    DRow row_m1 = provider(Complex(-fd, 0));
    DRow row_p2 = provider(Complex(2 * fd, 0));
    DRow row_m2 = provider(Complex(-2 * fd, 0));
    DRow row_p1h = provider(Complex(fd / 2, 0));
    DRow row_m1h = provider(Complex(-fd / 2, 0));
    DRow row_0 = provider(Complex(0, 0));
    const Complex zero{0.0, 0.0};
    auto D_l = [&](double m) -> Complex {
      if (m == 0.0) return row_0(zero);
      if (m == 1.0) return row_p1(zero);
      if (m == -1.0) return row_m1(zero);
      if (m == 2.0) return row_p2(zero);
      return row_m2(zero);
    };
    auto D_x = [&](double m) -> Complex { return row_0(Complex(m * fd, 0)); };
    auto second = [&](auto f) {
      return (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) -
              f(-2.0)) /
             (12.0 * fd * fd);
    };
    auto first = [&](auto f) {
      return (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * fd);
    };
    auto mixed_at = [&](double hh, DRow& rp, DRow& rm) {
      return (rp(Complex(hh, 0)) - rp(Complex(-hh, 0)) - rm(Complex(hh, 0)) +
              rm(Complex(-hh, 0))) /
             (4.0 * hh * hh);
    };
    // Richardson: mixed(h) has O(h^2) error, eliminate the leading term.
    const Complex m_h = mixed_at(fd, row_p1, row_m1);
    const Complex m_h2 = mixed_at(fd / 2, row_p1h, row_m1h);
    const Complex mixed = (4.0 * m_h2 - m_h) / 3.0;

    double rel = 0.0;
    auto cmp = [&](Complex got, Complex want, double scale) {
      rel = std::max(rel, std::abs(got - want) / scale);
    };
    if (family == Family::gks) {
      const double scale = std::abs(out.a[0]) + std::abs(out.a[1]) +
                           std::abs(out.a[2]) + 1e-300;
      cmp(0.5 * second(D_l), out.a[0], scale);
      cmp(0.5 * second(D_x), out.a[2], scale);
      cmp(mixed, out.a[1], scale);
    } else {
      const double scale = std::abs(out.sh[0]) + std::abs(out.sh[1]) +
                           std::abs(out.sh[4]) + 1e-300;
      cmp(first(D_l), out.sh[0], scale);
      cmp(first(D_x), out.sh[1], scale);
      cmp(0.5 * second(D_x), out.sh[4], scale);
    }
    out.validation_rel = rel;
    if (rel < opts.validate_rel) return out;
    // The stencil error scales with the sixth derivative; for waves with
    // extreme coefficient ratios it never reaches the target even though
    // the spectral extraction is converged.  Cross-check two radii instead.
    CriticalCoeffs half = extract_coeffs(provider, family, 0.5 * h,
                                         opts.n_lambda, opts.n_xi);
    double cross = 0.0;
    if (family == Family::gks) {
      const double scale = std::abs(out.a[0]) + std::abs(out.a[1]) +
                           std::abs(out.a[2]) + 1e-300;
      for (int i = 0; i < 3; ++i)
        cross = std::max(cross, std::abs(out.a[i] - half.a[i]) / scale);
    } else {
      const double scale = std::abs(out.sh[0]) + std::abs(out.sh[1]) +
                           std::abs(out.sh[4]) + 1e-300;
      for (int i : {0, 1, 4})
        cross = std::max(cross, std::abs(out.sh[i] - half.sh[i]) / scale);
    }
    if (cross < opts.validate_rel) {
      out.validation_rel = cross;
      return out;
    }
    last_error = "taylor_coeffs: validation residual " + std::to_string(rel) +
                 " (cross " + std::to_string(cross) + ") at h=" +
                 std::to_string(h);
  }
  throw ProtocolError(last_error + "; h too large or tolerances too loose");
}

// ---- critical modes --------------------------------------------------------------

CriticalExpansion critical_modes(const CriticalCoeffs& c, Family family) {
  CriticalExpansion out;
  out.h = c.h;
  if (family == Family::swift_hohenberg) {
    const Complex s0 = c.sh[0];
    double scale = 0.0;
    for (const Complex& z : c.sh) scale = std::max(scale, std::abs(z));
    if (std::abs(s0) < 1e-10 * scale)
      throw ProtocolError(
          "critical_modes: leading coefficient too small (near the "
          "degenerate set)");
    const Complex alpha = -c.sh[1] / s0;
    const Complex beta =
        -(c.sh[2] * alpha * alpha + c.sh[3] * alpha + c.sh[4]) / s0;
    out.alpha = {alpha};
    out.beta = {beta};
    out.whitham_speeds = {-alpha.imag()};
    return out;
  }

  out.a = c.a;
  const Complex a0 = c.a[0], a1 = c.a[1], a2 = c.a[2];
  double scale = 0.0;
  for (const Complex& z : c.a) scale = std::max(scale, std::abs(z));
  if (std::abs(a0) < 1e-10 * scale)
    throw ProtocolError(
        "critical_modes: a0 too small (near the degenerate set)");
  out.discriminant = a1 * a1 - 4.0 * a0 * a2;
  const Complex sq = std::sqrt(out.discriminant);
  // Sign-aware citardauq: take the branch that avoids cancellation.
  const Complex t = std::abs(a1 + sq) >= std::abs(a1 - sq) ? -(a1 + sq) / 2.0
                                                           : -(a1 - sq) / 2.0;
  Complex alpha1, alpha2;
  if (std::abs(t) > 0.0) {
    alpha1 = t / a0;
    alpha2 = a2 / t;
  } else {
    alpha1 = alpha2 = -a1 / (2.0 * a0);
  }
  out.alpha = {alpha1, alpha2};
  for (const Complex& al : out.alpha) {
    const Complex denom = 2.0 * a0 * al + a1;
    const double floor = std::max(1e-10 * std::abs(a1), 1e-14 * std::abs(a0));
    if (std::abs(denom) <= floor)
      throw ProtocolError(
          "critical_modes: vanishing beta denominator (double "
          "characteristic)");
    out.beta.push_back(-(c.a[3] * al * al * al + c.a[4] * al * al +
                         c.a[5] * al + c.a[6]) /
                       denom);
    out.whitham_speeds.push_back(-al.imag());
  }
  return out;
}

// ---- moments ------------------------------------------------------------------------

namespace {

class MomentMachine {
 public:
  MomentMachine(const DProvider& provider, double R, const MomentOpts& opts)
      : provider_(provider),
        worker_(Contour::circle(Complex(0, 0), R), provider, opts.winding),
        R_(R),
        opts_(opts) {}

  MomentResult run(Complex xi) {
    WindingReport rep = worker_.winding(xi);
    MomentResult out;
    out.winding = rep.winding;
    if (opts_.expected_roots > 0 && rep.winding != opts_.expected_roots)
      throw ProtocolError("moments: winding " + std::to_string(rep.winding) +
                          " inside |lambda| = " + std::to_string(R_) +
                          ", expected " +
                          std::to_string(opts_.expected_roots));
    const int w = rep.winding;
    if (w <= 0) return out;
    // The adaptive mesh guards the winding; the moment integrals use a
    // uniform grid, where the periodic trapezoid is spectrally accurate.
    sync_offsets();
    const std::size_t n = offs_.size();
    std::vector<Complex> ratio(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Complex dp = offs_[i].plus(xi), dm = offs_[i].minus(xi);
      const Complex dd = (dp - dm) / (2.0 * offs_[i].step);
      ratio[i] = dd / offs_[i].center(xi);
    }
    std::vector<Complex> m(w, Complex(0, 0));
    for (int l = 1; l <= w; ++l) {
      Complex acc{0, 0};
      for (std::size_t i = 0; i < n; ++i)
        acc += std::pow(offs_[i].lambda, l + 1) * ratio[i];
      // d lambda = 2 pi i lambda dt and the 1/(2 pi i) prefactor cancel.
      m[l - 1] = acc / double(n);
    }
    out.m1 = m[0];
    out.m2 = w > 1 ? m[1] : m[0] * m[0];
    if (w == 1) {
      out.roots = {m[0]};
    } else if (w == 2) {
      const Complex sq = std::sqrt(2.0 * m[1] - m[0] * m[0]);
      out.roots = {(m[0] + sq) / 2.0, (m[0] - sq) / 2.0};
    } else {
      // Newton's identities give the elementary symmetric functions; the
      // roots are the companion-matrix eigenvalues.
      std::vector<Complex> e(w + 1, Complex(0, 0));
      e[0] = 1.0;
      for (int k = 1; k <= w; ++k) {
        Complex acc{0, 0};
        for (int i = 1; i <= k; ++i)
          acc += (i % 2 ? 1.0 : -1.0) * e[k - i] * m[i - 1];
        e[k] = acc / double(k);
      }
      // p(z) = prod (z - r_i) = z^w + c_{w-1} z^{w-1} + ... + c_0 with
      // c_{w-j} = (-1)^j e_j; roots from the companion matrix.
      Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(w, w);
      for (int i = 1; i < w; ++i) comp(i, i - 1) = 1.0;
      for (int i = 0; i < w; ++i) {
        const int j = w - i;
        const Complex ci = (j % 2 ? -1.0 : 1.0) * e[j];
        comp(i, w - 1) = -ci;
      }
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp);
      for (int i = 0; i < w; ++i) out.roots.push_back(es.eigenvalues()[i]);
    }
    return out;
  }

 private:
  struct Offset {
    Complex lambda;
    DRow center, plus, minus;
    Complex step;
  };
  void sync_offsets() {
    // Uniform grid at least as dense as the adaptive winding mesh.
    std::size_t n = 256;
    while (n < worker_.mesh_lambdas().size()) n *= 2;
    if (offs_.size() >= n) return;
    offs_.clear();
    offs_.reserve(n);
    const double spacing = 2.0 * kPi * R_ / double(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Complex lam =
          R_ * std::exp(Complex(0.0, 2.0 * kPi * double(i) / double(n)));
      const Complex tangent = Complex(0, 1) * lam / std::abs(lam);
      const Complex step = opts_.derivative_step * spacing * tangent;
      offs_.push_back({lam, provider_(lam), provider_(lam + step),
                       provider_(lam - step), step});
    }
  }

  const DProvider& provider_;
  ContourWorker worker_;
  double R_;
  MomentOpts opts_;
  std::vector<Offset> offs_;
};

}  // namespace

MomentResult moments(const DProvider& provider, Complex xi, double R,
                     const MomentOpts& opts) {
  MomentMachine m(provider, R, opts);
  return m.run(xi);
}

K0Selection select_k0(const DProvider& provider, double K, double R,
                      double min_re_beta, int n_xi, double safety,
                      int expected_roots) {
  MomentOpts mo;
  mo.expected_roots = expected_roots;
  MomentMachine machine(provider, R, mo);
  double M = 0.0;
  for (int m = 0; m < n_xi; ++m) {
    const Complex xi = K * std::exp(Complex(0.0, 2.0 * kPi * m / n_xi));
    MomentResult res = machine.run(xi);
    for (const Complex& r : res.roots) M = std::max(M, std::abs(r));
  }
  K0Selection out;
  out.K = K;
  out.R = R;
  out.M = M;
  // Largest admissible cutoff solves k = (K-k)^4 min|Re beta| / (K M); stand
  // off by the safety factor.
  auto g = [&](double k) {
    return std::pow(K - k, 4.0) * min_re_beta / (K * M);
  };
  double lo = 0.0, hi = 0.9 * K;
  if (g(hi) > hi) {
    out.k0_max = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > mid ? lo : hi) = mid;
    }
    out.k0_max = 0.5 * (lo + hi);
  }
  out.k0 = out.k0_max / safety;
  out.inequality_ok = out.k0 < g(out.k0);
  return out;
}

// ---- verification -----------------------------------------------------------------

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::stable:
      return "stable";
    case Outcome::unstable_hyperbolic:
      return "unstable_hyperbolic";
    case Outcome::unstable_diffusive:
      return "unstable_diffusive";
    case Outcome::unstable_midfrequency:
      return "unstable_midfrequency";
    case Outcome::degenerate_near_D:
      return "degenerate_near_D";
    case Outcome::inconclusive:
      return "inconclusive";
  }
  return "?";
}

namespace {

// Winding sweep over a symmetric xi grid: D(conj l, -xi) = conj D(l, xi)
// makes the negative half a mirror, so only xi >= 0 is computed.
WindingSummary sweep_windings(ContourWorker& worker, const std::string& name,
                              const std::vector<double>& xis, int expected) {
  WindingSummary s;
  s.contour = name;
  s.n_xi = int(xis.size());
  s.expected = expected;
  double worst = 1.0;
  for (double xi : xis) {
    if (xi < 0.0) continue;
    try {
      WindingReport rep = worker.winding(Complex(xi, 0.0));
      worst = std::min(worst, rep.min_over_max);
      if (rep.winding != expected) s.bad.push_back({xi, rep.winding});
    } catch (const ProtocolError&) {
      s.bad.push_back({xi, INT_MIN});
    }
    if (int(s.bad.size()) > 40) break;
  }
  s.worst_contrast = worst;
  s.mesh_points = worker.mesh_size();
  const int bad_pos = int(s.bad.size());
  for (int i = 0; i < bad_pos; ++i)
    if (s.bad[i].first > 0.0)
      s.bad.push_back({-s.bad[i].first, s.bad[i].second});
  s.n_bad = int(s.bad.size());
  return s;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
  return v;
}

void dump_evidence(const std::string& dir, const std::string& name,
                   ContourWorker& worker, Complex xi) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream f(dir + "/" + name + ".dat");
  f << "# columns: Re(lambda) Im(lambda) Re(D) Im(D); xi = " << xi.real()
    << "\n";
  const auto lam = worker.mesh_lambdas();
  const auto val = worker.values(xi);
  char line[160];
  for (std::size_t i = 0; i < lam.size(); ++i) {
    std::snprintf(line, sizeof line, "%.12e %.12e %.12e %.12e\n",
                  lam[i].real(), lam[i].imag(), val[i].real(),
                  val[i].imag());
    f << line;
  }
}

StabilityVerdict verify_gks(const WaveProfile& wave, const VerifyOpts& opts) {
  StabilityVerdict v;
  v.wave_id = profile_cache_key(wave.params, wave.X, wave.q);
  v.q = wave.q;
  v.delta = wave.params.delta;
  v.eps = wave.params.epsilon;
  v.X = wave.X;

  EvansSolver solver(linearized_symbol(wave), opts.evans_tol);
  DProvider low = solver.provider(EvansVariant::lifted_unscaled);
  DProvider scaled = solver.provider(EvansVariant::lifted_scaled);
  // Long periods accumulate more integration error; a tightened solver
  // backs the Taylor stage when its validation rejects the default one.
  EvansSolver tight(linearized_symbol(wave),
                    OdeTol{opts.evans_tol.abs * 1e-3,
                           std::max(opts.evans_tol.rel * 1e-3, 1e-14)});
  DProvider low_tight = tight.provider(EvansVariant::lifted_unscaled);

  // Step 1: high-frequency radius.
  v.hf = hf_radius(wave, opts.hf_margin);

  // Step 0: scan d2_lambda D(lambda, 0) on real lambda > 0 for sign changes
  // approaching the origin.  The degeneracy threshold compares against the
  // near-origin decade only: farther out the scan grows exponentially with
  // Re(mu) X and would swamp any origin scale.
  {
    double prev = 0.0;
    for (int i = 0; i < opts.step0_points; ++i) {
      const double lam = std::exp(
          std::log(1e-4) +
          (std::log(std::max(v.hf.R_re, 1e-3)) - std::log(1e-4)) * double(i) /
              double(opts.step0_points - 1));
      const double h = std::max(1e-6, 1e-3 * lam);
      const Complex d2 =
          (low(Complex(lam + h, 0))(0.0) - 2.0 * low(Complex(lam, 0))(0.0) +
           low(Complex(lam - h, 0))(0.0)) /
          (h * h);
      const double val = d2.real();
      if (lam <= 1e-2)
        v.step0_scan_max = std::max(v.step0_scan_max, std::abs(val));
      if (i > 0 && prev * val < 0.0) v.step0_sign_change = true;
      prev = val;
    }
  }

  // Step 4 runs before Steps 2-3, as in the worked example: the Taylor data
  // decides the cheap instabilities before any contour sweep.
  bool taylor_tight = false;
  CriticalCoeffs coeffs;
  try {
    coeffs = taylor_coeffs(low, Family::gks, opts.taylor);
  } catch (const ProtocolError&) {
    coeffs = taylor_coeffs(low_tight, Family::gks, opts.taylor);
    taylor_tight = true;
  }
  v.crit = critical_modes(coeffs, Family::gks);
  v.d2_origin = 2.0 * coeffs.a[0].real();
  if (std::abs(v.d2_origin) < opts.degenerate_rel * v.step0_scan_max) {
    v.outcome = Outcome::degenerate_near_D;
    v.detail = "d2_lambda D(0,0) below the degeneracy threshold";
    return v;
  }
  if (v.crit.discriminant.real() >= 0.0) {
    v.outcome = Outcome::unstable_hyperbolic;
    v.detail = "discriminant >= 0: characteristics not strictly hyperbolic";
    return v;
  }
  const double re_b1 = v.crit.beta[0].real(), re_b2 = v.crit.beta[1].real();
  if (re_b1 > 0.0 || re_b2 > 0.0) {
    v.outcome = Outcome::unstable_diffusive;
    v.detail = "some Re beta_j > 0: backward-diffusive sideband growth";
    return v;
  }
  bool alpha_ok = true;
  for (const Complex& al : v.crit.alpha)
    if (std::abs(al.real()) >
        opts.alpha_imag_tol_rel * std::abs(al) + opts.alpha_imag_tol_abs)
      alpha_ok = false;
  const Complex dal = v.crit.alpha[0] - v.crit.alpha[1];
  const bool distinct =
      std::abs(dal) >
      1e-6 * (std::abs(v.crit.alpha[0]) + std::abs(v.crit.alpha[1])) + 1e-10;

  const double min_re_beta = std::min(std::abs(re_b1), std::abs(re_b2));
  // The default circle pair (K, R) suits the short-period benchmarks; when
  // other spectral branches intrude, shrink both until exactly the two
  // critical curves are enclosed.
  DProvider& mom_prov = taylor_tight ? low_tight : low;
  K0Selection k0;
  {
    double K = opts.moments_K, R = opts.moments_R;
    const double amax = std::max(std::abs(v.crit.alpha[0]),
                                 std::abs(v.crit.alpha[1]));
    const double bmax = std::max(std::abs(re_b1), std::abs(re_b2));
    bool done = false;
    std::string last;
    for (int attempt = 0; attempt < 10 && !done; ++attempt) {
      try {
        k0 = select_k0(mom_prov, K, R, min_re_beta, opts.moments_nxi,
                       opts.k0_safety, 2);
        done = true;
      } catch (const ProtocolError& e) {
        // Other spectral branches intrude, or a fast critical curve left
        // the circle: shrink the Bloch circle and re-center the radius on
        // the expansion's own extent.
        last = e.what();
        K *= 0.5;
        R = 2.5 * (amax * K + bmax * K * K);
      }
    }
    if (!done)
      throw ProtocolError("verify: no moment circle isolates the critical "
                          "pair (" + last + ")");
  }
  v.crit.k0 = k0.k0;
  v.crit.K = k0.K;
  v.crit.M = k0.M;
  v.crit.k0_inequality_ok = k0.inequality_ok;

  const double xi_max = kPi / wave.X;

  // Step 2(a): Gamma0 over the full Bloch range.
  {
    ContourWorker worker(Contour::gamma0(opts.r0, v.hf.R0), scaled);
    WindingSummary s = sweep_windings(
        worker, "Gamma0", linspace(-xi_max, xi_max, opts.xi_points), 0);
    dump_evidence(opts.evidence_dir, "gamma0", worker, Complex(0, 0));
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::unstable_midfrequency;
      v.detail = "nonzero winding on Gamma0";
      return v;
    }
  }
  // Step 2(b): Gamma1 for k0 <= |xi| <= pi/X.  Near the KdV limit the
  // critical curves hug the imaginary axis and the flat side of Gamma1
  // cannot be certified there; those Bloch values fall back to a direct
  // moment recovery of the two roots, whose real parts then decide.
  {
    ContourWorker worker(Contour::gamma1(v.hf.R0), scaled);
    std::vector<double> xis = linspace(k0.k0, xi_max, opts.xi_points / 2);
    WindingSummary s;
    s.contour = "Gamma1";
    s.n_xi = 2 * int(xis.size());
    s.expected = 0;
    double worst = 1.0;
    std::vector<double> gap;
    for (double xi : xis) {
      try {
        WindingReport rep = worker.winding(Complex(xi, 0.0));
        worst = std::min(worst, rep.min_over_max);
        if (rep.winding != 0) gap.push_back(xi);
      } catch (const ProtocolError&) {
        gap.push_back(xi);
      }
    }
    s.worst_contrast = worst;
    s.mesh_points = worker.mesh_size();
    if (!gap.empty()) {
      // Bloch values the cubic-remainder inequality already covers need no
      // numerics; the rest go to shared-row moment machines with a floored
      // isolation radius.
      const double amax = std::max(std::abs(v.crit.alpha[0]),
                                   std::abs(v.crit.alpha[1]));
      const double bmax = std::max(std::abs(re_b1), std::abs(re_b2));
      std::sort(gap.begin(), gap.end());
      std::unique_ptr<MomentMachine> machine;
      double r_cur = 0.0;
      for (double xi : gap) {
        if (xi <= 0.9 * k0.k0_max) continue;
        const double extent = amax * xi + bmax * xi * xi;
        if (!machine || 1.8 * extent > r_cur) {
          r_cur = std::max(4.0 * extent, 2e-3);
          MomentOpts mo;
          mo.expected_roots = 2;
          machine = std::make_unique<MomentMachine>(mom_prov, r_cur, mo);
        }
        try {
          MomentResult res = machine->run(Complex(xi, 0.0));
          for (const Complex& r : res.roots)
            if (r.real() >= 0.0) s.bad.push_back({xi, 1});
        } catch (const ProtocolError&) {
          s.bad.push_back({xi, INT_MIN});
        }
        if (int(s.bad.size()) > 40) break;
      }
    }
    const int bad_pos = int(s.bad.size());
    for (int i = 0; i < bad_pos; ++i)
      s.bad.push_back({-s.bad[i].first, s.bad[i].second});
    s.n_bad = int(s.bad.size());
    dump_evidence(opts.evidence_dir, "gamma1", worker, Complex(k0.k0, 0));
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::unstable_midfrequency;
      v.detail = "unstable spectrum for k0 <= |xi| <= pi/X";
      return v;
    }
  }
  // Step 3: multiplicity-2 confirmation on the shifted semicircle.  The
  // shift keeps a resolvable standoff from the critical roots even when
  // beta (hence the nominal shift) is nearly zero.
  {
    const double shift = std::max(
        2.0 * std::max(std::abs(re_b1), std::abs(re_b2)) * k0.k0 * k0.k0,
        1e-6);
    ContourWorker worker(
        Contour::shifted_semicircle(shift, 2.0 * opts.r0, shift), scaled);
    WindingSummary s = sweep_windings(
        worker, "Gamma~", linspace(-k0.k0, k0.k0, opts.xi_points), 2);
    dump_evidence(opts.evidence_dir, "gamma_tilde", worker, Complex(0, 0));
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::inconclusive;
      v.detail = "Step 3 winding != 2: critical multiplicity not confirmed";
      return v;
    }
  }

  if (alpha_ok && distinct && k0.inequality_ok) {
    v.outcome = Outcome::stable;
  } else {
    v.outcome = Outcome::inconclusive;
    v.detail = !alpha_ok    ? "alpha_j not purely imaginary within tolerance"
               : !distinct ? "alpha_1 == alpha_2 within tolerance"
                           : "k0 inequality failed";
  }
  return v;
}

StabilityVerdict verify_sh(const WaveProfile& wave, const VerifyOpts& opts) {
  StabilityVerdict v;
  const double omega = (2.0 * kPi / wave.X - 1.0) / wave.params.epsilon;
  v.wave_id = profile_cache_key(wave.params, wave.X, omega);
  v.q = 0.0;
  v.delta = 0.0;
  v.eps = wave.params.epsilon;
  v.X = wave.X;

  EvansSolver solver(linearized_symbol(wave), opts.evans_tol);
  DProvider low = solver.provider(EvansVariant::lifted_unscaled);
  DProvider scaled = solver.provider(EvansVariant::lifted_scaled);

  v.hf = hf_radius(wave, 0.0);
  const double R = v.hf.R0;  // = eps^2
  const double xi_max = kPi / wave.X;

  CriticalCoeffs coeffs =
      taylor_coeffs(low, Family::swift_hohenberg, opts.taylor);
  v.crit = critical_modes(coeffs, Family::swift_hohenberg);
  v.d2_origin = coeffs.sh[0].real();

  const double re_b = v.crit.beta[0].real();
  if (re_b > 0.0) {
    v.outcome = Outcome::unstable_diffusive;
    v.detail = "Re beta > 0";
    return v;
  }

  // Sideband scan of the right-half annulus up to the spectral bound.
  {
    ContourWorker worker(Contour::gamma0(opts.sh_r0, R), scaled);
    WindingSummary s = sweep_windings(
        worker, "annulus", linspace(-xi_max, xi_max, opts.xi_points + 1), 0);
    dump_evidence(opts.evidence_dir, "sh_annulus", worker, Complex(0, 0));
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::unstable_midfrequency;
      v.detail = "unstable spectrum away from the origin";
      return v;
    }
  }

  // Moment bound at the paper's radius 2: several branches sit inside, so
  // the roots are recovered jointly and the max modulus taken - an upper
  // bound for the critical curve, which is all the inequality needs.
  K0Selection k0 = select_k0(low, opts.sh_K, 2.0, std::abs(re_b),
                             opts.moments_nxi, opts.k0_safety, -1);
  v.crit.k0 = k0.k0;
  v.crit.K = k0.K;
  v.crit.M = k0.M;
  v.crit.k0_inequality_ok = k0.inequality_ok;

  // Semicircle through the origin: no roots for |xi| >= k0.
  {
    ContourWorker worker(
        Contour::shifted_semicircle(0.0, opts.sh_semicircle_radius, 0.0),
        scaled);
    std::vector<double> xis = linspace(k0.k0, xi_max, opts.xi_points / 2);
    std::vector<double> both = xis;
    for (double x : xis) both.push_back(-x);
    WindingSummary s = sweep_windings(worker, "semicircle", both, 0);
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::unstable_midfrequency;
      v.detail = "root in the right half plane for |xi| >= k0";
      return v;
    }
  }
  // Shifted semicircle: exactly the critical root for |xi| < k0.
  {
    const double shift =
        std::max(2.0 * std::abs(re_b) * k0.k0 * k0.k0, opts.sh_shift);
    ContourWorker worker(
        Contour::shifted_semicircle(0.0, opts.sh_semicircle_radius, shift),
        scaled);
    WindingSummary s = sweep_windings(
        worker, "semicircle_shifted", linspace(-k0.k0, k0.k0, opts.xi_points),
        1);
    v.windings.push_back(s);
    if (s.n_bad > 0) {
      v.outcome = Outcome::inconclusive;
      v.detail = "critical multiplicity not confirmed";
      return v;
    }
  }

  const bool alpha_ok = std::abs(v.crit.alpha[0]) < 1e-4;
  if (alpha_ok && k0.inequality_ok) {
    v.outcome = Outcome::stable;
  } else {
    v.outcome = Outcome::inconclusive;
    v.detail = alpha_ok ? "k0 inequality failed" : "alpha not ~ 0";
  }
  return v;
}

}  // namespace

StabilityVerdict verify_stability(const WaveProfile& profile,
                                  const VerifyOpts& opts) {
  if (!profile.converged())
    throw ProtocolError("verify_stability: profile not converged");
  return profile.params.family == Family::gks ? verify_gks(profile, opts)
                                              : verify_sh(profile, opts);
}

bool sh_has_unstable_spectrum(const WaveProfile& profile, double r0,
                              const VerifyOpts& opts) {
  EvansSolver solver(linearized_symbol(profile), opts.evans_tol);
  DProvider scaled = solver.provider(EvansVariant::lifted_scaled);
  const double R = profile.params.r;
  const double xi_max = kPi / profile.X;
  ContourWorker worker(Contour::gamma0(r0, R), scaled);
  WindingSummary s = sweep_windings(
      worker, "annulus", linspace(-xi_max, xi_max, opts.xi_points + 1), 0);
  return s.n_bad > 0;
}

std::string verdict_record(const StabilityVerdict& v) {
  std::string out;
  out += "# wave " + v.wave_id + "\n";
  out += "# columns: q delta alpha1 alpha2 beta1 beta2\n";
  char line[384];
  const Complex a1 = !v.crit.alpha.empty() ? v.crit.alpha[0] : Complex(0, 0);
  const Complex a2 = v.crit.alpha.size() > 1 ? v.crit.alpha[1] : Complex(0, 0);
  const Complex b1 = !v.crit.beta.empty() ? v.crit.beta[0] : Complex(0, 0);
  const Complex b2 = v.crit.beta.size() > 1 ? v.crit.beta[1] : Complex(0, 0);
  std::snprintf(line, sizeof line, "%.6g %.6g %s %s %s %s\n", v.q, v.delta,
                fmt_complex(a1).c_str(), fmt_complex(a2).c_str(),
                fmt_complex(b1).c_str(), fmt_complex(b2).c_str());
  out += line;
  out += std::string("# outcome: ") + outcome_name(v.outcome);
  if (!v.detail.empty()) out += " (" + v.detail + ")";
  out += "\n";
  char extra[256];
  std::snprintf(extra, sizeof extra,
                "# hf: R_re=%.6g R_mixed=%.6g R0=%.6g\n"
                "# k0=%.6g K=%.6g M=%.6g ineq=%d d2_origin=%.6g\n",
                v.hf.R_re, v.hf.R_mixed, v.hf.R0, v.crit.k0, v.crit.K,
                v.crit.M, int(v.crit.k0_inequality_ok), v.d2_origin);
  out += extra;
  for (const auto& w : v.windings) {
    std::snprintf(extra, sizeof extra,
                  "# winding %s: n_xi=%d expected=%d bad=%d mesh=%d "
                  "contrast=%.3g\n",
                  w.contour.c_str(), w.n_xi, w.expected, w.n_bad,
                  w.mesh_points, w.worst_contrast);
    out += extra;
  }
  return out;
}

}  // namespace twave
