#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace twave {

struct OdeTol {
  double abs = 1e-10;
  double rel = 1e-8;
  // Trajectories past this magnitude abort with OdeError; shooting treats
  // that as a failed trial, spectral solves never hit it legitimately.
  double blowup = 1e250;
};

struct OdeStats {
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

class OdeError : public std::runtime_error {
 public:
  explicit OdeError(const std::string& what) : std::runtime_error(what) {}
};

// Dormand-Prince 5(4) with PI-free step control.  State is any Eigen-style
// fixed vector supporting +, scalar *, cwiseAbs().maxCoeff().  The RHS functor
// is called as rhs(x, y, dydx).
template <class State, class Rhs>
OdeStats integrate_dp54(const Rhs& rhs, State& y, double x0, double x1,
                        const OdeTol& tol, std::size_t max_steps = 4000000) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // 5th-4th order error weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeStats stats;
  const double span = x1 - x0;
  if (span == 0.0) return stats;
  const double dir = span > 0 ? 1.0 : -1.0;
  double x = x0;
  double h = dir * std::min(std::abs(span), std::abs(span) / 64.0 + 1e-4);
  const double hmin = std::abs(span) * 1e-14;

  State k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, yerr;
  rhs(x, y, k1);
  ++stats.rhs_evals;

  while (dir * (x1 - x) > 0) {
    if (dir * (x + h - x1) > 0) h = x1 - x;
    if (++stats.steps > max_steps)
      throw OdeError("integrate_dp54: step limit exceeded");

    ytmp = y + h * (a21 * k1);
    rhs(x + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(x + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(x + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(x + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(x + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(x + h, ynew, k7);  // FSAL
    stats.rhs_evals += 6;

    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    // Component-wise scaling: the states mix magnitudes (profile values,
    // unit frames, log radii), so a single norm would misweight them.
    const double err =
        (yerr.cwiseAbs().array() /
         (tol.abs + tol.rel * y.cwiseAbs().array().max(ynew.cwiseAbs().array())))
            .maxCoeff();
    if (!std::isfinite(err) || ynew.cwiseAbs().maxCoeff() > tol.blowup)
      throw OdeError("integrate_dp54: solution blow-up at x=" +
                     std::to_string(x));

    if (err <= 1.0) {
      x += h;
      y = ynew;
      k1 = k7;
      const double grow = err > 1e-10 ? 0.9 * std::pow(err, -0.2) : 5.0;
      h *= std::min(5.0, std::max(0.2, grow));
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (std::abs(h) < hmin)
        throw OdeError("integrate_dp54: step size underflow at x=" +
                       std::to_string(x));
    }
  }
  return stats;
}

}  // namespace twave
