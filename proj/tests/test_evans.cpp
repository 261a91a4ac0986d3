#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "twave/evans.hpp"

using namespace twave;

namespace {

// Independent scaling-and-squaring oracle for constant coefficients.
Matrix4cd expm_oracle(const Matrix4cd& A) { return A.exp(); }

}  // namespace

TEST_CASE("monodromy equals the matrix exponential for constant coefficients") {
  ModelParams p = ModelParams::gks_gamma_one(0.2, 1.3);
  SpectralSystem sys = constant_system(p, 0.0, 1.0, 6.3);
  EvansSolver solver(sys, OdeTol{1e-12, 1e-13});
  const Complex lam(0.7, 0.3);
  Matrix4cd psi = solver.monodromy(lam);
  Matrix4cd oracle = expm_oracle(sys.H_of(sys.w0, lam) * sys.X);
  CHECK((psi - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff() <
        1e-9);
}

TEST_CASE("short-interval monodromy is I + L H") {
  ModelParams p = ModelParams::gks_gamma_one(0.0, 1.4627);
  const double L = 1e-6;
  SpectralSystem sys = constant_system(p, 0.0, 0.5, L);
  EvansSolver solver(sys);
  const Complex lam(2.0, -1.0);
  Matrix4cd psi = solver.monodromy(lam);
  Matrix4cd lin = Matrix4cd::Identity() + L * sys.H_of(sys.w0, lam);
  CHECK((psi - lin).cwiseAbs().maxCoeff() / lin.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("Abel identity on the q=5 wave") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  Matrix4cd psi = solver.monodromy(Complex(1.0, 1.0));  // throws on violation
  const Complex det = psi.determinant();
  CHECK(std::abs(det - 1.0) < 1e-8);  // tr H = 0 at eps = 0
}

TEST_CASE("translation mode: eigenvalue 1 of Psi(X, 0)") {
  const WaveProfile& w = twf::q5_eps0();
  EvansSolver solver(linearized_symbol(w));
  Matrix4cd psi = solver.monodromy(0.0);
  Eigen::Vector4cd v;
  v << w.samples(1, 0), w.samples(2, 0), w.samples(3, 0),
      profile_u4(w.params, w.c, w.samples.col(0));
  CHECK((psi * v - v).norm() / v.norm() < 1e-6);
}

TEST_CASE("D(0,0) vanishes to contour scale") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  double scale = 0.0;
  for (int j = 0; j < 16; ++j) {
    const double th = 2.0 * M_PI * j / 16;
    scale = std::max(scale,
                     std::abs(solver.eval(0.1 * Complex(std::cos(th),
                                                        std::sin(th)),
                                          0.0)));
  }
  CHECK(std::abs(solver.eval(0.0, 0.0)) < 1e-6 * scale);
}

TEST_CASE("conjugation symmetry D(conj lambda, -xi) == conj D(lambda, xi)") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> real(-2.0, 2.0);
  for (int t = 0; t < 6; ++t) {
    const Complex lam(real(rng), real(rng));
    const Complex xi(real(rng) * 0.2, 0.0);
    const Complex a = solver.eval(std::conj(lam), -xi);
    const Complex b = std::conj(solver.eval(lam, xi));
    CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), std::abs(b)));
  }
}

TEST_CASE("constant state: D vanishes on the dispersion curves") {
  ModelParams p = ModelParams::gks_gamma_one(0.0, 1.4627);
  const double X = 6.3, u0 = 1.2;
  SpectralSystem sys = constant_system(p, 0.0, u0, X);
  EvansSolver solver(sys, OdeTol{1e-10, 1e-12});
  const double xi = 0.31;
  for (int n : {-1, 0, 2}) {
    const Complex lam =
        constant_dispersion(p, 0.0, u0, xi + 2.0 * M_PI * n / X);
    // Normalize against the local variation of D near the root.
    const double scale = std::abs(solver.eval(lam + Complex(0.1, 0.0), xi));
    CHECK(std::abs(solver.eval(lam, xi)) < 1e-6 * scale);
  }
}

TEST_CASE("plain and lifted agree") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  const Complex lam(1.0, 0.5), xi(0.3, 0.0);
  Matrix4cd psi = solver.monodromy(lam);
  const Complex z = std::exp(Complex(0, 1) * xi * 6.3);
  const Complex plain = (psi - z * Matrix4cd::Identity()).determinant();
  const Complex lifted = solver.eval(lam, xi, EvansVariant::lifted_unscaled);
  CHECK(std::abs(plain - lifted) < 1e-8 * std::abs(plain));
}

TEST_CASE("xi reuse: one solve serves all xi") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  DRow row = solver.row(Complex(0.9, 0.2), EvansVariant::lifted_unscaled);
  std::vector<Complex> got;
  for (int j = 0; j < 100; ++j) got.push_back(row(Complex(-0.49 + 0.01 * j, 0)));
  CHECK(solver.solve_count() == 1);
  // Fresh per-xi solvers reproduce the same values exactly.
  for (int j : {0, 37, 99}) {
    EvansSolver fresh(linearized_symbol(twf::q5_eps0()));
    const Complex v = fresh.eval(Complex(0.9, 0.2), Complex(-0.49 + 0.01 * j, 0));
    CHECK(std::abs(v - got[j]) <= 1e-12 * std::abs(v));
  }
}

TEST_CASE("large-lambda conditioning of the scaled variant") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  const Complex lam(15.0, 10.0);
  const Complex scaled = solver.eval(lam, 0.3, EvansVariant::lifted_scaled);
  CHECK(std::isfinite(std::abs(scaled)));
  const Complex unscaled = solver.eval(lam, 0.3, EvansVariant::lifted_unscaled);
  MESSAGE("unscaled |D| = ", std::abs(unscaled), ", scaled |D| = ",
          std::abs(scaled));
  CHECK(std::isfinite(std::abs(unscaled)));
}

TEST_CASE("balanced variant ties to plain through Abel's relation") {
  // At eps = 0 the trace vanishes and D == D~; at eps = 0.2 the factor
  // exp(+int_0^{X/2} tr H) = exp(-eps X / 2) is decisive.
  for (const WaveProfile* w : {&twf::q5_eps0(), &twf::q5_eps02()}) {
    EvansSolver solver(linearized_symbol(*w));
    const Complex lam(2.0, 1.0), xi(0.1, 0.0);
    const Complex plain = solver.eval(lam, xi, EvansVariant::lifted_unscaled);
    const Complex bal = solver.eval(lam, xi, EvansVariant::balanced);
    const Complex tie = bal * std::exp(Complex(
                                  0.5 * solver.system().trace_integral(), 0));
    CHECK(std::abs(plain - tie) < 1e-7 * std::abs(plain));
  }
}

TEST_CASE("rescaled variant: bounded in X for constant coefficients") {
  ModelParams p = ModelParams::gks_gamma_one(0.0, 1.4627);
  const Complex lam(150.0, 10.0);
  const Complex xi(0.21, 0.0);
  std::vector<double> mags;
  for (double X : {6.3, 12.6, 25.2}) {
    EvansSolver solver(constant_system(p, 0.0, 1.0, X));
    mags.push_back(std::abs(solver.eval(lam, xi, EvansVariant::rescaled)));
  }
  CHECK(std::abs(mags[1] - mags[0]) < 1e-6 * mags[0]);
  CHECK(std::abs(mags[2] - mags[0]) < 1e-6 * mags[0]);
}

TEST_CASE("rescaled prefactor identity against plain") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  const Complex lam(3.0, 2.0);
  const Complex xi(0.17, 0.0);
  EvansValue rv = solver.evaluate({lam, xi, EvansVariant::rescaled});
  REQUIRE(rv.rescaling.has_value());
  const auto& rd = *rv.rescaling;
  const Complex bal = solver.eval(lam, xi, EvansVariant::balanced);
  const Complex pre =
      std::exp(Complex((rd.alpha_minus - rd.alpha_plus) * 6.3 / 2.0, 0.0)) *
      std::exp(Complex(0.0, -double(rd.n)) * xi * 6.3);
  CHECK(std::abs(rv.value - pre * bal) <= 1e-12 * std::abs(rv.value));
}

TEST_CASE("spatial eigenvalue count right of the dispersion curves") {
  EvansSolver solver(linearized_symbol(twf::q5_eps0()));
  EvansValue rv = solver.evaluate({Complex(10.0, 0.0), Complex(0.0, 0.0),
                                   EvansVariant::rescaled});
  REQUIRE(rv.rescaling.has_value());
  CHECK(rv.rescaling->n == 2);
}

TEST_CASE("rescaling undefined on a dispersion curve") {
  // lambda = 0 at a constant state sits on a dispersion curve: a spatial
  // eigenvalue is purely imaginary (k = 0 root).
  ModelParams p = ModelParams::gks_gamma_one(0.0, 1.4627);
  EvansSolver solver(constant_system(p, 0.0, 1.0, 6.3));
  CHECK_THROWS_AS(solver.eval(Complex(0.0, 0.0), 0.1, EvansVariant::rescaled),
                  RescalingUndefined);
}

TEST_CASE("linearized_symbol requires a converged profile") {
  WaveProfile raw = sh_seed(0.1, 0.0, 0.187);
  CHECK_THROWS_AS(linearized_symbol(raw), EvansError);
}
