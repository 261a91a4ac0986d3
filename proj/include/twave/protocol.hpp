#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twave/evans.hpp"

namespace twave {

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

class RootOnContour : public ProtocolError {
 public:
  explicit RootOnContour(const std::string& what) : ProtocolError(what) {}
};

// ---- high-frequency bounds -------------------------------------------------

struct HighFrequencyBound {
  double R_re = 0.0;     // bound on Re lambda
  double R_mixed = 0.0;  // radius bound from Re + |Im| estimates
  double R0 = 0.0;       // final search radius with safety margin
  struct {
    double f2u_du = 0.0;  // ||f''(u) u'||_inf
    double f1u = 0.0;     // ||f'(u)||_inf
    double delta = 0.0;
    double eps = 0.0;
  } inputs;
};

// Spectral search radius from the energy estimates; thin-film profiles are
// rescaled to the unit-gamma normal form first, and the large-eps variant of
// the bound is evaluated too, taking the smaller radius.
HighFrequencyBound hf_radius(const WaveProfile& profile, double margin = 0.1);

// ---- contours ---------------------------------------------------------------

struct Contour {
  enum class Kind { gamma0, gamma1, disk, shifted_semicircle, custom };
  Kind kind = Kind::custom;
  std::function<Complex(double)> at;  // closed curve on t in [0, 1]
  std::vector<double> corners;        // params the mesh must contain
  double r0 = 0.0, R0 = 0.0;
  Complex center{0.0, 0.0};
  double radius = 0.0;

  static Contour circle(Complex center, double radius);
  // Boundary of the right-half annulus r0 <= |z| <= R0, Re z >= 0.
  static Contour gamma0(double r0, double R0);
  // Boundary of the right-half disk |z| <= R0, Re z >= 0.
  static Contour gamma1(double R0);
  // Boundary of { Re z >= -flat } cut from the disk |z - c0| <= radius.
  static Contour shifted_semicircle(double c0, double radius, double flat);
};

// ---- winding numbers --------------------------------------------------------

struct WindingOpts {
  int initial_points = 64;
  double max_rel_jump = 0.2;  // successive-point relative change rule
  int max_points = 40000;
  double contrast_floor = 1e-3;  // min/max |D| triggering extra scrutiny
};

struct WindingReport {
  int winding = 0;
  double arg_defect = 0.0;    // |accumulated - 2 pi w| / 2 pi
  double min_over_max = 1.0;  // |D| contrast on the final mesh
  double max_jump = 0.0;
  int mesh_points = 0;
};

// Shared-mesh winding engine: one Evans solve per mesh lambda, reused by
// every Bloch parameter evaluated on the contour.
class ContourWorker {
 public:
  ContourWorker(Contour contour, DProvider provider, WindingOpts opts = {});

  WindingReport winding(Complex xi);
  // D on the current mesh for diagnostics and moment integrals.
  std::vector<Complex> values(Complex xi);
  std::vector<Complex> mesh_lambdas() const;
  std::vector<double> mesh_ts() const;
  int mesh_size() const { return int(mesh_.size()); }
  const Contour& contour() const { return contour_; }

 private:
  struct Node {
    double t;
    Complex lambda;
    DRow row;
  };
  void insert(double t);
  bool refine_once(Complex xi);

  Contour contour_;
  DProvider provider_;
  WindingOpts opts_;
  std::vector<Node> mesh_;
};

// One-shot winding of a provider along a contour.
WindingReport winding_number(const DProvider& provider, const Contour& contour,
                             Complex xi, const WindingOpts& opts = {});

// ---- Taylor coefficients at the origin --------------------------------------

struct CriticalCoeffs {
  // D = a0 l^2 + a1 l xi + a2 xi^2 + a3 l^3 + a4 l^2 xi + a5 l xi^2 + a6 xi^3
  // (gKS); for SH the expansion starts at first order and lives in sh[0..4]:
  // D = s0 l + s1 xi + s2 l^2 + s3 l xi + s4 xi^2.
  std::array<Complex, 7> a{};
  std::array<Complex, 5> sh{};
  std::array<Complex, 3> low{};  // c00, c10, c01 diagnostics
  double h = 0.0;
  double validation_rel = 0.0;
};

struct TaylorOpts {
  double h = 1e-2;
  int n_lambda = 300;
  int n_xi = 1000;
  double validate_rel = 1e-4;
  int max_halvings = 3;
};

CriticalCoeffs taylor_coeffs(const DProvider& provider, Family family,
                             const TaylorOpts& opts = {});

// ---- critical modes ----------------------------------------------------------

struct CriticalExpansion {
  std::array<Complex, 7> a{};
  std::vector<Complex> alpha;  // 2 for gKS, 1 for SH
  std::vector<Complex> beta;
  Complex discriminant{0.0, 0.0};
  std::vector<double> whitham_speeds;  // a_j with lambda_j = -i a_j xi + ...
  double k0 = 0.0;
  double K = 0.0;
  double M = 0.0;  // moment-certified max |lambda_j| on |xi| = K
  double h = 0.0;  // Cauchy radius used
  bool k0_inequality_ok = false;
};

// alpha_j, beta_j and the discriminant from the Taylor coefficients
// (stable citardauq quadratic).
CriticalExpansion critical_modes(const CriticalCoeffs& c, Family family);

// ---- method of moments --------------------------------------------------------

struct MomentResult {
  Complex m1{0.0, 0.0};
  Complex m2{0.0, 0.0};
  std::vector<Complex> roots;
  int winding = 0;
};

struct MomentOpts {
  int initial_points = 128;
  double derivative_step = 0.1;  // fraction of local mesh spacing
  // > 0: require exactly this winding; <= 0: recover however many roots the
  // winding reports (Newton identities + companion matrix).
  int expected_roots = 2;
  WindingOpts winding;
};

// First and second moments of the spectral curves inside |lambda| = R at
// Bloch parameter xi, with the roots recovered by Newton's identities.
MomentResult moments(const DProvider& provider, Complex xi, double R,
                     const MomentOpts& opts = {});

// Moment-certified max modulus of the critical curves on |xi| = K, and the
// admissible low-frequency cutoff derived from it.
struct K0Selection {
  double k0 = 0.0;
  double k0_max = 0.0;  // equality point of the inequality
  double K = 0.0, R = 0.0, M = 0.0;
  bool inequality_ok = false;
};
K0Selection select_k0(const DProvider& provider, double K, double R,
                      double min_re_beta, int n_xi = 64, double safety = 6.0,
                      int expected_roots = 2);

// ---- full verification ---------------------------------------------------------

enum class Outcome {
  stable,
  unstable_hyperbolic,
  unstable_diffusive,
  unstable_midfrequency,
  degenerate_near_D,
  inconclusive
};
const char* outcome_name(Outcome o);

struct WindingSummary {
  std::string contour;
  int n_xi = 0;
  int expected = 0;
  int n_bad = 0;
  std::vector<std::pair<double, int>> bad;  // (xi, winding) offenders
  double worst_contrast = 1.0;
  int mesh_points = 0;
};

struct VerifyOpts {
  double r0 = 1.0;
  int xi_points = 1000;
  TaylorOpts taylor;
  double moments_K = 0.5;
  double moments_R = 2.0;
  int moments_nxi = 64;
  double k0_safety = 6.0;
  double hf_margin = 0.1;
  OdeTol evans_tol{1e-8, 1e-10};
  int step0_points = 64;
  double alpha_imag_tol_rel = 1e-3;  // |Re alpha| < rel |alpha| + abs
  double alpha_imag_tol_abs = 1e-6;
  double degenerate_rel = 1e-4;  // |d2 D(0,0)| below this x scan max
  double sh_r0 = 1e-3;
  double sh_semicircle_radius = 0.1;
  double sh_shift = 1e-4;
  double sh_K = 0.2;
  std::string evidence_dir;  // dump contour meshes when nonempty

  // Coarser grids for large parameter studies; the adaptive refinement and
  // the spectral Taylor integrals keep verdicts unchanged at this level.
  static VerifyOpts economy() {
    VerifyOpts o;
    o.xi_points = 250;
    o.taylor.n_lambda = 120;
    o.taylor.n_xi = 400;
    o.moments_nxi = 24;
    o.step0_points = 24;
    return o;
  }
};

struct StabilityVerdict {
  std::string wave_id;
  Outcome outcome = Outcome::inconclusive;
  double q = 0.0, delta = 0.0, eps = 0.0, X = 0.0;
  HighFrequencyBound hf;
  CriticalExpansion crit;
  double d2_origin = 0.0;      // del_lambda^2 D(0,0), real part
  double step0_scan_max = 0.0;
  bool step0_sign_change = false;
  std::vector<WindingSummary> windings;
  std::string detail;
};

StabilityVerdict verify_stability(const WaveProfile& profile,
                                  const VerifyOpts& opts = {});

// SH sideband detector used by the r0 -> 0 boundary refinement: true when
// spectrum is found inside the right-half annulus of inner radius r0.
bool sh_has_unstable_spectrum(const WaveProfile& profile, double r0,
                              const VerifyOpts& opts = {});

// Table-style text record (q, delta, alpha1, alpha2, beta1, beta2).
std::string verdict_record(const StabilityVerdict& v);

}  // namespace twave
