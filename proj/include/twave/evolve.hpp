#pragma once

#include <string>
#include <vector>

#include "twave/profile.hpp"

namespace twave {

class EvolveError : public std::runtime_error {
 public:
  explicit EvolveError(const std::string& what) : std::runtime_error(what) {}
};

struct Perturbation {
  enum class Kind { none, gaussian, bloch_mode };
  Kind kind = Kind::none;
  double amplitude = 0.1;
  double width = 0.0;   // gaussian: defaults to one period
  double center = -1.0; // gaussian: defaults to mid-domain
  // bloch_mode: Re(amplitude * w(x) e^{i xi x}) built from a Hill eigenvector
  int bloch_index = 1;     // xi = 2 pi bloch_index / (n_cells X)
  int bloch_modes = 32;    // Hill truncation used to synthesize the mode
};

struct EvolutionRun {
  WaveProfile base;
  int n_cells = 40;
  int pts_per_cell = 64;
  double dt = 1e-3;
  double t_end = 50.0;
  int snapshots = 51;
  Perturbation perturb;
  double frame_speed = 0.0;  // co-moving frame: adds c0 u_x to the equation
};

struct Snapshot {
  double t;
  Eigen::VectorXd u;
};

struct EvolutionResult {
  double domain = 0.0;
  int grid = 0;
  std::vector<Snapshot> snapshots;
  double mass0 = 0.0;
  double max_mass_drift = 0.0;  // |int u - int u(0)|, gKS only
  bool blew_up = false;
  double t_blowup = 0.0;
};

// Fourth-order exponential time differencing with the contour-averaged
// coefficients; 2/3-rule dealiasing on the nonlinear term.
EvolutionResult evolve(const EvolutionRun& run);

struct ExtremaTracks {
  std::vector<double> times;
  // One row per tracked extremum, NaN after the track dies.
  std::vector<std::vector<double>> position;
  std::vector<bool> is_peak;
  std::vector<bool> terminated;
};

ExtremaTracks track_extrema(const EvolutionResult& result);

// Speeds of the left- and right-moving perturbation packets, from linear
// fits of the half-domain centroids of (u - clean tiling)^2.
struct PacketSpeeds {
  double left = 0.0;
  double right = 0.0;
};
PacketSpeeds packet_speeds(const EvolutionResult& run,
                           const EvolutionResult& clean, double t_from);

struct WhithamPrediction {
  std::vector<double> speeds;    // characteristics of the averaged system
  double k_h_prime = 0.0;        // hyperbolicity indicator k H'(k)
  double mean_zero_speed = 0.0;  // m(k) of the zero-speed family
  std::vector<double> evans_speeds;  // a_j = -Im alpha_j from the expansion
  std::vector<double> diffusion;     // Re beta_j
};

// Averaged first-order system along a fixed-equation branch in the
// wavenumber, with the Evans-side expansion for comparison.
WhithamPrediction whitham_prediction(const ContinuationBranch& branch,
                                     const WaveProfile& base);

// Fixed-delta branch in the period around `base`, for whitham_prediction.
ContinuationBranch k_branch(const WaveProfile& base, int half_points = 2,
                            double rel_step = 0.005);

struct ScalingProbe {
  std::vector<double> eta;
  std::vector<double> max_growth;
  double exponent = 0.0;
  bool no_growth = false;
};

// Growth-rate exponent near a stability boundary: max_xi Re lambda from
// Hill sweeps against the distance eta to the boundary, log-log slope.
ScalingProbe boundary_scaling_probe(const std::vector<WaveProfile>& family,
                                    const std::vector<double>& eta,
                                    int hill_modes = 32, int xi_points = 400);

}  // namespace twave
