#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "twave/factory.hpp"
#include "twave/protocol.hpp"

namespace twave {

class SweepError : public std::runtime_error {
 public:
  explicit SweepError(const std::string& what) : std::runtime_error(what) {}
};

enum class Study { gks_fixed_eps, gks_thin_film, gks_kdv_limit, sh_boundary };
const char* study_name(Study s);

struct GridSpec {
  double from = 0.0, to = 0.0, step = 0.0;
  std::vector<double> points() const;
};

struct SweepSpec {
  Study study = Study::gks_fixed_eps;
  // fixed_eps: q sweep at fixed (eps, X); thin_film: eps x X grid;
  // kdv_limit: X sweep at fixed delta; sh_boundary: omega sweep at fixed eps.
  double eps = 0.0;
  double X = 6.3;
  double delta = 0.1;  // kdv_limit
  GridSpec q{4.5, 7.1, 0.1};
  GridSpec eps_grid{0.05, 1.0, 0.25};
  GridSpec X_grid{5.0, 30.0, 0.1};
  GridSpec omega{0.0, 0.45, 0.05};
  VerifyOpts verify;
  FactoryOpts factory;
  int jobs = 1;
  std::string out_dir;     // append-only records + final table
  int max_points = -1;     // debug hook: stop after this many new points
};

struct SweepRow {
  std::string key;
  bool ok = false;
  std::string error;
  Outcome outcome = Outcome::inconclusive;
  double q = 0.0, delta = 0.0, eps = 0.0, X = 0.0;
  Complex alpha1, alpha2, beta1, beta2;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by key
  std::string table_path;
  int computed = 0;  // points evaluated this run (excludes resumed ones)
};

SweepResult run_sweep(const SweepSpec& spec);

// Stable X-bands of a sweep result (consecutive stable grid points).
std::vector<std::pair<double, double>> stable_bands(const SweepResult& r);

using VerdictProbe = std::function<StabilityVerdict(double)>;

struct BoundaryEstimate {
  std::string parameter;
  double lo = 0.0, hi = 0.0;
  Outcome lo_outcome = Outcome::inconclusive;
  Outcome hi_outcome = Outcome::inconclusive;
  std::string transition;  // hyperbolic | diffusive | midfrequency | degenerate
  double lo_delta = 0.0, hi_delta = 0.0;  // delta at the bracket ends (gKS)
};

// Bisection on the swept parameter; each probe is a full verification.
BoundaryEstimate bisect_boundary(const VerdictProbe& probe,
                                 const std::string& parameter, double lo,
                                 double hi, double resolution);

// SH Eckhaus boundary with the inner-radius continuation r0 -> 0: bisection
// in omega against the sideband winding at each r0, the smallest r0 wins.
struct ShBoundary {
  std::vector<double> r0;
  std::vector<double> omega_star;
  double omega_limit = 0.0;
};
ShBoundary sh_eckhaus_boundary(double eps, std::vector<double> r0_list,
                               double resolution = 0.002,
                               const FactoryOpts& factory = {});

// ---- record persistence ----------------------------------------------------

// Append-only line records keyed by point; completed keys are skipped on
// resume and the final table is rebuilt from the records alone, so a resumed
// sweep reproduces the table byte for byte.
std::map<std::string, SweepRow> load_records(const std::string& path);
void append_record(const std::string& path, const SweepRow& row);
std::string row_to_record(const SweepRow& row);
SweepRow record_to_row(const std::string& line);

}  // namespace twave
