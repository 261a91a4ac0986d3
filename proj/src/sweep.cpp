#include "twave/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

namespace twave {

namespace {
constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

SweepRow row_from_verdict(const std::string& key, const StabilityVerdict& v) {
  SweepRow r;
  r.key = key;
  r.ok = true;
  r.outcome = v.outcome;
  r.q = v.q;
  r.delta = v.delta;
  r.eps = v.eps;
  r.X = v.X;
  if (!v.crit.alpha.empty()) r.alpha1 = v.crit.alpha[0];
  if (v.crit.alpha.size() > 1) r.alpha2 = v.crit.alpha[1];
  if (!v.crit.beta.empty()) r.beta1 = v.crit.beta[0];
  if (v.crit.beta.size() > 1) r.beta2 = v.crit.beta[1];
  return r;
}

Outcome outcome_from_name(const std::string& s) {
  for (Outcome o : {Outcome::stable, Outcome::unstable_hyperbolic,
                    Outcome::unstable_diffusive, Outcome::unstable_midfrequency,
                    Outcome::degenerate_near_D, Outcome::inconclusive})
    if (s == outcome_name(o)) return o;
  return Outcome::inconclusive;
}

}  // namespace

const char* study_name(Study s) {
  switch (s) {
    case Study::gks_fixed_eps: return "fixed_eps";
    case Study::gks_thin_film: return "thin_film";
    case Study::gks_kdv_limit: return "kdv_limit";
    case Study::sh_boundary: return "sh_boundary";
  }
  return "?";
}

std::vector<double> GridSpec::points() const {
  std::vector<double> v;
  if (step == 0.0 || from == to) {
    v.push_back(from);
    return v;
  }
  const double dir = to > from ? 1.0 : -1.0;
  const double h = dir * std::abs(step);
  for (double x = from; dir * (x - to) < std::abs(step) * 1e-9; x += h)
    v.push_back(x);
  return v;
}

// ---- records ----------------------------------------------------------------

std::string row_to_record(const SweepRow& row) {
  std::ostringstream os;
  os << row.key << " | status=" << (row.ok ? "ok" : "error");
  if (!row.ok) {
    std::string msg = row.error;
    for (char& c : msg)
      if (c == '\n' || c == '|') c = ';';
    os << " msg=" << msg;
    return os.str();
  }
  char buf[512];
  std::snprintf(buf, sizeof buf,
                " outcome=%s q=%.10g delta=%.10g eps=%.10g X=%.10g "
                "alpha1=%.10g%+.10gi alpha2=%.10g%+.10gi "
                "beta1=%.10g%+.10gi beta2=%.10g%+.10gi",
                outcome_name(row.outcome), row.q, row.delta, row.eps, row.X,
                row.alpha1.real(), row.alpha1.imag(), row.alpha2.real(),
                row.alpha2.imag(), row.beta1.real(), row.beta1.imag(),
                row.beta2.real(), row.beta2.imag());
  os << buf;
  return os.str();
}

SweepRow record_to_row(const std::string& line) {
  SweepRow r;
  const auto bar = line.find(" | ");
  if (bar == std::string::npos) throw SweepError("bad record: " + line);
  r.key = line.substr(0, bar);
  const std::string rest = line.substr(bar + 3);
  auto grab = [&](const std::string& name) -> std::string {
    const auto at = rest.find(name + "=");
    if (at == std::string::npos) return "";
    const auto end = rest.find(' ', at);
    return rest.substr(at + name.size() + 1,
                       end == std::string::npos ? std::string::npos
                                                : end - at - name.size() - 1);
  };
  r.ok = grab("status") == "ok";
  if (!r.ok) {
    // msg is the last field and may contain spaces
    const auto at = rest.find("msg=");
    if (at != std::string::npos) r.error = rest.substr(at + 4);
    return r;
  }
  r.outcome = outcome_from_name(grab("outcome"));
  r.q = std::stod(grab("q"));
  r.delta = std::stod(grab("delta"));
  r.eps = std::stod(grab("eps"));
  r.X = std::stod(grab("X"));
  auto cplx = [&](const std::string& name) {
    const std::string s = grab(name);
    double re = 0, im = 0;
    std::sscanf(s.c_str(), "%lf%lfi", &re, &im);
    return Complex(re, im);
  };
  r.alpha1 = cplx("alpha1");
  r.alpha2 = cplx("alpha2");
  r.beta1 = cplx("beta1");
  r.beta2 = cplx("beta2");
  return r;
}

std::map<std::string, SweepRow> load_records(const std::string& path) {
  std::map<std::string, SweepRow> out;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    SweepRow r = record_to_row(line);
    out[r.key] = r;
  }
  return out;
}

void append_record(const std::string& path, const SweepRow& row) {
  std::ofstream f(path, std::ios::app);
  f << row_to_record(row) << "\n";
}

// ---- studies ----------------------------------------------------------------

namespace {

struct Recorder {
  std::string path;
  std::map<std::string, SweepRow> done;
  int computed = 0;
  int budget = -1;

  bool has(const std::string& key) const { return done.count(key) > 0; }
  bool over_budget() const { return budget >= 0 && computed >= budget; }
  void take(const SweepRow& row) {
    done[row.key] = row;
    ++computed;
    if (!path.empty()) append_record(path, row);
  }
};

// One wavenumber lane of the thin-film study: continue in X along the grid,
// verifying each point; a failed continuation marks the remaining points.
void thin_film_lane(const SweepSpec& spec, double eps, Recorder& rec) {
  const std::vector<double> xs = spec.X_grid.points();
  WaveProfile cur;
  bool have = false;
  for (double X : xs) {
    char key[64];
    std::snprintf(key, sizeof key, "eps=%s X=%s", fmt(eps).c_str(),
                  fmt(X).c_str());
    if (rec.has(key) || rec.over_budget()) {
      if (rec.has(key)) {
        auto it = rec.done.find(key);
        if (it->second.ok) {
          // keep walking the branch from a cached profile when possible
          try {
            cur = thin_film_wave(eps, X, spec.factory);
            have = true;
          } catch (const std::exception&) {
          }
        }
      }
      continue;
    }
    SweepRow row;
    row.key = key;
    try {
      WaveProfile w;
      if (have) {
        try {
          w = continue_branch(cur, {"X", X, X, spec.X_grid.step}).back();
        } catch (const ProfileError&) {
          w = thin_film_wave(eps, X, spec.factory);
        }
      } else {
        w = thin_film_wave(eps, X, spec.factory);
      }
      cur = w;
      have = true;
      row = row_from_verdict(key, verify_stability(w, spec.verify));
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      have = false;
    }
    rec.take(row);
  }
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  Recorder rec;
  rec.budget = spec.max_points;
  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    rec.path = spec.out_dir + "/records.txt";
    rec.done = load_records(rec.path);
  }

  switch (spec.study) {
    case Study::gks_fixed_eps: {
      const std::vector<double> qs = spec.q.points();
      WaveProfile cur;
      bool have = false;
      for (double q : qs) {
        char key[64];
        std::snprintf(key, sizeof key, "q=%s", fmt(q).c_str());
        if (rec.has(key) || rec.over_budget()) continue;
        SweepRow row;
        row.key = key;
        try {
          WaveProfile w = have
                              ? continue_branch(cur, {"q", q, q, spec.q.step})
                                    .back()
                              : gks_wave(spec.eps, spec.X, q, spec.factory);
          cur = w;
          have = true;
          row = row_from_verdict(key, verify_stability(w, spec.verify));
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
        rec.take(row);
      }
      break;
    }
    case Study::gks_thin_film: {
      const std::vector<double> es = spec.eps_grid.points();
      if (spec.jobs <= 1 || es.size() <= 1) {
        for (double eps : es) thin_film_lane(spec, eps, rec);
      } else {
        // Lanes are independent; one recorder each, merged by a single
        // writer below.
        std::vector<Recorder> lanes(es.size());
        for (auto& l : lanes) {
          l.done = rec.done;
          l.budget = spec.max_points;
        }
        std::vector<std::thread> pool;
        std::size_t next = 0;
        for (int t = 0; t < spec.jobs; ++t) pool.emplace_back([&, t]() {
          for (std::size_t i = t; i < es.size(); i += spec.jobs)
            thin_film_lane(spec, es[i], lanes[i]);
          (void)next;
        });
        for (auto& th : pool) th.join();
        for (auto& l : lanes)
          for (const auto& [key, row] : l.done)
            if (!rec.has(key)) rec.take(row);
      }
      break;
    }
    case Study::gks_kdv_limit: {
      const double eps = std::sqrt(1.0 - spec.delta * spec.delta);
      const std::vector<double> xs = spec.X_grid.points();
      for (double X : xs) {
        char key[64];
        std::snprintf(key, sizeof key, "X=%s", fmt(X).c_str());
        if (rec.has(key) || rec.over_budget()) continue;
        SweepRow row;
        row.key = key;
        try {
          WaveProfile w = thin_film_wave(eps, X, spec.factory);
          row = row_from_verdict(key, verify_stability(w, spec.verify));
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
        rec.take(row);
      }
      break;
    }
    case Study::sh_boundary: {
      const std::vector<double> oms = spec.omega.points();
      for (double om : oms) {
        char key[64];
        std::snprintf(key, sizeof key, "omega=%s", fmt(om).c_str());
        if (rec.has(key) || rec.over_budget()) continue;
        SweepRow row;
        row.key = key;
        try {
          WaveProfile w = sh_wave(spec.eps, om, spec.factory);
          row = row_from_verdict(key, verify_stability(w, spec.verify));
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
        rec.take(row);
      }
      break;
    }
  }

  SweepResult out;
  out.computed = rec.computed;
  for (const auto& [key, row] : rec.done) out.rows.push_back(row);
  std::sort(out.rows.begin(), out.rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.key < b.key; });

  if (!spec.out_dir.empty()) {
    out.table_path = spec.out_dir + "/table.csv";
    std::ofstream f(out.table_path);
    f << "# twave sweep " << study_name(spec.study) << "\n";
    f << "key,q,delta,eps,X,alpha1,alpha2,beta1,beta2,outcome\n";
    for (const SweepRow& r : out.rows) {
      if (!r.ok) {
        f << r.key << ",,,,,,,,,error:" << r.error << "\n";
        continue;
      }
      char buf[512];
      std::snprintf(buf, sizeof buf,
                    "%s,%.10g,%.10g,%.10g,%.10g,%.10g%+.10gi,%.10g%+.10gi,"
                    "%.10g%+.10gi,%.10g%+.10gi,%s\n",
                    r.key.c_str(), r.q, r.delta, r.eps, r.X, r.alpha1.real(),
                    r.alpha1.imag(), r.alpha2.real(), r.alpha2.imag(),
                    r.beta1.real(), r.beta1.imag(), r.beta2.real(),
                    r.beta2.imag(), outcome_name(r.outcome));
      f << buf;
    }
  }
  return out;
}

std::vector<std::pair<double, double>> stable_bands(const SweepResult& r) {
  // Group by X (the swept coordinate of the band studies), sorted.
  std::vector<std::pair<double, bool>> pts;
  for (const SweepRow& row : r.rows)
    if (row.ok) pts.push_back({row.X, row.outcome == Outcome::stable});
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> bands;
  bool in_band = false;
  double start = 0.0, last = 0.0;
  for (const auto& [x, stable] : pts) {
    if (stable && !in_band) {
      in_band = true;
      start = x;
    }
    if (!stable && in_band) {
      in_band = false;
      bands.push_back({start, last});
    }
    if (stable) last = x;
  }
  if (in_band) bands.push_back({start, last});
  return bands;
}

BoundaryEstimate bisect_boundary(const VerdictProbe& probe,
                                 const std::string& parameter, double lo,
                                 double hi, double resolution) {
  StabilityVerdict vlo = probe(lo);
  StabilityVerdict vhi = probe(hi);
  const bool slo = vlo.outcome == Outcome::stable;
  const bool shi = vhi.outcome == Outcome::stable;
  if (slo == shi)
    throw SweepError("bisect_boundary: equal verdicts at the bracket ends");
  BoundaryEstimate out;
  out.parameter = parameter;
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    StabilityVerdict vm = probe(mid);
    if ((vm.outcome == Outcome::stable) == slo) {
      lo = mid;
      vlo = vm;
    } else {
      hi = mid;
      vhi = vm;
    }
  }
  out.lo = lo;
  out.hi = hi;
  out.lo_outcome = vlo.outcome;
  out.hi_outcome = vhi.outcome;
  out.lo_delta = vlo.delta;
  out.hi_delta = vhi.delta;
  const Outcome bad = slo ? vhi.outcome : vlo.outcome;
  switch (bad) {
    case Outcome::unstable_hyperbolic: out.transition = "hyperbolic"; break;
    case Outcome::unstable_diffusive: out.transition = "diffusive"; break;
    case Outcome::unstable_midfrequency: out.transition = "midfrequency"; break;
    case Outcome::degenerate_near_D: out.transition = "degenerate"; break;
    default: out.transition = "inconclusive";
  }
  return out;
}

ShBoundary sh_eckhaus_boundary(double eps, std::vector<double> r0_list,
                               double resolution, const FactoryOpts& factory) {
  ShBoundary out;
  VerifyOpts vo;
  for (double r0 : r0_list) {
    // the inner radius must stay inside the spectral bound eps^2
    r0 = std::min(r0, 0.5 * eps * eps);
    double lo = 0.05, hi = 0.45;
    // march the omega continuation once; bisect on the sideband winding
    auto unstable_at = [&](double om) {
      WaveProfile w = sh_wave(eps, om, factory);
      return sh_has_unstable_spectrum(w, r0, vo);
    };
    if (unstable_at(lo))
      throw SweepError("sh_eckhaus_boundary: unstable at the inner bracket");
    if (!unstable_at(hi))
      throw SweepError("sh_eckhaus_boundary: stable at the outer bracket");
    while (hi - lo > resolution) {
      const double mid = 0.5 * (lo + hi);
      (unstable_at(mid) ? hi : lo) = mid;
    }
    out.r0.push_back(r0);
    out.omega_star.push_back(0.5 * (lo + hi));
  }
  out.omega_limit = out.omega_star.back();
  return out;
}

}  // namespace twave
