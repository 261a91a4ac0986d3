#include "twave/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "twave/evolve.hpp"
#include "twave/factory.hpp"
#include "twave/hill.hpp"
#include "twave/protocol.hpp"
#include "twave/sweep.hpp"

namespace twave {

namespace {

struct Global {
  std::string cache_dir = "twave_cache";
  std::string out;
  long seed = 12345;  // recorded for reproducibility of spot-check selections
  double tol_abs = 1e-8;
  double tol_rel = 1e-10;
  int jobs = 1;
  std::vector<std::string> argv;
};

std::string join_args(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) {
    if (!s.empty()) s += ' ';
    s += a;
  }
  return s;
}

GridSpec parse_range(const std::string& text) {
  GridSpec g;
  const auto c1 = text.find(':');
  if (c1 == std::string::npos) {
    g.from = g.to = std::stod(text);
    g.step = 0.0;
    return g;
  }
  const auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string::npos)
    throw CLI::ValidationError("range", "expected a or a:b:step");
  g.from = std::stod(text.substr(0, c1));
  g.to = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
  g.step = std::stod(text.substr(c2 + 1));
  return g;
}

std::ofstream open_output(const std::string& path, const Global& g) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output " + path);
  f << config_header(g.argv);
  return f;
}

WaveProfile build_wave(const Global& g, const std::string& family, double eps,
                       double X, double q, double omega) {
  FactoryOpts fo;
  fo.cache_dir = g.cache_dir;
  if (family == "gks") return gks_wave(eps, X, q, fo);
  if (family == "gks-tf" || family == "thin_film") return thin_film_wave(eps, X, fo);
  if (family == "sh") return sh_wave(eps, omega, fo);
  throw CLI::ValidationError("--family", "one of gks, gks-tf, sh");
}

int cmd_profile(const Global& g, const std::string& family, double eps,
                double X, double q, double omega) {
  WaveProfile w = build_wave(g, family, eps, X, q, omega);
  std::printf("wave %s\n", profile_cache_key(w.params, w.X, q).c_str());
  std::printf("  X=%.10g c=%.10g q=%.10g delta=%.10g eps=%.10g\n", w.X, w.c,
              w.q, w.params.delta, w.params.epsilon);
  std::printf("  residual=%.3e sup_u=%.10g sup_du=%.10g mean=%.3e\n",
              w.residual, w.sup_u, w.sup_du, w.mean_u);
  if (!g.out.empty()) {
    std::ofstream f = open_output(g.out, g);
    f << "# columns: x u u' u'' u'''\n";
    char line[200];
    for (int j = 0; j < w.n_samples; ++j) {
      std::snprintf(line, sizeof line, "%.12e %.12e %.12e %.12e %.12e\n",
                    w.x_of(j), w.samples(0, j), w.samples(1, j),
                    w.samples(2, j), w.samples(3, j));
      f << line;
    }
  }
  return 0;
}

int cmd_verify(const Global& g, const std::string& family, double eps,
               double X, double q, double omega, const VerifyOpts& vo) {
  WaveProfile w = build_wave(g, family, eps, X, q, omega);
  StabilityVerdict v = verify_stability(w, vo);
  const std::string rec = verdict_record(v);
  std::fputs(rec.c_str(), stdout);
  if (!g.out.empty()) {
    std::ofstream f = open_output(g.out, g);
    f << rec;
  }
  return 0;
}

int cmd_hill(const Global& g, const std::string& family, double eps, double X,
             double q, double omega, int modes, int xi_points) {
  WaveProfile w = build_wave(g, family, eps, X, q, omega);
  std::vector<double> grid;
  const double xm = std::numbers::pi / w.X;
  for (int j = 0; j < xi_points; ++j)
    grid.push_back(-xm + 2.0 * xm * j / std::max(1, xi_points - 1));
  HillSweep sweep = hill_sweep(w, grid, modes);
  std::ofstream f = open_output(g.out.empty() ? "cloud.csv" : g.out, g);
  f << "# columns: xi Re(lambda) Im(lambda)\n";
  char line[120];
  for (std::size_t i = 0; i < sweep.xi.size(); ++i)
    for (const Complex& l : sweep.eigs[i]) {
      std::snprintf(line, sizeof line, "%.10g %.12e %.12e\n", sweep.xi[i],
                    l.real(), l.imag());
      f << line;
    }
  std::printf("hill: N=%d convergence=%.3e max Re=%.6e%s%s\n", sweep.N,
              sweep.convergence, hill_max_real(sweep),
              sweep.warning.empty() ? "" : " warning: ",
              sweep.warning.c_str());
  return 0;
}

int cmd_evolve(const Global& g, const std::string& family, double eps,
               double X, double q, double omega, int cells, int ppc, double T,
               double dt, int snapshots, const std::string& perturb) {
  EvolutionRun run;
  run.base = build_wave(g, family, eps, X, q, omega);
  run.n_cells = cells;
  run.pts_per_cell = ppc;
  run.t_end = T;
  run.dt = dt;
  run.snapshots = snapshots;
  if (perturb.rfind("gaussian:", 0) == 0) {
    run.perturb.kind = Perturbation::Kind::gaussian;
    run.perturb.amplitude = std::stod(perturb.substr(9));
  } else if (perturb.rfind("bloch:", 0) == 0) {
    const auto c = perturb.find(':', 6);
    run.perturb.kind = Perturbation::Kind::bloch_mode;
    run.perturb.amplitude = std::stod(perturb.substr(6, c - 6));
    run.perturb.bloch_index = std::stoi(perturb.substr(c + 1));
  } else if (perturb != "none") {
    throw CLI::ValidationError("--perturb", "none | gaussian:AMP | bloch:AMP:IDX");
  }
  EvolutionResult res = evolve(run);
  const std::string dir = g.out.empty() ? "run" : g.out;
  std::filesystem::create_directories(dir);
  char name[64];
  for (std::size_t s = 0; s < res.snapshots.size(); ++s) {
    std::snprintf(name, sizeof name, "%s/snap_%04zu.dat", dir.c_str(), s);
    std::ofstream f(name);
    f << config_header(g.argv);
    f << "# t = " << res.snapshots[s].t << "; columns: x u\n";
    char line[80];
    for (int j = 0; j < res.grid; ++j) {
      std::snprintf(line, sizeof line, "%.10e %.14e\n", res.domain * j / res.grid,
                    res.snapshots[s].u[j]);
      f << line;
    }
  }
  ExtremaTracks tr = track_extrema(res);
  {
    std::ofstream f(dir + "/tracks.dat");
    f << config_header(g.argv);
    f << "# columns: t x_1 x_2 ...\n";
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
      f << tr.times[s];
      for (const auto& track : tr.position) f << ' ' << track[s];
      f << '\n';
    }
  }
  std::printf("evolve: grid=%d domain=%.6g mass_drift=%.3e%s\n", res.grid,
              res.domain, res.max_mass_drift,
              res.blew_up ? " BLEW UP" : "");
  return res.blew_up ? 1 : 0;
}

int cmd_sweep(const Global& g, SweepSpec spec) {
  spec.factory.cache_dir = g.cache_dir;
  spec.jobs = g.jobs;
  if (spec.out_dir.empty()) spec.out_dir = g.out.empty() ? "sweep_out" : g.out;
  SweepResult res = run_sweep(spec);
  int stable = 0, bad = 0;
  for (const auto& r : res.rows) {
    stable += r.ok && r.outcome == Outcome::stable;
    bad += !r.ok;
  }
  std::printf("sweep %s: %zu points (%d new), %d stable, %d failed -> %s\n",
              study_name(spec.study), res.rows.size(), res.computed, stable,
              bad, res.table_path.c_str());
  return 0;
}

int cmd_bench(const Global& g) {
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  FactoryOpts fo;
  fo.cache_dir = g.cache_dir;
  auto t0 = clock::now();
  WaveProfile w = gks_wave(0.0, 6.3, 6.0, fo);
  auto t1 = clock::now();
  EvansSolver solver(linearized_symbol(w), {g.tol_abs, g.tol_rel});
  DProvider low = solver.provider(EvansVariant::lifted_unscaled);
  DProvider scaled = solver.provider(EvansVariant::lifted_scaled);
  HighFrequencyBound hf = hf_radius(w);
  ContourWorker g0(Contour::gamma0(1.0, hf.R0), scaled);
  for (int j = 0; j <= 100; ++j)
    g0.winding(Complex(-std::numbers::pi / 6.3 +
                           2 * std::numbers::pi / 6.3 * j / 100.0,
                       0.0));
  auto t2 = clock::now();
  CriticalCoeffs c = taylor_coeffs(low, Family::gks);
  CriticalExpansion e = critical_modes(c, Family::gks);
  auto t3 = clock::now();
  const double minb =
      std::min(std::abs(e.beta[0].real()), std::abs(e.beta[1].real()));
  K0Selection k0 = select_k0(low, 0.5, 2.0, minb);
  auto t4 = clock::now();
  ContourWorker g1(Contour::gamma1(hf.R0), scaled);
  for (int j = 0; j <= 100; ++j)
    g1.winding(Complex(k0.k0 + (std::numbers::pi / 6.3 - k0.k0) * j / 100.0,
                       0.0));
  auto t5 = clock::now();
  const double shift = 2.0 * minb * k0.k0 * k0.k0;
  ContourWorker gt(Contour::shifted_semicircle(shift, 2.0, shift), scaled);
  for (int j = 0; j <= 100; ++j)
    gt.winding(Complex(-k0.k0 + 2 * k0.k0 * j / 100.0, 0.0));
  auto t6 = clock::now();
  std::printf("bench (q=6 wave, 101-point xi grids):\n");
  std::printf("  profile construction   %8.2f s\n", secs(t0, t1));
  std::printf("  Gamma0 winding sweep   %8.2f s\n", secs(t1, t2));
  std::printf("  Taylor coefficients    %8.2f s\n", secs(t2, t3));
  std::printf("  moment bound M, k0     %8.2f s\n", secs(t3, t4));
  std::printf("  Gamma1 winding sweep   %8.2f s\n", secs(t4, t5));
  std::printf("  near-origin winding    %8.2f s\n", secs(t5, t6));
  return 0;
}

}  // namespace

std::string config_header(const std::vector<std::string>& argv) {
  std::string s = "# twave ";
  s += kVersion;
  s += "\n# config:";
  for (const auto& a : argv) {
    s += ' ';
    s += a;
  }
  s += '\n';
  return s;
}

int dispatch(const std::vector<std::string>& argv) {
  CLI::App app{"periodic traveling-wave stability toolkit"};
  app.set_config("--config");
  Global g;
  g.argv = argv;
  app.add_option("--cache-dir", g.cache_dir, "profile cache directory");
  app.add_option("--seed", g.seed, "spot-check selection seed (recorded)");
  app.add_option("--jobs", g.jobs, "worker count for sweeps")
      ->check(CLI::PositiveNumber);
  app.add_option("--tol-abs", g.tol_abs, "Evans ODE absolute tolerance");
  app.add_option("--tol-rel", g.tol_rel, "Evans ODE relative tolerance");

  std::string family = "gks";
  double eps = 0.0, X = 6.3, q = 5.0, omega = 0.0;
  auto add_wave_flags = [&](CLI::App* cmd, bool need_q) {
    cmd->add_option("--family", family, "gks | gks-tf | sh");
    cmd->add_option("--eps", eps, "dispersion (gKS) or sqrt(r) (SH)");
    cmd->add_option("--X", X, "period")->check(CLI::PositiveNumber);
    auto* qo = cmd->add_option("--q", q, "gKS integration constant");
    if (need_q) qo->check(CLI::PositiveNumber);
    cmd->add_option("--omega", omega, "SH roll parameter");
    cmd->add_option("--out", g.out, "output file or directory");
  };

  auto* prof = app.add_subcommand("profile", "construct and cache a wave");
  add_wave_flags(prof, true);

  auto* verify = app.add_subcommand("verify", "run the stability verdict");
  add_wave_flags(verify, true);
  VerifyOpts vo;
  verify->add_option("--r0", vo.r0, "inner contour radius");
  verify->add_option("--xi-points", vo.xi_points, "Bloch grid size");
  verify->add_option("--emit-evidence", vo.evidence_dir,
                     "directory for contour dumps");
  bool economy = false;
  verify->add_flag("--economy", economy, "coarser sweep-scale grids");

  auto* hill = app.add_subcommand("hill", "Floquet-Bloch eigenvalue cloud");
  add_wave_flags(hill, true);
  int modes = 32, hill_xi = 200;
  hill->add_option("--modes", modes, "Fourier truncation")
      ->check(CLI::Range(4, 256));
  hill->add_option("--xi-points", hill_xi, "Bloch grid size");

  auto* evo = app.add_subcommand("evolve", "pseudospectral time evolution");
  add_wave_flags(evo, true);
  int cells = 40, ppc = 64, snaps = 51;
  double T = 50.0, dt = 1e-3;
  std::string perturb = "gaussian:0.1";
  evo->add_option("--cells", cells, "periods tiled")->check(CLI::PositiveNumber);
  evo->add_option("--ppc", ppc, "grid points per cell");
  evo->add_option("--T", T, "final time")->check(CLI::PositiveNumber);
  evo->add_option("--dt", dt, "time step")->check(CLI::PositiveNumber);
  evo->add_option("--snapshots", snaps, "snapshot count");
  evo->add_option("--perturb", perturb, "none | gaussian:AMP | bloch:AMP:IDX");

  auto* sw = app.add_subcommand("sweep", "parameter studies");
  std::string study;
  std::string eps_r = "0", X_r = "6.3", q_r = "4.5:7.1:0.1",
              omega_r = "0:0.45:0.05";
  double delta_kdv = 0.1;
  int max_points = -1;
  sw->add_option("--study", study, "fixed_eps | thin_film | kdv_limit | sh_boundary")
      ->required();
  sw->add_option("--eps", eps_r, "eps or eps range a:b:step");
  sw->add_option("--X", X_r, "X or X range");
  sw->add_option("--q", q_r, "q range (fixed_eps)");
  sw->add_option("--omega", omega_r, "omega range (sh_boundary)");
  sw->add_option("--delta", delta_kdv, "delta (kdv_limit)");
  sw->add_option("--out", g.out, "output directory");
  sw->add_option("--max-points", max_points, "stop after N new points");
  bool sweep_econ = true;
  sw->add_flag("!--full-grids", sweep_econ, "use the full 1000-point grids");

  auto* bench = app.add_subcommand("bench", "stage timing report");
  (void)bench;

  app.require_subcommand(1);

  std::vector<const char*> cargs;
  cargs.push_back("twave");
  for (const auto& a : argv) cargs.push_back(a.c_str());
  try {
    app.parse(int(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    vo.evans_tol = OdeTol{g.tol_abs, g.tol_rel};
    if (economy) {
      const VerifyOpts keep = vo;
      vo = VerifyOpts::economy();
      vo.r0 = keep.r0;
      vo.evidence_dir = keep.evidence_dir;
      vo.evans_tol = keep.evans_tol;
    }
    if (app.got_subcommand(prof))
      return cmd_profile(g, family, eps, X, q, omega);
    if (app.got_subcommand(verify))
      return cmd_verify(g, family, eps, X, q, omega, vo);
    if (app.got_subcommand(hill))
      return cmd_hill(g, family, eps, X, q, omega, modes, hill_xi);
    if (app.got_subcommand(evo))
      return cmd_evolve(g, family, eps, X, q, omega, cells, ppc, T, dt, snaps,
                        perturb);
    if (app.got_subcommand(sw)) {
      SweepSpec spec;
      if (study == "fixed_eps") spec.study = Study::gks_fixed_eps;
      else if (study == "thin_film") spec.study = Study::gks_thin_film;
      else if (study == "kdv_limit") spec.study = Study::gks_kdv_limit;
      else if (study == "sh_boundary") spec.study = Study::sh_boundary;
      else {
        std::fprintf(stderr, "unknown study %s\n", study.c_str());
        return 2;
      }
      spec.eps = parse_range(eps_r).from;
      spec.eps_grid = parse_range(eps_r);
      spec.X = parse_range(X_r).from;
      spec.X_grid = parse_range(X_r);
      spec.q = parse_range(q_r);
      spec.omega = parse_range(omega_r);
      spec.delta = delta_kdv;
      spec.max_points = max_points;
      spec.verify = sweep_econ ? VerifyOpts::economy() : VerifyOpts{};
      return cmd_sweep(g, spec);
    }
    if (app.got_subcommand(bench)) return cmd_bench(g);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
  return dispatch(args);
}

}  // namespace twave
