#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/FFT>

#include <cmath>

#include "fixtures.hpp"
#include "twave/evolve.hpp"
#include "twave/hill.hpp"

using namespace twave;

namespace {

EvolutionRun small_run(const WaveProfile& base) {
  EvolutionRun run;
  run.base = base;
  run.n_cells = 16;
  run.pts_per_cell = 64;
  run.dt = 2e-3;
  run.t_end = 10.0;
  run.snapshots = 21;
  return run;
}

}  // namespace

TEST_CASE("unperturbed stable tiling stays put; mass is conserved") {
  EvolutionRun run = small_run(twf::q5_eps0());
  EvolutionResult res = evolve(run);
  REQUIRE(!res.blew_up);
  const Eigen::VectorXd diff = res.snapshots.back().u - res.snapshots[0].u;
  MESSAGE("steady drift: ", diff.cwiseAbs().maxCoeff(), ", mass drift: ",
          res.max_mass_drift);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(res.max_mass_drift < 1e-8 * res.domain);
}

TEST_CASE("gaussian-perturbed run conserves mass") {
  EvolutionRun run = small_run(twf::q5_eps0());
  run.perturb.kind = Perturbation::Kind::gaussian;
  run.perturb.amplitude = 0.1;
  run.t_end = 6.0;
  EvolutionResult res = evolve(run);
  CHECK(res.max_mass_drift < 1e-8 * res.domain);
  // The perturbation leaves the 2/3-truncated tail exactly empty by
  // construction; spot the spectrum of the last snapshot.
  Eigen::FFT<double> fft;
  Eigen::VectorXcd uh(res.grid);
  Eigen::VectorXcd in = res.snapshots.back().u.cast<Complex>();
  fft.fwd(uh, in);
  CHECK(std::isfinite(uh.cwiseAbs().maxCoeff()));
}

TEST_CASE("dt precondition") {
  EvolutionRun run = small_run(twf::q5_eps0());
  run.dt = 0.5;
  CHECK_THROWS_AS(evolve(run), EvolveError);
}

TEST_CASE("tracks on frozen snapshots are exactly constant") {
  EvolutionResult res;
  res.grid = 256;
  res.domain = 8.0 * 6.3;
  Eigen::VectorXd u(256);
  for (int j = 0; j < 256; ++j)
    u[j] = std::cos(2.0 * M_PI * 8.0 * j / 256.0);
  for (int s = 0; s < 5; ++s) res.snapshots.push_back({double(s), u});
  ExtremaTracks tr = track_extrema(res);
  REQUIRE(tr.position.size() == 16);  // 8 peaks + 8 troughs
  for (const auto& track : tr.position)
    for (double x : track) CHECK(std::abs(x - track.front()) < 1e-8);
}

TEST_CASE("track termination when extrema merge") {
  EvolutionResult res;
  res.grid = 512;
  res.domain = 2.0 * M_PI;
  for (int s = 0; s <= 10; ++s) {
    const double a = 1.0 - 0.12 * s;  // second harmonic fades away
    Eigen::VectorXd u(512);
    for (int j = 0; j < 512; ++j) {
      const double x = 2.0 * M_PI * j / 512.0;
      u[j] = std::cos(x) + a * std::cos(2.0 * x);
    }
    res.snapshots.push_back({double(s), u});
  }
  ExtremaTracks tr = track_extrema(res);
  bool terminated = false;
  for (bool t : tr.terminated) terminated |= t;
  CHECK(terminated);
}

TEST_CASE("co-moving frame consistency") {
  const double c0 = 0.8;
  EvolutionRun lab = small_run(twf::q5_eps0());
  lab.perturb.kind = Perturbation::Kind::gaussian;
  lab.perturb.amplitude = 0.05;
  lab.t_end = 10.0;
  EvolutionRun frame = lab;
  frame.frame_speed = c0;
  EvolutionResult rl = evolve(lab);
  EvolutionResult rf = evolve(frame);
  // Shift the frame result back by -c0 T spectrally and compare.
  const int M = rl.grid;
  Eigen::FFT<double> fft;
  Eigen::VectorXcd uh(M);
  Eigen::VectorXcd in = rf.snapshots.back().u.cast<Complex>();
  fft.fwd(uh, in);
  for (int j = 0; j < M; ++j) {
    const int idx = j <= M / 2 ? j : j - M;
    const double k = 2.0 * M_PI * idx / rl.domain;
    uh[j] *= std::exp(Complex(0.0, -k * c0 * lab.t_end));
  }
  Eigen::VectorXcd back(M);
  fft.inv(back, uh);
  const double err =
      (back.real() - rl.snapshots.back().u).cwiseAbs().maxCoeff();
  MESSAGE("frame consistency error: ", err);
  CHECK(err < 1e-6);
}

TEST_CASE("linear regime matches the Hill eigenvalue") {
  const WaveProfile& w = twf::q5_eps0();
  EvolutionRun run = small_run(w);
  run.perturb.kind = Perturbation::Kind::bloch_mode;
  run.perturb.amplitude = 1e-6;
  run.perturb.bloch_index = 4;
  run.t_end = 4.0;
  run.snapshots = 41;
  EvolutionResult res = evolve(run);

  const double xi = 2.0 * M_PI * 4.0 / res.domain;
  std::vector<Complex> eig = hill_eigenvalues(w, xi, 32);
  double want = -1e300;
  for (const Complex& l : eig) want = std::max(want, l.real());

  // Project u - clean tiling onto the Bloch-xi subspace (bins = 4 mod 16).
  Eigen::VectorXd tiled(res.grid);
  for (int j = 0; j < res.grid; ++j)
    tiled[j] = profile_value(w, res.domain * j / res.grid);
  Eigen::FFT<double> fft;
  auto pnorm = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXcd uh(res.grid);
    Eigen::VectorXcd in = (u - tiled).cast<Complex>();
    fft.fwd(uh, in);
    double s = 0.0;
    for (int j = 4; j < res.grid; j += 16) s += std::norm(uh[j]);
    return std::sqrt(s);
  };
  // log-linear fit over the second half of the window
  std::vector<double> ts, ln;
  for (std::size_t s = 10; s < res.snapshots.size(); ++s) {
    ts.push_back(res.snapshots[s].t);
    ln.push_back(std::log(pnorm(res.snapshots[s].u)));
  }
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ln[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ln[i];
  }
  const double n = double(ts.size());
  const double rate = (n * sty - st * sy) / (n * stt - st * st);
  MESSAGE("measured rate ", rate, " vs Hill ", want);
  CHECK(std::abs(rate - want) < 0.05 * std::abs(want));
}

TEST_CASE("packet speed measurement on synthetic data") {
  EvolutionResult run, clean;
  run.grid = clean.grid = 512;
  run.domain = clean.domain = 100.0;
  for (int s = 0; s <= 20; ++s) {
    const double t = 0.5 * s;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(512);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(512);
    for (int j = 0; j < 512; ++j) {
      const double x = 100.0 * j / 512.0;
      u[j] = std::exp(-0.5 * std::pow(x - 50.0 - 2.0 * t, 2.0)) +
             std::exp(-0.5 * std::pow(x - 50.0 + 2.0 * t, 2.0));
    }
    run.snapshots.push_back({t, u});
    clean.snapshots.push_back({t, z});
  }
  PacketSpeeds sp = packet_speeds(run, clean, 2.0);
  CHECK(sp.right == doctest::Approx(2.0).epsilon(0.01));
  CHECK(sp.left == doctest::Approx(-2.0).epsilon(0.01));
}

TEST_CASE("Whitham characteristics against the Evans expansion") {
  const WaveProfile& w = twf::q5_eps0();
  ContinuationBranch br = k_branch(w);
  REQUIRE(br.complete);
  WhithamPrediction pred = whitham_prediction(br, w);
  MESSAGE("whitham speeds: ", pred.speeds[0], ", ", pred.speeds[1],
          "; evans: ", pred.evans_speeds[0], ", ", pred.evans_speeds[1]);
  // Zero-speed symmetric family: m(k) = 0 and the characteristics pair up.
  CHECK(std::abs(pred.mean_zero_speed) < 1e-6);
  REQUIRE(pred.speeds.size() == 2);
  CHECK(std::abs(pred.speeds[0] + pred.speeds[1]) <
        0.02 * std::abs(pred.speeds[0]));
  CHECK(pred.k_h_prime > 0.0);
  // Cross-method agreement within 5%.
  for (double a : pred.speeds) {
    double best = 1e300;
    for (double e : pred.evans_speeds) best = std::min(best, std::abs(a - e));
    CHECK(best < 0.05 * std::abs(a));
  }
}

TEST_CASE("hyperbolicity indicator flips across the lower boundary") {
  WaveProfile w43 =
      continue_branch(twf::q5_eps0(), {"q", 4.3, 4.3, 0.1}).back();
  WhithamPrediction lo = whitham_prediction(k_branch(w43), w43);
  MESSAGE("k H'(k) at q=4.3: ", lo.k_h_prime);
  CHECK(lo.k_h_prime < 0.0);
  CHECK(lo.speeds.empty());  // complex characteristics
}

TEST_CASE("backward-diffusive wave train: growing cell bouncing") {
  // Above the upper boundary the local wavenumber amplifies: neighbor
  // spacing oscillations of the tracked crests grow over the window.
  WaveProfile w10 = twave::gks_wave(0.0, 6.3, 10.0);
  EvolutionRun run = small_run(w10);
  run.t_end = 60.0;
  run.dt = 1.5e-3;
  run.snapshots = 61;
  run.perturb.kind = Perturbation::Kind::gaussian;
  run.perturb.amplitude = 0.1;
  EvolutionResult res = evolve(run);
  REQUIRE(!res.blew_up);
  ExtremaTracks tr = track_extrema(res);
  // standard deviation of neighbor crest spacings at one snapshot
  auto spacing_spread = [&](std::size_t s) {
    std::vector<double> xs;
    for (std::size_t i = 0; i < tr.position.size(); ++i)
      if (tr.is_peak[i] && std::isfinite(tr.position[i][s]))
        xs.push_back(tr.position[i][s]);
    std::sort(xs.begin(), xs.end());
    REQUIRE(xs.size() >= 3);
    double mean = 0.0, var = 0.0;
    std::vector<double> gaps;
    for (std::size_t i = 1; i < xs.size(); ++i)
      gaps.push_back(xs[i] - xs[i - 1]);
    for (double g : gaps) mean += g;
    mean /= gaps.size();
    for (double g : gaps) var += (g - mean) * (g - mean);
    return std::sqrt(var / gaps.size());
  };
  const double s5 = spacing_spread(5);
  const double s15 = spacing_spread(15);
  const double s30 = spacing_spread(30);
  const double late = spacing_spread(tr.times.size() - 1);
  MESSAGE("crest-spacing spread: ", s5, " -> ", s15, " -> ", s30, " -> ",
          late);
  CHECK(s5 < 0.2);
  CHECK(s15 > s5);
  CHECK(s30 > s15);
  CHECK(late > 10.0 * s5);
}

TEST_CASE("stable wave train: tracked crests settle to phase shifts") {
  EvolutionRun run = small_run(twf::q5_eps0());
  run.n_cells = 24;
  run.t_end = 30.0;
  run.snapshots = 31;
  run.perturb.kind = Perturbation::Kind::gaussian;
  run.perturb.amplitude = 0.05;
  EvolutionResult res = evolve(run);
  ExtremaTracks tr = track_extrema(res);
  // Crests near the perturbation center: most displacement happens early,
  // the last third adds little (the packet has moved on).
  const double mid = 0.5 * res.domain;
  int checked = 0;
  for (std::size_t i = 0; i < tr.position.size(); ++i) {
    if (!tr.is_peak[i] || tr.terminated[i]) continue;
    if (std::abs(tr.position[i][0] - mid) > 2.5 * 6.3) continue;
    const double total =
        std::abs(tr.position[i].back() - tr.position[i].front());
    const double late = std::abs(tr.position[i].back() -
                                 tr.position[i][2 * tr.times.size() / 3]);
    if (total < 1e-4) continue;
    CHECK(late < 0.3 * total + 1e-4);
    ++checked;
  }
  CHECK(checked >= 3);
}

TEST_CASE("scaling probe reports no growth inside the stable band") {
  std::vector<WaveProfile> fam = {twf::q5_eps0()};
  fam.push_back(continue_branch(twf::q5_eps0(), {"q", 5.5, 5.5, 0.25}).back());
  fam.push_back(continue_branch(twf::q5_eps0(), {"q", 6.0, 6.0, 0.25}).back());
  ScalingProbe probe = boundary_scaling_probe(fam, {0.5, 1.0, 1.5}, 32, 100);
  CHECK(probe.no_growth);
  CHECK_THROWS_AS(
      boundary_scaling_probe({twf::q5_eps0()}, {1.0}, 32, 50),
      EvolveError);
}
