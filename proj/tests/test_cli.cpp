#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "twave/cli.hpp"

using namespace twave;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream f(path);
  return std::string(std::istreambuf_iterator<char>(f), {});
}
}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(dispatch({"verify", "--family", "gks", "--q", "-1"}) == 2);
  CHECK(dispatch({"sweep"}) == 2);
  CHECK(dispatch({"no-such-command"}) == 2);
  CHECK(dispatch({"verify", "--family", "nope", "--q", "5"}) == 2);
}

TEST_CASE("profile subcommand builds and caches") {
  CHECK(dispatch({"profile", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--out", "cli_test/profile.dat"}) == 0);
  CHECK(std::filesystem::exists("twave_cache/gks_gamma_one_eps0_X6.3_v5.prof"));
  const std::string dump = slurp("cli_test/profile.dat");
  CHECK(dump.find("# twave") == 0);
  CHECK(dump.find("# config:") != std::string::npos);
  CHECK(dump.find("columns: x u") != std::string::npos);
}

TEST_CASE("verify subcommand emits the verdict record") {
  CHECK(dispatch({"verify", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--economy", "--out", "cli_test/verdict.txt"}) ==
        0);
  const std::string rec = slurp("cli_test/verdict.txt");
  CHECK(rec.find("outcome: stable") != std::string::npos);
  CHECK(rec.find("columns: q delta alpha1 alpha2 beta1 beta2") !=
        std::string::npos);
}

TEST_CASE("hill subcommand writes the cloud") {
  CHECK(dispatch({"hill", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--modes", "24", "--xi-points", "9", "--out",
                  "cli_test/cloud.csv"}) == 0);
  const std::string cloud = slurp("cli_test/cloud.csv");
  CHECK(cloud.find("columns: xi Re(lambda) Im(lambda)") != std::string::npos);
}

TEST_CASE("outputs are reproducible byte for byte") {
  CHECK(dispatch({"hill", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--modes", "16", "--xi-points", "5", "--out",
                  "cli_test/a.csv"}) == 0);
  CHECK(dispatch({"hill", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--modes", "16", "--xi-points", "5", "--out",
                  "cli_test/b.csv"}) == 0);
  std::string a = slurp("cli_test/a.csv"), b = slurp("cli_test/b.csv");
  // identical apart from the differing --out in the recorded config line
  a.erase(a.find("a.csv"), 5);
  b.erase(b.find("b.csv"), 5);
  CHECK(a == b);
}

TEST_CASE("evolve subcommand writes snapshots and tracks") {
  CHECK(dispatch({"evolve", "--family", "gks", "--eps", "0", "--X", "6.3",
                  "--q", "5", "--cells", "8", "--T", "1", "--dt", "0.002",
                  "--snapshots", "3", "--perturb", "gaussian:0.05", "--out",
                  "cli_test/run"}) == 0);
  CHECK(std::filesystem::exists("cli_test/run/snap_0000.dat"));
  CHECK(std::filesystem::exists("cli_test/run/snap_0002.dat"));
  CHECK(std::filesystem::exists("cli_test/run/tracks.dat"));
  CHECK(dispatch({"evolve", "--family", "gks", "--q", "5", "--perturb",
                  "what:1"}) == 2);
}
