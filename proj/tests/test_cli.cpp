#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mildsim/config.hpp"
#include "mildsim/runner.hpp"

using namespace mildsim;
using namespace mildsim::cli;
namespace fs = std::filesystem;

namespace {

const char* const kSmall = R"(equation:
  operator: dirichlet_laplacian
  n: 7
  f: [0, 1, 0, 1]
  alpha: 1
  u0_modes: [1, 0.5]
  noise:
    q: [1, 0.25]
    b: [0.3, 0.3]
  jumps:
    weights: [0.5]
    shift_modes: [[0.1]]
experiment:
  seed: 5
  run: [coupling, contraction]
  coupling:
    dts: [0.03125, 0.015625, 0.0078125, 0.00390625]
    min_order: 0.5
  contraction:
    u0_a_modes: [1]
    u0_b_modes: [-1]
    ensemble: 50
    dt: 0.015625
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mildsim-test-cli-" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string config_error(const std::string& text) {
  try {
    (void)parse_config_text(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

/// Numeric rows of a plot file.
std::vector<std::vector<double>> plot_rows(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream fields(line);
    std::vector<double> row;
    double v = 0.0;
    while (fields >> v) {
      row.push_back(v);
    }
    rows.push_back(row);
  }
  return rows;
}

int exit_code(const std::string& command) {
  const int status = std::system((command + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("the minimal shipped config parses with defaults") {
  const RunConfig c = parse_config(fs::path(MILDSIM_SOURCE_DIR) / "configs/minimal.cfg");
  REQUIRE(c.equations.size() == 1);
  CHECK(c.equations[0].name == "base");
  CHECK(c.equations[0].spec.dim() == 4);
  CHECK(c.equations[0].spec.T == 1.0);
  CHECK(c.equations[0].spec.G.marks().total_mass() == 0.0);
  CHECK(c.seed == 1);
  CHECK(c.output_directory == "mildsim-out");
  CHECK(c.plots);
  REQUIRE(c.experiments.size() == 1);
  CHECK(c.experiments[0].name == "resolvent_algebra");
}

TEST_CASE("the acceptance config parses with every variant") {
  const RunConfig c = parse_config(fs::path(MILDSIM_SOURCE_DIR) / "configs/cubic-rd.cfg");
  std::vector<std::string> names;
  for (const auto& e : c.equations) {
    names.push_back(e.name);
  }
  CHECK(names == std::vector<std::string>{"base", "linear", "energy", "dissipative", "perturbed", "weak"});
  CHECK(c.equation("linear").spec.G.marks().total_mass() == 0.0);
  CHECK(c.equation("dissipative").margin.margin >= 0.0);
  CHECK(c.experiments.size() == known_experiments().size());
}

TEST_CASE("variants inherit scalars and replace groups") {
  const std::string text = std::string(kSmall) + "variants:\n  v:\n    n: 5\n    noise:\n      q: [2]\n";
  const RunConfig c = parse_config_text(text, "t.cfg");
  const auto& v = c.equation("v").spec;
  CHECK(v.dim() == 5);
  CHECK(v.F.f.coefficients() == c.equation("base").spec.F.f.coefficients());
  CHECK(v.B.q().size() == 1);
  CHECK(v.G.marks().size() == 1);
}

TEST_CASE("config errors name the key and the line") {
  SUBCASE("negative covariance weight") {
    const std::string e = config_error(replace(kSmall, "q: [1, 0.25]", "q: [1, -0.25]"));
    CHECK(contains(e, "t.cfg:8:"));
    CHECK(contains(e, "noise.q[1]"));
  }
  SUBCASE("unknown key") {
    const std::string e = config_error(replace(kSmall, "  alpha: 1\n", "  alpha: 1\n  gamma: 2\n"));
    CHECK(contains(e, "t.cfg:6:"));
    CHECK(contains(e, "gamma"));
    CHECK(contains(e, "unknown key"));
  }
  SUBCASE("unknown experiment") {
    CHECK(contains(config_error(replace(kSmall, "run: [coupling,", "run: [bogus, coupling,")), "unknown experiment"));
  }
  SUBCASE("duplicate key") {
    const std::string e = config_error(replace(kSmall, "  alpha: 1\n", "  alpha: 1\n  alpha: 2\n"));
    CHECK(contains(e, "t.cfg:6:"));
    CHECK(contains(e, "duplicate key"));
  }
  SUBCASE("experiment listed twice") {
    CHECK(contains(config_error(replace(kSmall, "run: [coupling,", "run: [coupling, coupling,")), "listed twice"));
  }
  SUBCASE("non-dyadic refinement") {
    const std::string e = config_error(replace(kSmall, "0.0078125, 0.00390625]", "0.01, 0.00390625]"));
    CHECK(contains(e, "experiment.coupling.dts"));
  }
  SUBCASE("missing seed") {
    CHECK(contains(config_error(replace(kSmall, "  seed: 5\n", "")), "experiment.seed"));
  }
  SUBCASE("malformed syntax") {
    CHECK(contains(config_error(replace(kSmall, "f: [0, 1, 0, 1]", "f: [0, 1, 0, 1")), "parse error"));
  }
  SUBCASE("mode count exceeds the dimension") {
    CHECK(contains(config_error(replace(kSmall, "u0_modes: [1, 0.5]", "u0_modes: [1, 1, 1, 1, 1, 1, 1, 1]")),
                   "u0_modes"));
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)parse_config("/nonexistent/mildsim.cfg"), ConfigError);
  }
}

TEST_CASE("an empty run writes only the manifest") {
  const fs::path dir = scratch("empty");
  const RunConfig c = parse_config_text(replace(kSmall, "run: [coupling, contraction]", "run: []"), "t.cfg");
  RunOptions options;
  options.output = dir;
  const RunResult r = run(c, options);
  CHECK(r.exit_status == 0);
  CHECK(r.artifacts == std::vector<std::string>{"manifest.txt"});
  const std::string manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.rfind("# mildsim manifest v1\n", 0) == 0);
  CHECK(contains(manifest, "exit_status 0\n"));
  CHECK(contains(manifest, "--- config ---\n" + c.text));
  fs::remove_all(dir);
}

TEST_CASE("runs are byte-for-byte reproducible and plots agree with reports") {
  const RunConfig c = parse_config_text(kSmall, "t.cfg");
  const fs::path d1 = scratch("repro1");
  const fs::path d2 = scratch("repro2");
  RunOptions options;
  options.output = d1;
  const RunResult r1 = run(c, options);
  options.output = d2;
  const RunResult r2 = run(c, options);
  CHECK(r1.exit_status == 0);
  REQUIRE(r1.artifacts == r2.artifacts);
  CHECK(r1.artifacts.back() == "manifest.txt");
  for (const auto& f : r1.artifacts) {
    CHECK_MESSAGE(slurp(d1 / f) == slurp(d2 / f), f);
  }

  const auto coupling = plot_rows(d1 / "coupling.log_gap.dat");
  REQUIRE(coupling.size() == 4);
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < coupling.size(); ++i) {
    REQUIRE(coupling[i].size() == 3);
    if (i > 0) {
      CHECK(coupling[i][0] > coupling[i - 1][0]);
      CHECK(coupling[i][1] > coupling[i - 1][1]);
    }
    sx += coupling[i][0];
    sy += coupling[i][1];
  }
  sx /= 4.0;
  sy /= 4.0;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& row : coupling) {
    sxy += (row[0] - sx) * (row[1] - sy);
    sxx += (row[0] - sx) * (row[0] - sx);
  }
  const Record* order = r1.report("coupling")->find("order");
  REQUIRE(order != nullptr);
  CHECK(std::abs(sxy / sxx - order->value) < 1e-9);

  const auto gap = plot_rows(d1 / "contraction.log_mean_sq_gap.dat");
  const auto& spec = c.equation("base").spec;
  const Vector diff = from_modes(spec.A, {1.0}) - from_modes(spec.A, {-1.0});
  CHECK(gap.front()[0] == 0.0);
  CHECK(gap.front()[1] == doctest::Approx(std::log(spec.space().norm_squared(diff))).epsilon(1e-12));

  const std::string report = slurp(d1 / "coupling.report.tsv");
  CHECK(report.rfind("# mildsim report v1\n# experiment coupling\n# parameters seed=5;equation=base;", 0) == 0);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("seed override and experiment selection are recorded") {
  const RunConfig c = parse_config_text(kSmall, "t.cfg");
  const fs::path dir = scratch("override");
  RunOptions options;
  options.output = dir;
  options.seed = 77;
  options.only = {"contraction"};
  const RunResult r = run(c, options);
  CHECK(r.outcomes.size() == 1);
  CHECK(r.report("coupling") == nullptr);
  const std::string manifest = slurp(dir / "manifest.txt");
  CHECK(contains(manifest, "\nseed 77\n"));
  CHECK(contains(manifest, "\nseed_override 77\n"));
  CHECK(contains(manifest, "\nonly contraction\n"));
  CHECK(contains(slurp(dir / "contraction.report.tsv"), "# parameters seed=77;"));
  options.only = {"weak_residual"};
  CHECK_THROWS_AS((void)run(c, options), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("a failed experiment sets exit status 1") {
  const RunConfig c = parse_config_text(replace(kSmall, "min_order: 0.5", "min_order: 5"), "t.cfg");
  const fs::path dir = scratch("fail");
  RunOptions options;
  options.output = dir;
  const RunResult r = run(c, options);
  CHECK(r.exit_status == 1);
  CHECK(r.report("coupling")->verdict == Verdict::fail);
  CHECK(contains(slurp(dir / "manifest.txt"), "verdict FAIL"));
  fs::remove_all(dir);
}

TEST_CASE("an aborted run leaves no partial outputs") {
  const RunConfig c = parse_config_text(replace(kSmall, "alpha: 1", "alpha: 0"), "t.cfg");
  const fs::path dir = scratch("abort");
  RunOptions options;
  options.output = dir;
  CHECK_THROWS_AS((void)run(c, options), std::invalid_argument);
  CHECK(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST_CASE("a refused hypothesis is reported as inconclusive") {
  const RunConfig c = parse_config_text(replace(kSmall, "f: [0, 1, 0, 1]", "f: [0, -3]"), "t.cfg");
  const ExperimentReport r = run_experiment(c, c.experiments[1], c.seed);
  CHECK(r.verdict == Verdict::inconclusive);
  REQUIRE(!r.notes.empty());
  CHECK(contains(r.notes.front(), "refused"));
}

TEST_CASE("command line exit codes") {
  const std::string cli = MILDSIM_CLI;
  const fs::path dir = scratch("process");
  const std::string config = (fs::path(MILDSIM_SOURCE_DIR) / "configs/minimal.cfg").string();
  CHECK(exit_code(cli + " -c " + config + " -o " + dir.string()) == 0);
  CHECK(fs::exists(dir / "manifest.txt"));
  CHECK(exit_code(cli + " -c " + config + " -o " + dir.string() + " --only nothing") == 2);
  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "equation:\n  operator: nope\n";
  CHECK(exit_code(cli + " -c " + bad.string() + " -o " + dir.string()) == 2);
  CHECK(exit_code(cli + " -o " + dir.string()) != 0);
  fs::remove_all(dir);
}
