// Acceptance suite: runs configs/cubic-rd.cfg twice and checks criteria 1-11
// against the produced reports. Prints one line per criterion; exit 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mildsim/config.hpp"
#include "mildsim/runner.hpp"

using namespace mildsim;
using namespace mildsim::cli;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kAlgebraTolerance = 1e-9;
constexpr double kYosidaFormFloor = -1e-12;
constexpr double kSlopeMin = 0.9;
constexpr double kSlopeMax = 1.1;
constexpr double kIsometryRelative = 0.05;
constexpr double kStandardErrors = 3.0;
constexpr double kRegularizationTolerance = 1e-9;
constexpr double kMinOrder = 0.9;
constexpr double kRatioLow = 0.15;
constexpr double kRatioHigh = 0.35;
constexpr std::size_t kPaths = 10000;

struct Budget {
  const char* experiment;
  double seconds;
};

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool condition, const std::string& what) {
    if (!condition) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Ordinary least-squares slope of log y on log x.
double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

std::string param(const Parameters& p, const std::string& key) {
  for (const auto& [k, v] : p) {
    if (k == key) {
      return v;
    }
  }
  return "";
}

double param_number(const Parameters& p, const std::string& key) {
  const std::string v = param(p, key);
  return v.empty() ? std::nan("") : std::stod(v);
}

double value(const ExperimentReport& r, const std::string& metric) {
  const Record* rec = r.find(metric);
  return rec == nullptr ? std::nan("") : rec->value;
}

/// (parameter value, record value) pairs of one metric, in report order.
std::vector<std::pair<double, double>> series(const ExperimentReport& r, const std::string& metric,
                                              const std::string& key) {
  std::vector<std::pair<double, double>> out;
  for (const Record* rec : r.find_all(metric)) {
    out.emplace_back(param_number(rec->parameters, key), rec->value);
  }
  return out;
}

double fitted(const std::vector<std::pair<double, double>>& s) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [a, b] : s) {
    x.push_back(a);
    y.push_back(b);
  }
  return log_slope(x, y);
}

bool strictly_decreasing_in_refinement(std::vector<std::pair<double, double>> s) {
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i].second < s[i - 1].second)) {
      return false;
    }
  }
  return true;
}

Outcome ac1(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "n") == 31, "n != 31");
  o.require(param_number(r.parameters, "samples") == 100, "samples != 100");
  const double yosida = value(r, "yosida_identity_error");
  const double resolvent = value(r, "resolvent_identity_error");
  const double contraction = value(r, "contraction_excess");
  const double form = value(r, "min_yosida_form");
  o.require(yosida <= kAlgebraTolerance, "yosida identity error " + num(yosida));
  o.require(resolvent <= kAlgebraTolerance, "resolvent identity error " + num(resolvent));
  o.require(contraction <= kAlgebraTolerance, "contraction excess " + num(contraction));
  o.require(form >= kYosidaFormFloor, "min <A_eps x, x> " + num(form));
  if (o.pass) {
    o.detail = "max identity error " + num(std::max(yosida, resolvent)) + ", min form " + num(form);
  }
  return o;
}

Outcome ac2(const ExperimentReport& r, const RunConfig& c) {
  Outcome o;
  const auto& spec = c.equation(param(r.parameters, "equation")).spec;
  o.require(spec.dim() == 31, "n != 31");
  o.require(!spec.F.state_dependent() && !spec.B.state_dependent(), "equation is not linear additive");
  o.require(param_number(r.parameters, "dt") == std::ldexp(1.0, -10), "dt != 2^-10");
  const auto gaps = series(r, "gap", "epsilon");
  o.require(gaps.size() == 6 && gaps.front().first == 0.5 && gaps.back().first == std::ldexp(1.0, -6),
            "epsilons are not 2^-1..2^-6");
  o.require(strictly_decreasing_in_refinement(gaps), "gaps not decreasing");
  const double slope = fitted(gaps);
  o.require(slope >= kSlopeMin && slope <= kSlopeMax, "slope " + num(slope));
  if (o.pass) {
    o.detail = "slope " + num(slope);
  }
  return o;
}

Outcome ac3(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "paths") == kPaths, "paths != 10^4");
  const double ito = std::abs(value(r, "ito_second_moment") / value(r, "ito_closed_form") - 1.0);
  const double poisson = std::abs(value(r, "poisson_second_moment") / value(r, "poisson_closed_form") - 1.0);
  o.require(ito <= kIsometryRelative, "Ito relative error " + num(ito));
  o.require(poisson <= kIsometryRelative, "Poisson relative error " + num(poisson));
  if (o.pass) {
    o.detail = "relative errors Ito " + num(ito) + ", Poisson " + num(poisson);
  }
  return o;
}

Outcome ac4(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "paths") == kPaths, "paths != 10^4");
  const Record* diff = r.find("difference");
  o.require(diff != nullptr && diff->std_error > 0.0, "no standard error");
  if (diff != nullptr) {
    const double recomputed = value(r, "jump_sum_mean") - value(r, "compensator_mean");
    o.require(std::abs(std::abs(recomputed) - std::abs(diff->value)) <= 1e-12, "difference record inconsistent");
    const double z = std::abs(recomputed) / diff->std_error;
    o.require(z <= kStandardErrors, "difference is " + num(z) + " SE");
    if (o.pass) {
      o.detail = "difference " + num(z) + " SE";
    }
  }
  return o;
}

Outcome ac5(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "instances") == 20, "instances != 20");
  double worst = 0.0;
  for (const char* scheme : {"exp_euler", "resolvent_implicit"}) {
    bool seen = false;
    for (const Record* rec : r.find_all("max_residual")) {
      if (param(rec->parameters, "scheme") == scheme) {
        seen = true;
        worst = std::max(worst, rec->value);
        o.require(rec->value <= kRegularizationTolerance, std::string(scheme) + " residual " + num(rec->value));
      }
    }
    o.require(seen, std::string("no residual for ") + scheme);
  }
  if (o.pass) {
    o.detail = "max residual " + num(worst);
  }
  return o;
}

Outcome ac6(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "paths") == 100, "paths != 100");
  const auto residuals = series(r, "residual", "dt");
  o.require(residuals.size() == 4, "expected 4 dyadic dt");
  const double order = fitted(residuals);
  o.require(order >= kMinOrder, "order " + num(order));
  if (o.pass) {
    o.detail = "order " + num(order);
  }
  return o;
}

Outcome ac7(const ExperimentReport& r, const RunConfig& c) {
  Outcome o;
  const auto& spec = c.equation(param(r.parameters, "equation")).spec;
  o.require(spec.dim() == 31, "n != 31");
  o.require(spec.F.f.degree() == 3, "nonlinearity is not cubic");
  o.require(spec.B.state_dependent(), "Wiener noise is not multiplicative");
  o.require(spec.G.marks().size() == 2, "jump measure does not have two atoms");
  o.require(param(r.parameters, "schemes") == "exp_euler resolvent_implicit", "scheme pair");
  const auto gaps = series(r, "gap", "dt");
  o.require(gaps.size() == 4 && gaps.front().first == std::ldexp(1.0, -7), "dts are not 4 dyadic from 2^-7");
  o.require(strictly_decreasing_in_refinement(gaps), "gaps not strictly decreasing");
  for (const char* m : {"integrability_first", "integrability_second"}) {
    const auto values = series(r, m, "dt");
    o.require(values.size() == gaps.size(), std::string("missing ") + m);
    for (const auto& [dt, v] : values) {
      o.require(std::isfinite(v), std::string(m) + " infinite at dt " + num(dt));
    }
  }
  const double order = fitted(gaps);
  o.require(order >= kMinOrder, "order " + num(order));
  if (o.pass) {
    o.detail = "order " + num(order) + ", gaps " + num(gaps.front().second) + " -> " + num(gaps.back().second);
  }
  return o;
}

Outcome ac8(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  o.require(param_number(r.parameters, "ensemble") == 1000, "ensemble != 1000");
  const double alpha = value(r, "alpha");
  const double margin = value(r, "sampled_margin");
  o.require(alpha > 0.0, "alpha " + num(alpha));
  o.require(margin >= 0.0, "sampled margin " + num(margin));
  const double g0 = value(r, "initial_gap_sq");
  std::size_t violations = 0;
  std::size_t checked = 0;
  double worst = 0.0;
  for (const Record* rec : r.find_all("mean_sq_gap")) {
    const double t = param_number(rec->parameters, "t");
    const double bound = std::exp(-2.0 * alpha * t) * g0;
    const double allowed = rec->value > 0.0 ? bound * (1.0 + kStandardErrors * rec->std_error / rec->value) : bound;
    ++checked;
    worst = std::max(worst, rec->value / bound);
    if (rec->value > allowed) {
      ++violations;
    }
  }
  o.require(checked == 129, "expected every grid time in [0, 1]");
  o.require(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) {
    o.detail = "alpha " + num(alpha) + ", margin " + num(margin) + ", max gap/bound " + num(worst);
  }
  return o;
}

Outcome ac9(const ExperimentReport& stability, const ExperimentReport& cauchy) {
  Outcome o;
  const double alpha = value(stability, "envelope_alpha");
  double worst = 0.0;
  for (const Record* rec : stability.find_all("N")) {
    const double t = param_number(rec->parameters, "t");
    const double envelope = std::exp(2.0 * std::abs(alpha) * t);
    const double n = rec->value;
    const double allowed = n > 0.0 ? envelope * (1.0 + kStandardErrors * rec->std_error / n) : envelope;
    worst = std::max(worst, n / envelope);
    o.require(std::isfinite(n) && n <= allowed, "N exceeds the envelope at t = " + num(t));
  }
  const auto distances = series(cauchy, "solution_distance", "pair");
  for (std::size_t i = 1; i < distances.size(); ++i) {
    const double ratio = distances[i].second / distances[i - 1].second;
    o.require(ratio >= kRatioLow && ratio <= kRatioHigh, "Cauchy ratio " + num(ratio));
  }
  o.require(distances.size() >= 3, "need at least two ratios");
  if (o.pass) {
    o.detail = "max N/envelope " + num(worst) + ", mean Cauchy ratio " + num(value(cauchy, "mean_ratio"));
  }
  return o;
}

Outcome ac10(const ExperimentReport& r, const RunConfig&) {
  Outcome o;
  std::map<int, std::vector<std::pair<double, double>>> modes;
  for (const Record* rec : r.find_all("residual")) {
    modes[std::stoi(param(rec->parameters, "k"))].emplace_back(param_number(rec->parameters, "dt"), rec->value);
  }
  o.require(modes.size() == 8, "expected modes k = 1..8");
  double lowest = 1e300;
  for (const auto& [k, s] : modes) {
    const double order = fitted(s);
    lowest = std::min(lowest, order);
    o.require(order >= kMinOrder, "mode " + std::to_string(k) + " order " + num(order));
  }
  if (o.pass) {
    o.detail = "min order " + num(lowest);
  }
  return o;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path config_path = fs::path(MILDSIM_SOURCE_DIR) / "configs" / "cubic-rd.cfg";
  const fs::path root = fs::temp_directory_path() / "mildsim-acceptance";
  fs::remove_all(root);

  const RunConfig config = parse_config(config_path);
  RunOptions options;
  options.output = root / "first";
  const RunResult first = run(config, options);
  options.output = root / "second";
  const RunResult second = run(config, options);

  std::map<std::string, double> seconds;
  for (const auto& o : first.outcomes) {
    seconds[o.report.name] = o.seconds;
  }
  auto report = [&](const char* name) -> const ExperimentReport& {
    const ExperimentReport* r = first.report(name);
    if (r == nullptr) {
      std::fprintf(stderr, "missing report %s\n", name);
      std::exit(1);
    }
    return *r;
  };

  struct Criterion {
    const char* label;
    std::vector<Budget> budgets;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"resolvent and Yosida algebra", {{"resolvent_algebra", 1.0}},
       [&] { return ac1(report("resolvent_algebra"), config); }},
      {"Trotter-Kato surrogate", {{"trotter_kato", 10.0}}, [&] { return ac2(report("trotter_kato"), config); }},
      {"Ito and compensated Poisson isometries", {{"isometry", 30.0}},
       [&] { return ac3(report("isometry"), config); }},
      {"compensator identity", {{"compensator", 30.0}}, [&] { return ac4(report("compensator"), config); }},
      {"exact regularization identity", {{"regularization_identity", 5.0}},
       [&] { return ac5(report("regularization_identity"), config); }},
      {"discrete Ito energy identity", {{"energy_identity", 60.0}},
       [&] { return ac6(report("energy_identity"), config); }},
      {"uniqueness by coupling", {{"coupling", 120.0}}, [&] { return ac7(report("coupling"), config); }},
      {"Gronwall contraction", {{"contraction", 120.0}}, [&] { return ac8(report("contraction"), config); }},
      {"stability and generalized solutions", {{"stability", 120.0}, {"generalized_solution", 120.0}},
       [&] { return ac9(report("stability"), report("generalized_solution")); }},
      {"weak formulation residual", {{"weak_residual", 30.0}}, [&] { return ac10(report("weak_residual"), config); }},
  };

  bool all = true;
  int index = 1;
  for (const auto& c : criteria) {
    Outcome o = c.check();
    double elapsed = 0.0;
    for (const auto& b : c.budgets) {
      elapsed += seconds[b.experiment];
      o.require(seconds[b.experiment] < b.seconds,
                std::string(b.experiment) + " took " + num(seconds[b.experiment]) + " s");
    }
    std::printf("AC%-2d %-40s %s  (%.2f s)  %s\n", index++, c.label, o.pass ? "PASS" : "FAIL", elapsed,
                o.detail.c_str());
    all = all && o.pass;
  }

  Outcome repro;
  repro.require(first.exit_status == 0 && second.exit_status == 0, "a run exited nonzero");
  repro.require(first.artifacts == second.artifacts, "artifact lists differ");
  std::size_t compared = 0;
  for (const auto& f : first.artifacts) {
    ++compared;
    repro.require(slurp(first.directory / f) == slurp(second.directory / f), f + " differs");
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  repro.require(total < 600.0, "suite took " + num(total) + " s");
  if (repro.pass) {
    repro.detail = std::to_string(compared) + " artifacts byte-identical";
  }
  std::printf("AC%-2d %-40s %s  (%.2f s)  %s\n", 11, "reproducibility and wall clock", repro.pass ? "PASS" : "FAIL",
              total, repro.detail.c_str());
  all = all && repro.pass;

  fs::remove_all(root);
  std::printf("%s\n", all ? "ALL ACCEPTANCE CRITERIA PASS" : "ACCEPTANCE FAILED");
  return all ? 0 : 1;
}
