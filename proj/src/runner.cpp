#include "mildsim/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>

#include "mildsim/analysis.hpp"
#include "mildsim/errors.hpp"
#include "mildsim/format.hpp"
#include "mildsim/rng.hpp"

namespace mildsim::cli {

namespace {

std::string hex64(std::uint64_t value) {
  char buffer[20];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

std::string render_value(const SettingValue& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    return format_double(*d);
  }
  if (const auto* l = std::get_if<std::vector<double>>(&value)) {
    return format_list(*l);
  }
  if (const auto* s = std::get_if<std::string>(&value)) {
    return *s;
  }
  std::string out;
  for (const auto& w : std::get<std::vector<std::string>>(value)) {
    out += out.empty() ? w : " " + w;
  }
  return out;
}

Scheme scheme_of(const ExperimentSettings& s, const std::string& fallback) {
  return scheme_from_string(s.text("scheme", fallback));
}

std::vector<double> dyadic(int from, int to) {
  std::vector<double> out;
  for (int k = from; k <= to; ++k) {
    out.push_back(std::ldexp(1.0, -k));
  }
  return out;
}

ExperimentReport dispatch(const RunConfig& config, const ExperimentSettings& s, std::uint64_t seed) {
  const NamedEquation& eq = config.equation(s.text("equation", "base"));
  const EquationSpec& spec = eq.spec;
  const std::string& name = s.name;

  if (name == "resolvent_algebra") {
    return resolvent_algebra_experiment(spec.A, s.count("samples", 100), seed, s.number("tolerance", 1e-9));
  }
  if (name == "trotter_kato") {
    TrotterKatoOptions o;
    o.dt = s.number("dt", 1.0 / 1024.0);
    o.epsilons = s.list("epsilons", dyadic(1, 6));
    o.slope_min = s.number("slope_min", 0.9);
    o.slope_max = s.number("slope_max", 1.1);
    return trotter_kato_experiment(spec, seed, o).to_report();
  }
  if (name == "isometry") {
    IsometryOptions o;
    o.paths = s.count("paths", 10000);
    o.dt = s.number("dt", 1.0 / 32.0);
    o.relative_tolerance = s.number("tolerance", 0.05);
    return isometry_experiment(spec, seed, o);
  }
  if (name == "compensator") {
    CompensatorOptions o;
    o.paths = s.count("paths", 10000);
    o.dt = s.number("dt", 1.0 / 32.0);
    return compensator_experiment(spec, seed, o);
  }
  if (name == "regularization_identity") {
    RegularizationOptions o;
    o.instances = s.count("instances", 20);
    o.dim = s.count("n", 8);
    o.epsilon = s.number("epsilon", 0.3);
    o.dt = s.number("dt", 1.0 / 32.0);
    o.tolerance = s.number("tolerance", 1e-9);
    return regularization_identity_experiment(seed, o);
  }
  if (name == "energy_identity") {
    EnergyOptions o;
    o.dts = s.list("dts", dyadic(6, 9));
    o.epsilon = s.number("epsilon", 1.0 / 64.0);
    o.paths = s.count("paths", 100);
    o.min_order = s.number("min_order", 0.9);
    return energy_identity_experiment(spec, seed, o).to_report();
  }
  if (name == "coupling") {
    CouplingOptions o;
    o.dts = s.list("dts", dyadic(7, 10));
    const auto schemes = s.words("schemes", {"exp_euler", "resolvent_implicit"});
    o.first = scheme_from_string(schemes[0]);
    o.second = scheme_from_string(schemes[1]);
    o.epsilon = s.number("epsilon", 0.0);
    o.min_order = s.number("min_order", 0.9);
    return coupling_uniqueness_experiment(spec, seed, o).to_report();
  }
  if (name == "contraction") {
    ContractionOptions o;
    o.dt = s.number("dt", 1.0 / 128.0);
    o.scheme = scheme_of(s, "exp_euler");
    o.epsilon = s.number("epsilon", 0.0);
    o.rate_multiplier = s.number("rate_multiplier", 2.0);
    const Vector u0_a = s.has("u0_a_modes") ? from_modes(spec.A, s.list("u0_a_modes")) : spec.u0;
    const Vector u0_b = from_modes(spec.A, s.list("u0_b_modes"));
    return contraction_experiment(spec, u0_a, u0_b, s.count("ensemble", 1000), seed, o).to_report();
  }
  if (name == "stability") {
    StabilityOptions o;
    o.dt = s.number("dt", 1.0 / 128.0);
    o.scheme = scheme_of(s, "exp_euler");
    o.epsilon = s.number("epsilon", 0.0);
    o.jump_factor = s.number("jump_factor", 10.0);
    o.noise_floor = s.number("noise_floor", 1e-14);
    const EquationSpec& other = config.equation(s.text("equation2", "base")).spec;
    return stability_estimate_experiment(spec, other, s.count("ensemble", 1000), seed, o).to_report();
  }
  if (name == "generalized_solution") {
    CauchyOptions o;
    o.dt = s.number("dt", 1.0 / 128.0);
    o.scheme = scheme_of(s, "exp_euler");
    o.epsilon = s.number("epsilon", 0.0);
    std::vector<EquationSpec> sequence;
    for (double eps : s.list("mollify_epsilons", dyadic(10, 13))) {
      sequence.push_back(mollified_spec(spec, eps));
    }
    return generalized_solution_cauchy(sequence, s.count("ensemble", 200), seed, o).to_report();
  }
  if (name == "weak_residual") {
    WeakResidualOptions o;
    o.dts = s.list("dts", dyadic(6, 9));
    o.epsilon = s.number("epsilon", 0.1);
    o.k_max = s.count("k_max", 8);
    o.paths = s.count("paths", 20);
    o.scheme = scheme_of(s, "resolvent_implicit");
    o.min_order = s.number("min_order", 0.9);
    return weak_residual_experiment(spec, seed, o).to_report();
  }
  if (name == "yosida_bound") {
    const double dt = s.number("dt", 1.0 / 256.0);
    const auto runs = s.list("run_epsilons", {1.0 / 16.0, 1.0 / 32.0});
    if (runs.size() != 2) {
      throw ConfigError("experiment.yosida_bound.run_epsilons: expected two values");
    }
    const double eps = s.number("epsilon", 1.0 / 64.0);
    const NoiseSample noise = NoiseSample::generate(spec, TimeGrid::with_step(spec.T, dt), seed);
    ExperimentReport r;
    r.name = name;
    try {
      const Trajectory u = solve_yosida_explicit(spec, noise, dt, runs[0]);
      const Trajectory v = solve_yosida_explicit(spec, noise, dt, runs[1]);
      const YosidaBoundCheck check = yosida_energy_bound_check(spec, u, v, eps);
      r.verdict = check.holds ? Verdict::pass : Verdict::fail;
      r.add("max_excess", {}, check.max_excess, 0.0, r.verdict);
      r.add("final_lhs", {}, check.lhs.back());
      r.add("final_rhs", {}, check.rhs.back());
      Curve c{"bound", "t", "lhs_over_rhs", {}, {}, {}};
      for (std::size_t m = 0; m < check.lhs.size(); ++m) {
        if (check.rhs[m] > 0.0) {
          c.x.push_back(u.grid.node(m));
          c.y.push_back(check.lhs[m] / check.rhs[m]);
          c.err.push_back(0.0);
        }
      }
      r.curves.push_back(std::move(c));
    } catch (const BlowUpError& e) {
      r.verdict = Verdict::inconclusive;
      r.notes.push_back(std::string("blow-up: ") + e.what());
    }
    return r;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

void remove_all(const std::filesystem::path& directory, const std::vector<std::string>& files) {
  for (const auto& f : files) {
    std::error_code ignored;
    std::filesystem::remove(directory / f, ignored);
    std::filesystem::path temp = directory / f;
    temp += ".tmp";
    std::filesystem::remove(temp, ignored);
  }
}

}  // namespace

const ExperimentReport* RunResult::report(std::string_view name) const noexcept {
  for (const auto& o : outcomes) {
    if (o.report.name == name) {
      return &o.report;
    }
  }
  return nullptr;
}

ExperimentReport run_experiment(const RunConfig& config, const ExperimentSettings& settings, std::uint64_t seed) {
  ExperimentReport report;
  try {
    report = dispatch(config, settings, seed);
  } catch (const HypothesisError& e) {
    report = ExperimentReport{};
    report.verdict = Verdict::inconclusive;
    report.notes.push_back(std::string("refused: ") + e.what());
  }
  report.name = settings.name;
  Parameters params;
  params.emplace_back("seed", std::to_string(seed));
  const std::string equation = settings.text("equation", "base");
  params.emplace_back("equation", equation);
  params.emplace_back("fingerprint", hex64(config.equation(equation).spec.fingerprint()));
  params.insert(params.end(), report.parameters.begin(), report.parameters.end());
  for (const auto& [key, value] : settings.values) {
    const bool present = std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.first == key; });
    if (!present) {
      params.emplace_back(key, render_value(value));
    }
  }
  report.parameters = std::move(params);
  return report;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  RunResult result;
  result.directory = options.output.value_or(config.output_directory);
  const std::uint64_t seed = options.seed.value_or(config.seed);

  std::vector<const ExperimentSettings*> selected;
  for (const auto& name : options.only) {
    const bool known = std::any_of(config.experiments.begin(), config.experiments.end(),
                                   [&](const ExperimentSettings& s) { return s.name == name; });
    if (!known) {
      throw ConfigError("--only: experiment '" + name + "' is not listed in experiment.run");
    }
  }
  for (const auto& s : config.experiments) {
    if (options.only.empty() || std::find(options.only.begin(), options.only.end(), s.name) != options.only.end()) {
      selected.push_back(&s);
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(result.directory, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory " + result.directory.string() + ": " + ec.message());
  }

  std::vector<std::pair<std::string, std::string>> written;  // (file, verdict or "-")
  std::vector<std::uint64_t> hashes;
  auto write = [&](const std::string& file, const std::string& content, std::string verdict) {
    result.artifacts.push_back(file);
    write_file_atomic(result.directory / file, content);
    written.emplace_back(file, std::move(verdict));
    hashes.push_back(fnv1a64(content));
  };

  try {
    for (const ExperimentSettings* s : selected) {
      const auto start = std::chrono::steady_clock::now();
      ExperimentReport report = run_experiment(config, *s, seed);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write(report.name + ".report.tsv", report_text(report), std::string(to_string(report.verdict)));
      if (config.plots) {
        for (const auto& [file, content] : plot_files(report)) {
          write(file, content, "-");
        }
      }
      if (report.verdict == Verdict::fail) {
        result.exit_status = 1;
      }
      if (options.log != nullptr) {
        *options.log << "[" << report.name << "] " << to_string(report.verdict);
        if (options.verbosity > 0) {
          char buffer[32];
          std::snprintf(buffer, sizeof buffer, " (%.2f s)", seconds);
          *options.log << buffer;
        }
        *options.log << '\n';
        if (report.verdict == Verdict::inconclusive) {
          *options.log << "warning: " << report.name << " is INCONCLUSIVE";
          for (const auto& note : report.notes) {
            *options.log << "; " << note;
          }
          *options.log << '\n';
        } else if (options.verbosity > 0) {
          for (const auto& note : report.notes) {
            *options.log << "  note: " << note << '\n';
          }
        }
      }
      result.outcomes.push_back(ExperimentOutcome{std::move(report), seconds});
    }

    std::ostringstream manifest;
    manifest << "# mildsim manifest v1\n";
    manifest << "version " << kVersion << '\n';
    manifest << "rng " << Rng::kAlgorithm << '\n';
    manifest << "config_file " << config.source.filename().string() << '\n';
    manifest << "config_fnv1a64 " << hex64(fnv1a64(config.text)) << '\n';
    manifest << "seed " << seed << '\n';
    manifest << "seed_override " << (options.seed ? std::to_string(*options.seed) : std::string("none")) << '\n';
    manifest << "only";
    if (options.only.empty()) {
      manifest << " -";
    }
    for (const auto& n : options.only) {
      manifest << ' ' << n;
    }
    manifest << '\n';
    for (const auto& eq : config.equations) {
      manifest << "equation " << eq.name << " fingerprint " << hex64(eq.spec.fingerprint()) << " sampled_margin "
               << format_double(eq.margin.margin) << " evaluated " << eq.margin.evaluated << '\n';
    }
    for (std::size_t i = 0; i < written.size(); ++i) {
      manifest << "artifact " << written[i].first << " fnv1a64 " << hex64(hashes[i]) << " verdict "
               << written[i].second << '\n';
    }
    manifest << "exit_status " << result.exit_status << '\n';
    manifest << "--- config ---\n" << config.text;
    if (!config.text.empty() && config.text.back() != '\n') {
      manifest << '\n';
    }
    result.artifacts.push_back("manifest.txt");
    write_file_atomic(result.directory / "manifest.txt", manifest.str());
  } catch (...) {
    remove_all(result.directory, result.artifacts);
    throw;
  }
  return result;
}

}  // namespace mildsim::cli
