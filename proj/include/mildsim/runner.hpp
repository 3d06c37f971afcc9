#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mildsim/config.hpp"
#include "mildsim/report.hpp"

namespace mildsim::cli {

inline constexpr std::string_view kVersion = "1.0.0";

struct RunOptions {
  std::optional<std::filesystem::path> output;
  std::optional<std::uint64_t> seed;
  /// Subset of experiment.run to execute; empty runs everything.
  std::vector<std::string> only;
  int verbosity = 0;
  /// Progress and warnings; nothing is logged when null.
  std::ostream* log = nullptr;
};

struct ExperimentOutcome {
  ExperimentReport report;
  /// Wall-clock seconds; never written to artifacts.
  double seconds = 0.0;
};

struct RunResult {
  /// 0 unless some experiment FAILed.
  int exit_status = 0;
  std::filesystem::path directory;
  std::vector<ExperimentOutcome> outcomes;
  /// File names relative to `directory`, manifest last.
  std::vector<std::string> artifacts;

  [[nodiscard]] const ExperimentReport* report(std::string_view name) const noexcept;
};

/// Executes one configured experiment. A refused hypothesis (HypothesisError)
/// yields an INCONCLUSIVE report; other errors propagate.
[[nodiscard]] ExperimentReport run_experiment(const RunConfig& config, const ExperimentSettings& settings,
                                              std::uint64_t seed);

/// Runs the selected experiments and writes "<name>.report.tsv", the plot files
/// and "manifest.txt" atomically. On any error the files written so far are
/// removed and the error is rethrown.
RunResult run(const RunConfig& config, const RunOptions& options = {});

}  // namespace mildsim::cli
