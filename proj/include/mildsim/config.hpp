#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mildsim/model.hpp"
#include "mildsim/solver.hpp"

namespace mildsim::cli {

/// Parse or validation failure; the message carries "<file>:<line>: <key>: ...".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedEquation {
  std::string name;
  EquationSpec spec;
  /// Dissipativity triplet margin sampled at parse time.
  MarginReport margin;
};

using SettingValue = std::variant<double, std::vector<double>, std::string, std::vector<std::string>>;

struct ExperimentSettings {
  std::string name;
  std::map<std::string, SettingValue> values;

  [[nodiscard]] bool has(const std::string& key) const { return values.count(key) != 0; }
  [[nodiscard]] double number(const std::string& key, double fallback) const;
  [[nodiscard]] std::size_t count(const std::string& key, std::size_t fallback) const;
  [[nodiscard]] std::vector<double> list(const std::string& key, std::vector<double> fallback = {}) const;
  [[nodiscard]] std::string text(const std::string& key, std::string fallback) const;
  [[nodiscard]] std::vector<std::string> words(const std::string& key, std::vector<std::string> fallback) const;
};

struct RunConfig {
  std::filesystem::path source;
  /// Verbatim file contents.
  std::string text;
  /// "base" first, then the variants in file order.
  std::vector<NamedEquation> equations;
  std::uint64_t seed = 0;
  /// Experiments in execution order.
  std::vector<ExperimentSettings> experiments;
  std::filesystem::path output_directory = "mildsim-out";
  bool plots = true;

  [[nodiscard]] const NamedEquation& equation(std::string_view name) const;
};

/// Names accepted in experiment.run.
[[nodiscard]] const std::vector<std::string>& known_experiments();

/// Reads and validates a config file; throws ConfigError.
[[nodiscard]] RunConfig parse_config(const std::filesystem::path& path);
/// Same for in-memory text; `source` names the origin in diagnostics.
[[nodiscard]] RunConfig parse_config_text(const std::string& text, const std::filesystem::path& source);

/// u = sum_k c_k e_k for the leading eigenvectors of A.
[[nodiscard]] Vector from_modes(const SpectralOperator& A, const std::vector<double>& coefficients);

}  // namespace mildsim::cli
