#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mildsim {

enum class Verdict { pass, fail, inconclusive };

/// "PASS", "FAIL", "INCONCLUSIVE".
[[nodiscard]] std::string_view to_string(Verdict verdict) noexcept;
/// FAIL dominates INCONCLUSIVE, which dominates PASS.
[[nodiscard]] Verdict combine(Verdict a, Verdict b) noexcept;

/// Ordered key=value list; rendered "k1=v1;k2=v2".
using Parameters = std::vector<std::pair<std::string, std::string>>;

[[nodiscard]] std::string render_parameters(const Parameters& parameters);

struct Record {
  std::string metric;
  Parameters parameters;
  double value = 0.0;
  double std_error = 0.0;
  Verdict verdict = Verdict::pass;
};

/// (x, y, error-bar) triples of one plotted series.
struct Curve {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> err;
};

struct ExperimentReport {
  std::string name;
  Parameters parameters;
  std::vector<Record> records;
  std::vector<Curve> curves;
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::string> notes;

  void add(std::string metric, Parameters params, double value, double std_error = 0.0,
           Verdict v = Verdict::pass);
  /// First record with this metric name; nullptr when absent.
  [[nodiscard]] const Record* find(std::string_view metric) const noexcept;
  [[nodiscard]] std::vector<const Record*> find_all(std::string_view metric) const;
  [[nodiscard]] const Curve* curve(std::string_view name) const noexcept;
};

/// Tab-separated report: "# mildsim report v1" header lines, then one record
/// per line: name, parameters, value, stderr, verdict (see docs/formats.md).
void write_report(std::ostream& out, const ExperimentReport& report);
[[nodiscard]] std::string report_text(const ExperimentReport& report);

/// Contents of "<experiment>.<curve>.dat" for every curve, in curve order.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> plot_files(const ExperimentReport& report);

/// Writes `content` to `path` through a sibling temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Writes every plot file of the report into `directory`; returns the file names.
std::vector<std::string> emit_plot_data(const ExperimentReport& report, const std::filesystem::path& directory);

}  // namespace mildsim
