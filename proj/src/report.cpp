#include "mildsim/report.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "mildsim/format.hpp"

namespace mildsim {

std::string_view to_string(Verdict verdict) noexcept {
  switch (verdict) {
    case Verdict::pass:
      return "PASS";
    case Verdict::fail:
      return "FAIL";
    case Verdict::inconclusive:
      return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

Verdict combine(Verdict a, Verdict b) noexcept {
  if (a == Verdict::fail || b == Verdict::fail) {
    return Verdict::fail;
  }
  if (a == Verdict::inconclusive || b == Verdict::inconclusive) {
    return Verdict::inconclusive;
  }
  return Verdict::pass;
}

std::string render_parameters(const Parameters& parameters) {
  if (parameters.empty()) {
    return "-";
  }
  std::string out;
  for (const auto& [key, value] : parameters) {
    if (!out.empty()) {
      out += ';';
    }
    out += key;
    out += '=';
    out += value;
  }
  return out;
}

void ExperimentReport::add(std::string metric, Parameters params, double value, double std_error, Verdict v) {
  records.push_back(Record{std::move(metric), std::move(params), value, std_error, v});
}

const Record* ExperimentReport::find(std::string_view metric) const noexcept {
  for (const auto& r : records) {
    if (r.metric == metric) {
      return &r;
    }
  }
  return nullptr;
}

std::vector<const Record*> ExperimentReport::find_all(std::string_view metric) const {
  std::vector<const Record*> out;
  for (const auto& r : records) {
    if (r.metric == metric) {
      out.push_back(&r);
    }
  }
  return out;
}

const Curve* ExperimentReport::curve(std::string_view name) const noexcept {
  for (const auto& c : curves) {
    if (c.name == name) {
      return &c;
    }
  }
  return nullptr;
}

void write_report(std::ostream& out, const ExperimentReport& report) {
  out << "# mildsim report v1\n";
  out << "# experiment " << report.name << '\n';
  out << "# parameters " << render_parameters(report.parameters) << '\n';
  out << "# verdict " << to_string(report.verdict) << '\n';
  for (const auto& note : report.notes) {
    out << "# note " << note << '\n';
  }
  out << "name\tparameters\tvalue\tstderr\tverdict\n";
  for (const auto& r : report.records) {
    out << report.name << '.' << r.metric << '\t' << render_parameters(r.parameters) << '\t'
        << format_double(r.value) << '\t' << format_double(r.std_error) << '\t' << to_string(r.verdict) << '\n';
  }
}

std::string report_text(const ExperimentReport& report) {
  std::ostringstream out;
  write_report(out, report);
  return out.str();
}

std::vector<std::pair<std::string, std::string>> plot_files(const ExperimentReport& report) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& c : report.curves) {
    if (c.x.size() != c.y.size() || c.err.size() != c.x.size()) {
      throw std::invalid_argument("curve '" + c.name + "' has columns of different lengths");
    }
    std::ostringstream out;
    out << "# mildsim plot v1\n# experiment " << report.name << "\n# curve " << c.name << "\n# columns "
        << c.x_label << ' ' << c.y_label << " err\n";
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out << format_double(c.x[i]) << '\t' << format_double(c.y[i]) << '\t' << format_double(c.err[i]) << '\n';
    }
    files.emplace_back(report.name + "." + c.name + ".dat", out.str());
  }
  return files;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + temp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(temp, ignored);
      throw std::runtime_error("write failed for " + temp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(temp, ignored);
    throw std::runtime_error("cannot rename " + temp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::vector<std::string> emit_plot_data(const ExperimentReport& report, const std::filesystem::path& directory) {
  std::vector<std::string> names;
  for (const auto& [name, content] : plot_files(report)) {
    write_file_atomic(directory / name, content);
    names.push_back(name);
  }
  return names;
}

}  // namespace mildsim
