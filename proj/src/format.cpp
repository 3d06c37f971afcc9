#include "mildsim/format.hpp"

#include <cstdio>

namespace mildsim {

std::string format_double(double value) {
  char buffer[40];
  const int written = std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return std::string(buffer, static_cast<std::size_t>(written));
}

std::string format_list(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out += ' ';
    }
    out += format_double(values[i]);
  }
  return out;
}

}  // namespace mildsim
