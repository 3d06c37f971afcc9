#pragma once

#include <span>
#include <string>

namespace mildsim {

/// Shortest round-trip-safe rendering used in every output file: printf "%.17g".
[[nodiscard]] std::string format_double(double value);

/// Space-separated format_double of each entry.
[[nodiscard]] std::string format_list(std::span<const double> values);

}  // namespace mildsim
