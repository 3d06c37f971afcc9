#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mildsim {

/// A solver or experiment configuration that cannot be run (e.g. an explicit
/// scheme outside its stability region). Raised before any stepping happens.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time stepper produced a non-finite state.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// The structural hypothesis an experiment relies on was not met on the sample.
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mildsim
