#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace mildsim {

/// Welford accumulator for mean and sample variance.
class RunningStats {
 public:
  void add(double x) noexcept;
  /// Chan et al. pairwise merge; merging in a fixed order keeps results reproducible.
  void merge(const RunningStats& other) noexcept;

  [[nodiscard]] std::size_t count() const noexcept { return count_; }
  [[nodiscard]] double mean() const noexcept { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  [[nodiscard]] double variance() const noexcept;
  [[nodiscard]] double std_error() const noexcept;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept; needs two distinct x.
[[nodiscard]] LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slope of log y against log x; every entry must be positive.
[[nodiscard]] double fit_log_slope(std::span<const double> x, std::span<const double> y);

/// Worker count used by parallel_map when none is given.
[[nodiscard]] std::size_t default_workers() noexcept;

/// results[i] = fn(i) for i < count, computed on up to `workers` threads.
/// The result vector is indexed, so any reduction over it in index order is
/// independent of scheduling. The exception of the lowest failing index is
/// rethrown.
template <class Fn>
[[nodiscard]] auto parallel_map(std::size_t count, Fn&& fn, std::size_t workers = default_workers())
    -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back(body);
    }
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  std::vector<T> results;
  results.reserve(count);
  for (auto& slot : slots) {
    results.push_back(std::move(*slot));
  }
  return results;
}

}  // namespace mildsim
