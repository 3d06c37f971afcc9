#include "mildsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mildsim/format.hpp"
#include "mildsim/rng.hpp"

namespace mildsim {

TimeGrid::TimeGrid(double horizon_, std::size_t steps_) : horizon(horizon_), steps(steps_) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("TimeGrid: horizon must be positive");
  }
  if (steps == 0) {
    throw std::invalid_argument("TimeGrid: at least one step required");
  }
}

TimeGrid TimeGrid::with_step(double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("TimeGrid: dt must be positive");
  }
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * std::max(1.0, rounded)) {
    throw std::invalid_argument("TimeGrid: dt = " + format_double(dt) + " does not divide T = " +
                                format_double(horizon));
  }
  return TimeGrid(horizon, static_cast<std::size_t>(rounded));
}

double TimeGrid::node(std::size_t n) const noexcept {
  return n == steps ? horizon : static_cast<double>(n) * dt();
}

std::size_t TimeGrid::node_index(double t) const {
  const double tol = 1e-12 * std::max(1.0, horizon);
  if (!(t >= -tol && t <= horizon + tol)) {
    throw std::invalid_argument("time " + format_double(t) + " lies outside [0, T]");
  }
  const auto n = static_cast<std::size_t>(std::llround(t / dt()));
  if (std::abs(node(n) - t) > tol) {
    throw std::invalid_argument("time " + format_double(t) + " is not a grid node");
  }
  return n;
}

std::size_t TimeGrid::cell_of(double t) const noexcept {
  const double cells = std::ceil(t / dt());
  if (cells <= 1.0) {
    return 0;
  }
  return std::min(static_cast<std::size_t>(cells) - 1, steps - 1);
}

Vector WienerPath::value(std::size_t node) const {
  if (node > grid.steps) {
    throw std::invalid_argument("WienerPath::value: node out of range");
  }
  Vector w = Vector::Zero(q.size());
  for (std::size_t n = 0; n < node; ++n) {
    w += increments.row(static_cast<Eigen::Index>(n)).transpose();
  }
  return w;
}

WienerPath WienerPath::coarsen(std::size_t factor) const {
  if (factor == 0 || grid.steps % factor != 0) {
    throw std::invalid_argument("WienerPath::coarsen: factor must divide the number of steps");
  }
  WienerPath coarse{TimeGrid(grid.horizon, grid.steps / factor), q, Matrix::Zero(0, 0), seed};
  coarse.increments = Matrix::Zero(static_cast<Eigen::Index>(coarse.grid.steps), increments.cols());
  for (std::size_t n = 0; n < grid.steps; ++n) {
    coarse.increments.row(static_cast<Eigen::Index>(n / factor)) += increments.row(static_cast<Eigen::Index>(n));
  }
  return coarse;
}

std::vector<std::vector<std::size_t>> PoissonPath::bin(const TimeGrid& grid) const {
  if (std::abs(grid.horizon - horizon) > 1e-12 * std::max(1.0, horizon)) {
    throw std::invalid_argument("PoissonPath::bin: grid horizon differs from the path horizon");
  }
  std::vector<std::vector<std::size_t>> cells(grid.steps);
  for (std::size_t j = 0; j < times.size(); ++j) {
    cells[grid.cell_of(times[j])].push_back(marks[j]);
  }
  return cells;
}

WienerPath sample_wiener(const Vector& q, const TimeGrid& grid, std::uint64_t seed) {
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (!(q[k] >= 0.0) || !std::isfinite(q[k])) {
      throw std::invalid_argument("sample_wiener: covariance weight q_" + std::to_string(k + 1) +
                                  " must be nonnegative");
    }
  }
  Rng rng(seed, kWienerStream);
  const double dt = grid.dt();
  const Vector scale = (dt * q).cwiseSqrt();
  Matrix increments(static_cast<Eigen::Index>(grid.steps), q.size());
  for (Eigen::Index n = 0; n < increments.rows(); ++n) {
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      increments(n, k) = scale[k] * rng.normal();
    }
  }
  return WienerPath{grid, q, std::move(increments), seed};
}

PoissonPath sample_poisson(const MarkSpace& marks, double horizon, std::uint64_t seed) {
  marks.validate();
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("sample_poisson: horizon must be positive");
  }
  PoissonPath path{horizon, {}, {}, seed};
  const double mass = marks.total_mass();
  if (mass == 0.0) {
    return path;
  }
  Rng rng(seed, kPoissonStream);
  const auto count = rng.poisson(horizon * mass);
  path.times.resize(count);
  for (auto& t : path.times) {
    t = horizon * rng.uniform_positive();
  }
  std::sort(path.times.begin(), path.times.end());
  // Coincident times have probability zero; redraw them rather than fail.
  for (;;) {
    auto dup = std::adjacent_find(path.times.begin(), path.times.end());
    if (dup == path.times.end()) {
      break;
    }
    *dup = horizon * rng.uniform_positive();
    std::sort(path.times.begin(), path.times.end());
  }
  path.marks.resize(count);
  for (auto& mark : path.marks) {
    const double target = mass * rng.uniform();
    double cumulative = 0.0;
    std::size_t j = 0;
    for (; j + 1 < marks.size(); ++j) {
      cumulative += marks.weights[j];
      if (target < cumulative) {
        break;
      }
    }
    // Skip trailing zero-weight atoms that rounding could otherwise select.
    while (marks.weights[j] == 0.0 && j > 0) {
      --j;
    }
    mark = j;
  }
  return path;
}

Vector ito_integral(const StepOperatorProcess& phi, const WienerPath& path, double t) {
  const std::size_t last = path.grid.node_index(t);
  const Matrix first = phi(0);
  if (first.cols() != path.increments.cols()) {
    throw std::invalid_argument("ito_integral: integrand has the wrong noise dimension");
  }
  Vector total = Vector::Zero(first.rows());
  for (std::size_t n = 0; n < last; ++n) {
    const Matrix op = n == 0 ? first : phi(n);
    total += op * path.increment(n);
  }
  return total;
}

Vector poisson_integral(const MarkStepProcess& g, const PoissonPath& path, const MarkSpace& marks,
                        const TimeGrid& grid, double t, bool compensated, std::size_t dim) {
  const std::size_t last = grid.node_index(t);
  const auto cells = path.bin(grid);
  Vector total = Vector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t n = 0; n < last; ++n) {
    for (std::size_t atom : cells[n]) {
      total += g(n, atom);
    }
    if (compensated) {
      for (std::size_t j = 0; j < marks.size(); ++j) {
        if (marks.weights[j] != 0.0) {
          total -= grid.dt() * marks.weights[j] * g(n, j);
        }
      }
    }
  }
  return total;
}

QuadraticMarkSums quadratic_mark_sum(const MarkStepProcess& D, const PoissonPath& path, const MarkSpace& marks,
                                     const TimeGrid& grid, double t, const HilbertSpace& space) {
  const std::size_t last = grid.node_index(t);
  const auto cells = path.bin(grid);
  QuadraticMarkSums sums;
  for (std::size_t n = 0; n < last; ++n) {
    for (std::size_t atom : cells[n]) {
      sums.jump_sum += space.norm_squared(D(n, atom));
    }
    for (std::size_t j = 0; j < marks.size(); ++j) {
      if (marks.weights[j] != 0.0) {
        sums.compensator += grid.dt() * marks.weights[j] * space.norm_squared(D(n, j));
      }
    }
  }
  return sums;
}

void write_wiener_path(std::ostream& out, const WienerPath& path) {
  out << "# mildsim wiener-path v1\n";
  out << "# seed " << path.seed << "\n# horizon " << format_double(path.grid.horizon) << "\n# steps "
      << path.grid.steps << "\n# q " << format_list({path.q.data(), static_cast<std::size_t>(path.q.size())})
      << "\n# columns t_end dW_1..dW_d\n";
  for (std::size_t n = 0; n < path.grid.steps; ++n) {
    out << format_double(path.grid.node(n + 1));
    for (Eigen::Index k = 0; k < path.increments.cols(); ++k) {
      out << '\t' << format_double(path.increments(static_cast<Eigen::Index>(n), k));
    }
    out << '\n';
  }
}

void write_poisson_path(std::ostream& out, const PoissonPath& path) {
  out << "# mildsim poisson-path v1\n";
  out << "# seed " << path.seed << "\n# horizon " << format_double(path.horizon) << "\n# jumps " << path.size()
      << "\n# columns time mark_index\n";
  for (std::size_t j = 0; j < path.size(); ++j) {
    out << format_double(path.times[j]) << '\t' << path.marks[j] << '\n';
  }
}

}  // namespace mildsim
