#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "mildsim/model.hpp"
#include "mildsim/space.hpp"

namespace mildsim {

/// Uniform grid t_n = n * dt on [0, T], dt = T / steps.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 1;

  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t steps);
  /// Grid with step dt; dt must divide the horizon (relative tolerance 1e-12).
  static TimeGrid with_step(double horizon, double dt);

  [[nodiscard]] double dt() const noexcept { return horizon / static_cast<double>(steps); }
  [[nodiscard]] double node(std::size_t n) const noexcept;
  /// Index n with t_n == t; std::invalid_argument when t is not a node.
  [[nodiscard]] std::size_t node_index(double t) const;
  /// Cell n such that t in (t_n, t_{n+1}]; t in (0, T].
  [[nodiscard]] std::size_t cell_of(double t) const noexcept;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

/// Q-Wiener increments dW_{n,k} ~ N(0, dt q_k), independent over (n, k).
struct WienerPath {
  TimeGrid grid;
  Vector q;
  /// steps x d.
  Matrix increments;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t noise_dim() const noexcept { return static_cast<std::size_t>(q.size()); }
  [[nodiscard]] Vector increment(std::size_t n) const { return increments.row(static_cast<Eigen::Index>(n)).transpose(); }
  /// W(t_n) = sum of the first n increments.
  [[nodiscard]] Vector value(std::size_t node) const;
  /// Path on the grid with `factor` times fewer steps, increments summed.
  [[nodiscard]] WienerPath coarsen(std::size_t factor) const;
};

/// Realized compound Poisson measure on (0, T] x Z.
struct PoissonPath {
  double horizon = 1.0;
  /// Strictly increasing jump times in (0, T].
  std::vector<double> times;
  /// Atom index of each jump.
  std::vector<std::size_t> marks;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  /// Jumps grouped by grid cell: result[n] holds the atom indices of the jumps
  /// with time in (t_n, t_{n+1}], in time order.
  [[nodiscard]] std::vector<std::vector<std::size_t>> bin(const TimeGrid& grid) const;
};

/// Stream ids used to derive the two driving streams from one seed.
inline constexpr std::uint64_t kWienerStream = 1;
inline constexpr std::uint64_t kPoissonStream = 2;

[[nodiscard]] WienerPath sample_wiener(const Vector& q, const TimeGrid& grid, std::uint64_t seed);

/// Exact sampling: N ~ Poisson(T m(Z)), times i.i.d. uniform on (0, T] sorted
/// (coincident times are redrawn), marks i.i.d. with P(z_j) = m_j / m(Z).
[[nodiscard]] PoissonPath sample_poisson(const MarkSpace& marks, double horizon, std::uint64_t seed);

/// Adapted step process: Phi(cell) is an n x d operator used on (t_n, t_{n+1}].
using StepOperatorProcess = std::function<Matrix(std::size_t cell)>;
/// Mark-indexed step process: g(cell, atom) in H.
using MarkStepProcess = std::function<Vector(std::size_t cell, std::size_t atom)>;

/// (Phi . W)_t = sum_{t_{n+1} <= t} Phi_n dW_n; t must be a grid node.
[[nodiscard]] Vector ito_integral(const StepOperatorProcess& phi, const WienerPath& path, double t);

/// (g * mu)_t, or (g * mu_bar)_t when `compensated`: the compensator
/// int_0^t sum_j m_j g(s, z_j) ds is integrated exactly cell by cell.
[[nodiscard]] Vector poisson_integral(const MarkStepProcess& g, const PoissonPath& path, const MarkSpace& marks,
                                      const TimeGrid& grid, double t, bool compensated, std::size_t dim);

struct QuadraticMarkSums {
  /// sum_{t_j <= t} |D(t_j, z_j)|^2 (integral against mu).
  double jump_sum = 0.0;
  /// int_0^t |D(s, .)|_m^2 ds (integral against Leb x m).
  double compensator = 0.0;
};

[[nodiscard]] QuadraticMarkSums quadratic_mark_sum(const MarkStepProcess& D, const PoissonPath& path,
                                                   const MarkSpace& marks, const TimeGrid& grid, double t,
                                                   const HilbertSpace& space);

/// Columnar text export (see docs/formats.md).
void write_wiener_path(std::ostream& out, const WienerPath& path);
void write_poisson_path(std::ostream& out, const PoissonPath& path);

}  // namespace mildsim
