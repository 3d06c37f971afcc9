#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string_view>
#include <vector>

#include "mildsim/model.hpp"
#include "mildsim/noise.hpp"
#include "mildsim/space.hpp"

namespace mildsim {

enum class Scheme {
  /// u_{n+1} = e^{-dt A} [u_n + increment_n]
  exp_euler,
  /// u_{n+1} = (I + dt A)^{-1} [u_n + increment_n]
  resolvent_implicit,
  /// u_{n+1} = u_n - dt A_eps u_n + increment_n
  yosida_explicit,
};

[[nodiscard]] std::string_view to_string(Scheme scheme) noexcept;
/// std::invalid_argument for unknown names.
[[nodiscard]] Scheme scheme_from_string(std::string_view name);

struct SchemeConfig {
  Scheme scheme = Scheme::exp_euler;
  double dt = 0.0;
  /// Yosida parameter; used by yosida_explicit only.
  double epsilon = 0.0;
};

/// One realized driving path: Wiener increments on the solver grid plus the
/// grid-free Poisson jumps.
struct NoiseSample {
  WienerPath wiener;
  PoissonPath poisson;

  /// Both streams derived from one seed; the Wiener path lives on `grid`.
  static NoiseSample generate(const EquationSpec& spec, const TimeGrid& grid, std::uint64_t seed);
  /// Same realization on a grid `factor` times coarser.
  [[nodiscard]] NoiseSample coarsen(std::size_t factor) const;
  /// Same realization on the grid with step dt (which must be a dyadic-style
  /// multiple of the generated step).
  [[nodiscard]] NoiseSample on_step(double dt) const;
};

struct StiffnessMonitor {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  /// Steps at which dt * max_i |f'(u_i)| >= 1.
  std::size_t violations = 0;
  std::size_t first_step = kNone;
  double worst = 0.0;
};

struct Trajectory {
  TimeGrid grid;
  /// (steps + 1) x n; row m is the state at t_m.
  Matrix states;
  std::uint64_t spec_fingerprint = 0;
  std::uint64_t noise_seed = 0;
  SchemeConfig config;
  /// Left-point quadrature of int_0^T (|F u| + |B(s,u)|_Q^2 + |G(s,u,.)|_m^2) ds.
  double integrability = 0.0;
  StiffnessMonitor stiffness;

  [[nodiscard]] Vector state(std::size_t m) const { return states.row(static_cast<Eigen::Index>(m)).transpose(); }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(states.cols()); }
  [[nodiscard]] bool integrable() const noexcept { return std::isfinite(integrability); }
};

/// Throws ConfigurationError for a non-positive dt, a dt that does not divide T,
/// a missing epsilon, or yosida_explicit outside dt lambda_max / (1 + eps lambda_max) < 2.
void validate_scheme(const SpectralOperator& A, const SchemeConfig& config, double horizon);

/// Dense one-step linear map of the scheme.
[[nodiscard]] Matrix linear_step_matrix(const SpectralOperator& A, const SchemeConfig& config);

/// Time-steps the full equation on the shared noise realization. Jumps are
/// binned into their grid cell and evaluated at the left state; the
/// compensator sum_j m_j G(t_n, u_n, z_j) dt is subtracted in closed form.
/// Throws BlowUpError at the first non-finite state.
[[nodiscard]] Trajectory solve(const EquationSpec& spec, const NoiseSample& noise, const SchemeConfig& config);

[[nodiscard]] Trajectory solve_exp_euler(const EquationSpec& spec, const NoiseSample& noise, double dt);
[[nodiscard]] Trajectory solve_resolvent_implicit(const EquationSpec& spec, const NoiseSample& noise, double dt);
[[nodiscard]] Trajectory solve_yosida_explicit(const EquationSpec& spec, const NoiseSample& noise, double dt,
                                               double epsilon);

/// State-independent data of dy + Ay dt + g dt = C dW + int_Z D dmu_bar, one
/// value per grid cell.
struct LinearData {
  std::vector<Vector> drift;
  std::vector<Matrix> diffusion;
  /// jumps[n][j] = D(t_n, z_j).
  std::vector<std::vector<Vector>> jumps;

  [[nodiscard]] std::size_t steps() const noexcept { return drift.size(); }
  static LinearData zero(std::size_t steps, std::size_t dim, std::size_t noise_dim, std::size_t atoms);
  /// Frozen coefficients of a spec; std::invalid_argument when F, B or G depend on the state.
  static LinearData from_spec(const EquationSpec& spec, const TimeGrid& grid);
  /// (J_eps g, J_eps C, J_eps D).
  [[nodiscard]] LinearData regularized(const SpectralOperator& A, double epsilon) const;
};

[[nodiscard]] Trajectory solve_linear(const SpectralOperator& A, const MarkSpace& marks, const LinearData& data,
                                      const NoiseSample& noise, const SchemeConfig& config, const Vector& y0);

/// sup_n |y_eps(t_n) - J_eps y(t_n)|, where y solves with (g, C, D) and y_eps
/// with (J_eps g, J_eps C, J_eps D) on the same path and scheme, both from 0.
[[nodiscard]] double regularized_coupling_identity(const SpectralOperator& A, const MarkSpace& marks,
                                                   const LinearData& data, const NoiseSample& noise,
                                                   const SchemeConfig& config, double epsilon);
/// Same, with the frozen coefficients of a spec (which must be state independent).
[[nodiscard]] double regularized_coupling_identity(const EquationSpec& spec, const NoiseSample& noise,
                                                   const SchemeConfig& config, double epsilon);

/// Both sides of the discrete square-norm identity at T for a yosida_explicit
/// trajectory of linear data:
///   lhs = |y_N|^2 - |y_0|^2 + 2 sum <A_eps y_n, y_n> dt + 2 sum <g_n, y_n> dt
///   rhs = 2 sum <y_n, C_n dW_n> + 2 sum <y_n, dJbar_n> + sum |C_n|_Q^2 dt + sum_jumps |D|^2
struct EnergyBalance {
  double lhs = 0.0;
  double rhs = 0.0;
  double wiener_martingale = 0.0;
  double jump_martingale = 0.0;
  double wiener_quadratic = 0.0;
  double jump_quadratic = 0.0;

  [[nodiscard]] double discrepancy() const noexcept { return lhs - rhs; }
  [[nodiscard]] double residual() const noexcept { return std::abs(lhs - rhs); }
};

[[nodiscard]] EnergyBalance ito_energy_residual(const Trajectory& y, const SpectralOperator& A,
                                                const MarkSpace& marks, const LinearData& data,
                                                const NoiseSample& noise);

/// Columnar export: header with fingerprint, seed, scheme, dt, eps; rows "t u_1 .. u_n".
void write_trajectory(std::ostream& out, const Trajectory& trajectory);

}  // namespace mildsim
