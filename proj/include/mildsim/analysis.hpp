#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mildsim/model.hpp"
#include "mildsim/noise.hpp"
#include "mildsim/report.hpp"
#include "mildsim/solver.hpp"
#include "mildsim/space.hpp"
#include "mildsim/stats.hpp"

namespace mildsim {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// sup_m |u(t_m) - v(t_m)| over the common grid.
[[nodiscard]] double sup_gap(const Trajectory& u, const Trajectory& v, const HilbertSpace& space);

/// Validates a refinement list: at least `min_count` positive steps, each half
/// the previous once sorted in decreasing order. Returns the sorted list.
[[nodiscard]] std::vector<double> dyadic_steps(std::vector<double> dts, std::size_t min_count = 3);

// ---------------------------------------------------------------------------
// Uniqueness by coupling

struct CouplingOptions {
  std::vector<double> dts;
  Scheme first = Scheme::exp_euler;
  Scheme second = Scheme::resolvent_implicit;
  /// Used by yosida_explicit members.
  double epsilon = 0.0;
  double min_order = 0.9;
};

struct CouplingReport {
  /// Decreasing.
  std::vector<double> dts;
  std::vector<double> gaps;
  std::vector<double> integrability_first;
  std::vector<double> integrability_second;
  std::size_t stiffness_warnings = 0;
  double order = kNaN;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] ExperimentReport to_report() const;
};

/// Both schemes on one path (generated at the finest dt and summed to coarser
/// grids). PASS needs finite integrability on every run, strictly decreasing
/// gaps and a fitted order >= min_order; gaps that are all exactly zero pass
/// with infinite order. A blow-up makes the result INCONCLUSIVE.
[[nodiscard]] CouplingReport coupling_uniqueness_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                            const CouplingOptions& options);

// ---------------------------------------------------------------------------
// Gronwall contraction

struct ContractionOptions {
  double dt = 1.0 / 64.0;
  Scheme scheme = Scheme::exp_euler;
  double epsilon = 0.0;
  /// Bound e^{-rate_multiplier * alpha * t}.
  double rate_multiplier = 2.0;
  double se_factor = 3.0;
  std::size_t margin_samples = 10000;
  double margin_radius = 5.0;
  std::size_t workers = default_workers();
};

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> mean_sq_gap;
  std::vector<double> std_error;
  std::vector<double> bound;
  double initial_gap_sq = 0.0;
  double alpha = 0.0;
  double rate = 0.0;
  MarginReport margin;
  std::size_t violations = 0;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] ExperimentReport to_report() const;
};

/// Synchronously coupled ensemble (member i uses seed + i). Throws
/// std::invalid_argument unless alpha > 0, and HypothesisError when the sampled
/// triplet margin is negative.
[[nodiscard]] ContractionReport contraction_experiment(const EquationSpec& spec, const Vector& u0_a,
                                                       const Vector& u0_b, std::size_t ensemble,
                                                       std::uint64_t seed, const ContractionOptions& options = {});

// ---------------------------------------------------------------------------
// Stability estimate and generalized solutions

struct StabilityOptions {
  double dt = 1.0 / 64.0;
  Scheme scheme = Scheme::exp_euler;
  double epsilon = 0.0;
  /// Largest admissible ratio of N between adjacent grid times.
  double jump_factor = 10.0;
  double noise_floor = 1e-14;
  bool check_envelope = true;
  double se_factor = 3.0;
  std::size_t margin_samples = 10000;
  double margin_radius = 5.0;
  std::size_t workers = default_workers();
};

struct StabilityReport {
  std::vector<double> times;
  /// E|u1(t) - u2(t)|^2.
  std::vector<double> numerator;
  std::vector<double> numerator_se;
  /// E|u1_0 - u2_0|^2 + E int_0^t (|B1 - B2|_Q^2 + |G1 - G2|_m^2) along u2.
  std::vector<double> data_distance;
  std::vector<double> data_se;
  /// NaN where the denominator is below the noise floor.
  std::vector<double> N;
  std::vector<double> N_se;
  std::vector<double> envelope;
  double envelope_alpha = 0.0;
  MarginReport margin;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] double max_N() const;
  [[nodiscard]] ExperimentReport to_report() const;
};

/// The two specs must share A, F, T, the Wiener covariance and the mark space.
[[nodiscard]] StabilityReport stability_estimate_experiment(const EquationSpec& spec1, const EquationSpec& spec2,
                                                            std::size_t ensemble, std::uint64_t seed,
                                                            const StabilityOptions& options = {});

/// (J_eps u0, J_eps B-base, J_eps G-shifts); A, F, sigma and the scales are kept.
[[nodiscard]] EquationSpec mollified_spec(const EquationSpec& spec, double epsilon);

struct CauchyOptions {
  double dt = 1.0 / 64.0;
  Scheme scheme = Scheme::exp_euler;
  double epsilon = 0.0;
  /// Admissible d_n / data_n; 0 selects the Gronwall envelope e^{2|alpha| T}.
  double n_bound = 0.0;
  double se_factor = 3.0;
  std::size_t margin_samples = 10000;
  double margin_radius = 5.0;
  std::size_t workers = default_workers();
};

struct CauchyReport {
  /// Consecutive pairs (n, n+1).
  std::vector<double> data_distances;
  std::vector<double> data_se;
  /// sup_t E|u_n(t) - u_{n+1}(t)|^2.
  std::vector<double> solution_distances;
  std::vector<double> solution_se;
  /// solution_distances[n+1] / solution_distances[n].
  std::vector<double> ratios;
  double n_bound = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] double mean_ratio() const;
  [[nodiscard]] ExperimentReport to_report() const;
};

/// Solutions of a data sequence on shared paths. Throws std::invalid_argument
/// unless the consecutive data distances are strictly decreasing (a constant
/// sequence, with all distances zero, is accepted).
[[nodiscard]] CauchyReport generalized_solution_cauchy(const std::vector<EquationSpec>& sequence,
                                                       std::size_t ensemble, std::uint64_t seed,
                                                       const CauchyOptions& options = {});

/// max over grid times of the ensemble mean of |zeta(t)|^2.
[[nodiscard]] double h2_norm(const std::vector<Trajectory>& ensemble, const HilbertSpace& space);

// ---------------------------------------------------------------------------
// Weak formulation

/// Per mode k < k_max, sup over grid times of
///   |<u(t),e~> - <u0,e~> + sum <u,A e~> dt + sum <Fu,e~> dt - <int B dW, e~> - <int G dmu_bar, e~>|
/// with e~_k = e_k / (1 + eps lambda_k).
[[nodiscard]] std::vector<double> weak_solution_residual(const Trajectory& trajectory, const EquationSpec& spec,
                                                         const NoiseSample& noise, double epsilon,
                                                         std::size_t k_max);

struct WeakResidualOptions {
  std::vector<double> dts;
  Scheme scheme = Scheme::resolvent_implicit;
  double epsilon = 0.1;
  std::size_t k_max = 8;
  std::size_t paths = 20;
  double min_order = 0.9;
  std::size_t workers = default_workers();
};

struct WeakResidualReport {
  std::vector<double> dts;
  /// residuals[i][k]: path-mean residual of mode k at dts[i].
  std::vector<std::vector<double>> residuals;
  std::vector<double> orders;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] ExperimentReport to_report() const;
};

[[nodiscard]] WeakResidualReport weak_residual_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                          const WeakResidualOptions& options);

// ---------------------------------------------------------------------------
// Energy bound for the difference of two runs

struct YosidaBoundCheck {
  /// |y_eps(t_m)|^2.
  std::vector<double> lhs;
  /// |y(0)|^2 + 2|eta| sum |y|^2 dt + 2 sup|y_eps - y| sum |g| dt + sum dt^2 |g - A_eps y_eps|^2.
  std::vector<double> rhs;
  double max_excess = 0.0;
  bool holds = false;
};

/// y = u - v, g = Fv - Fu from the two runs; y_eps solves the explicit
/// Yosida recursion y_eps' + A_eps y_eps = g from y(0).
[[nodiscard]] YosidaBoundCheck yosida_energy_bound_check(const EquationSpec& spec, const Trajectory& u,
                                                         const Trajectory& v, double epsilon);

// ---------------------------------------------------------------------------
// Operator algebra and stochastic calculus checks

/// Random (eps, x) pairs: Yosida identity, resolvent identity, contraction and
/// monotonicity of A_eps, all to `tolerance`.
[[nodiscard]] ExperimentReport resolvent_algebra_experiment(const SpectralOperator& A, std::size_t samples,
                                                            std::uint64_t seed, double tolerance = 1e-9);

struct TrotterKatoOptions {
  double dt = 1.0 / 1024.0;
  std::vector<double> epsilons;
  double slope_min = 0.9;
  double slope_max = 1.1;
};

struct TrotterKatoReport {
  std::vector<double> epsilons;
  std::vector<double> gaps;
  double slope = kNaN;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] ExperimentReport to_report() const;
};

/// sup-norm gap between yosida_explicit(eps) and exp_euler on one path at fixed dt.
[[nodiscard]] TrotterKatoReport trotter_kato_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                        const TrotterKatoOptions& options);

struct IsometryOptions {
  std::size_t paths = 10000;
  double dt = 1.0 / 32.0;
  double relative_tolerance = 0.05;
  std::size_t workers = default_workers();
};

/// Ito and compensated Poisson isometries for deterministic step integrands
/// drawn from the seed, using the covariance and mark space of `spec`.
[[nodiscard]] ExperimentReport isometry_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                   const IsometryOptions& options = {});

struct CompensatorOptions {
  std::size_t paths = 10000;
  double dt = 1.0 / 32.0;
  double se_factor = 3.0;
  std::size_t workers = default_workers();
};

/// E sum_jumps |D|^2 against int |D|_m^2 ds for a random deterministic D.
[[nodiscard]] ExperimentReport compensator_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                      const CompensatorOptions& options = {});

struct RegularizationOptions {
  std::size_t instances = 20;
  std::size_t dim = 8;
  double epsilon = 0.3;
  double dt = 1.0 / 32.0;
  double tolerance = 1e-9;
};

/// regularized_coupling_identity on random linear-data instances with
/// exp_euler and resolvent_implicit.
[[nodiscard]] ExperimentReport regularization_identity_experiment(std::uint64_t seed,
                                                                  const RegularizationOptions& options = {});

struct EnergyOptions {
  std::vector<double> dts;
  double epsilon = 1.0 / 64.0;
  std::size_t paths = 100;
  double min_order = 0.9;
  std::size_t workers = default_workers();
};

struct EnergyReport {
  std::vector<double> dts;
  /// |path-mean of (lhs - rhs)|.
  std::vector<double> residuals;
  std::vector<double> residual_se;
  std::vector<double> mean_abs;
  double order = kNaN;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  [[nodiscard]] ExperimentReport to_report() const;
};

/// Discrete square-norm identity for the yosida_explicit solution of the
/// frozen (state-independent) data of `spec`, from y(0) = 0.
[[nodiscard]] EnergyReport energy_identity_experiment(const EquationSpec& spec, std::uint64_t seed,
                                                      const EnergyOptions& options);

}  // namespace mildsim
