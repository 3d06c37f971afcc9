#include "mildsim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mildsim/errors.hpp"
#include "mildsim/format.hpp"

namespace mildsim {

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::exp_euler:
      return "exp_euler";
    case Scheme::resolvent_implicit:
      return "resolvent_implicit";
    case Scheme::yosida_explicit:
      return "yosida_explicit";
  }
  return "unknown";
}

Scheme scheme_from_string(std::string_view name) {
  for (Scheme s : {Scheme::exp_euler, Scheme::resolvent_implicit, Scheme::yosida_explicit}) {
    if (to_string(s) == name) {
      return s;
    }
  }
  throw std::invalid_argument("unknown scheme '" + std::string(name) +
                              "' (expected exp_euler, resolvent_implicit or yosida_explicit)");
}

NoiseSample NoiseSample::generate(const EquationSpec& spec, const TimeGrid& grid, std::uint64_t seed) {
  if (std::abs(grid.horizon - spec.T) > 1e-12 * std::max(1.0, spec.T)) {
    throw std::invalid_argument("NoiseSample::generate: grid horizon differs from T");
  }
  return NoiseSample{sample_wiener(spec.B.q(), grid, seed), sample_poisson(spec.G.marks(), spec.T, seed)};
}

NoiseSample NoiseSample::coarsen(std::size_t factor) const { return NoiseSample{wiener.coarsen(factor), poisson}; }

NoiseSample NoiseSample::on_step(double dt) const {
  const double ratio = dt / wiener.grid.dt();
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw std::invalid_argument("NoiseSample::on_step: dt = " + format_double(dt) +
                                " is not a multiple of the generated step " + format_double(wiener.grid.dt()));
  }
  return coarsen(static_cast<std::size_t>(rounded));
}

void validate_scheme(const SpectralOperator& A, const SchemeConfig& config, double horizon) {
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) {
    throw ConfigurationError("dt must be positive, got " + format_double(config.dt));
  }
  try {
    (void)TimeGrid::with_step(horizon, config.dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigurationError(e.what());
  }
  if (config.scheme != Scheme::yosida_explicit) {
    return;
  }
  if (!(config.epsilon > 0.0) || !std::isfinite(config.epsilon)) {
    throw ConfigurationError("yosida_explicit requires epsilon > 0, got " + format_double(config.epsilon));
  }
  const double lmax = A.max_eigenvalue();
  const double bound = config.dt * lmax / (1.0 + config.epsilon * lmax);
  if (!(bound < 2.0)) {
    throw ConfigurationError("yosida_explicit is unstable: dt * lambda_max / (1 + eps * lambda_max) = " +
                             format_double(bound) + " >= 2");
  }
}

namespace {

/// f(A) with an exact identity when f(lambda_k) == 1 for every k.
template <class F>
Matrix function_or_identity(const SpectralOperator& A, F&& f) {
  bool identity = true;
  for (Eigen::Index k = 0; k < A.eigenvalues().size(); ++k) {
    identity = identity && f(A.eigenvalues()[k]) == 1.0;
  }
  const auto n = static_cast<Eigen::Index>(A.dim());
  return identity ? Matrix(Matrix::Identity(n, n)) : A.function_matrix(f);
}

/// One linear step: exp/implicit apply P to (u + increment), yosida adds the
/// increment after P u.
struct Stepper {
  Matrix P;
  bool pre_increment;

  Stepper(const SpectralOperator& A, const SchemeConfig& config)
      : P(linear_step_matrix(A, config)), pre_increment(config.scheme != Scheme::yosida_explicit) {}

  [[nodiscard]] Vector operator()(const Vector& u, const Vector& increment) const {
    return pre_increment ? Vector(P * (u + increment)) : Vector(P * u + increment);
  }
};

void require_finite(const Vector& u, std::size_t step) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i])) {
      throw BlowUpError(step, "non-finite state at step " + std::to_string(step) + ", component " +
                                  std::to_string(i + 1) + " (t_n index " + std::to_string(step) + ")");
    }
  }
}

TimeGrid checked_grid(const NoiseSample& noise, double horizon, const SchemeConfig& config,
                      std::size_t noise_dim) {
  const TimeGrid grid = TimeGrid::with_step(horizon, config.dt);
  if (noise.wiener.grid != grid && !(noise.wiener.grid.steps == grid.steps &&
                                     std::abs(noise.wiener.grid.horizon - grid.horizon) <= 1e-12 * horizon)) {
    throw std::invalid_argument("noise grid (" + std::to_string(noise.wiener.grid.steps) +
                                " steps) does not match dt = " + format_double(config.dt));
  }
  if (noise.wiener.noise_dim() != noise_dim) {
    throw std::invalid_argument("noise dimension " + std::to_string(noise.wiener.noise_dim()) +
                                " does not match the diffusion coefficient (" + std::to_string(noise_dim) + ")");
  }
  return grid;
}

}  // namespace

Matrix linear_step_matrix(const SpectralOperator& A, const SchemeConfig& config) {
  const double dt = config.dt;
  switch (config.scheme) {
    case Scheme::exp_euler:
      return function_or_identity(A, [dt](double l) { return std::exp(-dt * l); });
    case Scheme::resolvent_implicit:
      return function_or_identity(A, [dt](double l) { return 1.0 / (1.0 + dt * l); });
    case Scheme::yosida_explicit: {
      const double eps = config.epsilon;
      return function_or_identity(A, [dt, eps](double l) { return 1.0 - dt * l / (1.0 + eps * l); });
    }
  }
  throw std::invalid_argument("linear_step_matrix: unknown scheme");
}

Trajectory solve(const EquationSpec& spec, const NoiseSample& noise, const SchemeConfig& config) {
  spec.validate();
  validate_scheme(spec.A, config, spec.T);
  const TimeGrid grid = checked_grid(noise, spec.T, config, spec.B.noise_dim());
  const auto cells = noise.poisson.bin(grid);
  const Stepper step(spec.A, config);
  const HilbertSpace& space = spec.space();
  const MarkSpace& marks = spec.G.marks();
  const bool has_jumps = marks.total_mass() > 0.0;
  const double dt = grid.dt();

  Trajectory traj;
  traj.grid = grid;
  traj.states = Matrix::Zero(static_cast<Eigen::Index>(grid.steps + 1), static_cast<Eigen::Index>(spec.dim()));
  traj.states.row(0) = spec.u0.transpose();
  traj.spec_fingerprint = spec.fingerprint();
  traj.noise_seed = noise.wiener.seed;
  traj.config = config;

  Vector u = spec.u0;
  for (std::size_t n = 0; n < grid.steps; ++n) {
    const double t = grid.node(n);
    const Vector Fu = spec.F.apply(u);
    Vector increment = -dt * Fu + spec.B.apply(t, u, noise.wiener.increment(n));
    double g_norm = 0.0;
    if (has_jumps) {
      for (std::size_t atom : cells[n]) {
        increment += spec.G(t, u, atom);
      }
      increment -= dt * spec.G.compensator(t, u);
      g_norm = m_norm_squared(spec.G.values(t, u), marks, space);
    }
    traj.integrability += dt * (space.norm(Fu) + q_norm_squared(spec.B(t, u), spec.B.q(), space) + g_norm);

    if (spec.F.state_dependent()) {
      const double stiffness = dt * spec.F.max_abs_derivative(u);
      traj.stiffness.worst = std::max(traj.stiffness.worst, stiffness);
      if (!(stiffness < 1.0)) {
        if (traj.stiffness.violations == 0) {
          traj.stiffness.first_step = n;
        }
        ++traj.stiffness.violations;
      }
    }

    u = step(u, increment);
    require_finite(u, n + 1);
    traj.states.row(static_cast<Eigen::Index>(n + 1)) = u.transpose();
  }
  return traj;
}

Trajectory solve_exp_euler(const EquationSpec& spec, const NoiseSample& noise, double dt) {
  return solve(spec, noise, SchemeConfig{Scheme::exp_euler, dt, 0.0});
}

Trajectory solve_resolvent_implicit(const EquationSpec& spec, const NoiseSample& noise, double dt) {
  return solve(spec, noise, SchemeConfig{Scheme::resolvent_implicit, dt, 0.0});
}

Trajectory solve_yosida_explicit(const EquationSpec& spec, const NoiseSample& noise, double dt, double epsilon) {
  return solve(spec, noise, SchemeConfig{Scheme::yosida_explicit, dt, epsilon});
}

LinearData LinearData::zero(std::size_t steps, std::size_t dim, std::size_t noise_dim, std::size_t atoms) {
  const auto n = static_cast<Eigen::Index>(dim);
  LinearData data;
  data.drift.assign(steps, Vector::Zero(n));
  data.diffusion.assign(steps, Matrix::Zero(n, static_cast<Eigen::Index>(noise_dim)));
  data.jumps.assign(steps, std::vector<Vector>(atoms, Vector::Zero(n)));
  return data;
}

LinearData LinearData::from_spec(const EquationSpec& spec, const TimeGrid& grid) {
  spec.validate();
  if (spec.F.state_dependent() || spec.B.state_dependent() || spec.G.state_dependent()) {
    throw std::invalid_argument("linear data requires state-independent F, B and G");
  }
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(spec.dim()));
  LinearData data;
  for (std::size_t n = 0; n < grid.steps; ++n) {
    const double t = grid.node(n);
    data.drift.push_back(spec.F.apply(zero));
    data.diffusion.push_back(spec.B(t, zero));
    data.jumps.push_back(spec.G.values(t, zero));
  }
  return data;
}

LinearData LinearData::regularized(const SpectralOperator& A, double epsilon) const {
  const Resolvent J(A, epsilon);
  const Matrix Jm = J.matrix();
  LinearData out = *this;
  for (auto& g : out.drift) {
    g = J(g);
  }
  for (auto& C : out.diffusion) {
    C = Jm * C;
  }
  for (auto& cell : out.jumps) {
    for (auto& D : cell) {
      D = J(D);
    }
  }
  return out;
}

namespace {

void check_linear_data(const LinearData& data, const MarkSpace& marks, const TimeGrid& grid, std::size_t dim,
                       std::size_t noise_dim) {
  if (data.drift.size() != grid.steps || data.diffusion.size() != grid.steps || data.jumps.size() != grid.steps) {
    throw std::invalid_argument("linear data must hold one value per grid cell (" + std::to_string(grid.steps) +
                                ")");
  }
  const auto n = static_cast<Eigen::Index>(dim);
  for (std::size_t c = 0; c < grid.steps; ++c) {
    if (data.drift[c].size() != n || data.diffusion[c].rows() != n ||
        data.diffusion[c].cols() != static_cast<Eigen::Index>(noise_dim) || data.jumps[c].size() != marks.size()) {
      throw std::invalid_argument("linear data has inconsistent dimensions in cell " + std::to_string(c));
    }
    for (const auto& D : data.jumps[c]) {
      if (D.size() != n) {
        throw std::invalid_argument("linear jump data has the wrong dimension in cell " + std::to_string(c));
      }
    }
  }
}

/// Compensated jump increment sum_{jumps in cell} D(z) - dt sum_j m_j D(z_j).
Vector jump_increment(const LinearData& data, const MarkSpace& marks, const std::vector<std::size_t>& cell,
                      std::size_t n, double dt, Eigen::Index dim) {
  Vector out = Vector::Zero(dim);
  for (std::size_t atom : cell) {
    out += data.jumps[n][atom];
  }
  for (std::size_t j = 0; j < marks.size(); ++j) {
    if (marks.weights[j] != 0.0) {
      out -= dt * marks.weights[j] * data.jumps[n][j];
    }
  }
  return out;
}

}  // namespace

Trajectory solve_linear(const SpectralOperator& A, const MarkSpace& marks, const LinearData& data,
                        const NoiseSample& noise, const SchemeConfig& config, const Vector& y0) {
  marks.validate();
  A.space().require_dim(y0, "initial state");
  const double horizon = noise.wiener.grid.horizon;
  validate_scheme(A, config, horizon);
  const TimeGrid grid = checked_grid(noise, horizon, config, noise.wiener.noise_dim());
  check_linear_data(data, marks, grid, A.dim(), noise.wiener.noise_dim());
  const auto cells = noise.poisson.bin(grid);
  const Stepper step(A, config);
  const double dt = grid.dt();
  const auto dim = static_cast<Eigen::Index>(A.dim());

  Trajectory traj;
  traj.grid = grid;
  traj.states = Matrix::Zero(static_cast<Eigen::Index>(grid.steps + 1), dim);
  traj.states.row(0) = y0.transpose();
  traj.noise_seed = noise.wiener.seed;
  traj.config = config;

  Vector y = y0;
  for (std::size_t n = 0; n < grid.steps; ++n) {
    const Vector increment = -dt * data.drift[n] + data.diffusion[n] * noise.wiener.increment(n) +
                             jump_increment(data, marks, cells[n], n, dt, dim);
    traj.integrability += dt * (A.space().norm(data.drift[n]) +
                                q_norm_squared(data.diffusion[n], noise.wiener.q, A.space()) +
                                m_norm_squared(data.jumps[n], marks, A.space()));
    y = step(y, increment);
    require_finite(y, n + 1);
    traj.states.row(static_cast<Eigen::Index>(n + 1)) = y.transpose();
  }
  return traj;
}

double regularized_coupling_identity(const SpectralOperator& A, const MarkSpace& marks, const LinearData& data,
                                     const NoiseSample& noise, const SchemeConfig& config, double epsilon) {
  const Resolvent J(A, epsilon);
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(A.dim()));
  const Trajectory y = solve_linear(A, marks, data, noise, config, zero);
  const Trajectory y_eps = solve_linear(A, marks, data.regularized(A, epsilon), noise, config, zero);
  double sup = 0.0;
  for (std::size_t m = 0; m <= y.grid.steps; ++m) {
    sup = std::max(sup, A.space().norm(y_eps.state(m) - J(y.state(m))));
  }
  return sup;
}

double regularized_coupling_identity(const EquationSpec& spec, const NoiseSample& noise, const SchemeConfig& config,
                                     double epsilon) {
  const LinearData data = LinearData::from_spec(spec, TimeGrid::with_step(spec.T, config.dt));
  return regularized_coupling_identity(spec.A, spec.G.marks(), data, noise, config, epsilon);
}

EnergyBalance ito_energy_residual(const Trajectory& y, const SpectralOperator& A, const MarkSpace& marks,
                                  const LinearData& data, const NoiseSample& noise) {
  if (y.config.scheme != Scheme::yosida_explicit) {
    throw std::invalid_argument("ito_energy_residual: trajectory must come from yosida_explicit");
  }
  const TimeGrid& grid = y.grid;
  (void)checked_grid(noise, grid.horizon, y.config, noise.wiener.noise_dim());
  check_linear_data(data, marks, grid, A.dim(), noise.wiener.noise_dim());
  const HilbertSpace& space = A.space();
  const auto cells = noise.poisson.bin(grid);
  const double dt = grid.dt();
  const double eps = y.config.epsilon;
  const auto dim = static_cast<Eigen::Index>(A.dim());

  EnergyBalance out;
  double dissipation = 0.0;
  double drift = 0.0;
  for (std::size_t n = 0; n < grid.steps; ++n) {
    const Vector yn = y.state(n);
    dissipation += dt * space.inner(yosida_apply(A, eps, yn), yn);
    drift += dt * space.inner(data.drift[n], yn);
    out.wiener_martingale += space.inner(yn, data.diffusion[n] * noise.wiener.increment(n));
    out.jump_martingale += space.inner(yn, jump_increment(data, marks, cells[n], n, dt, dim));
    out.wiener_quadratic += dt * q_norm_squared(data.diffusion[n], noise.wiener.q, space);
    for (std::size_t atom : cells[n]) {
      out.jump_quadratic += space.norm_squared(data.jumps[n][atom]);
    }
  }
  out.lhs = space.norm_squared(y.state(grid.steps)) - space.norm_squared(y.state(0)) + 2.0 * dissipation +
            2.0 * drift;
  out.rhs = 2.0 * out.wiener_martingale + 2.0 * out.jump_martingale + out.wiener_quadratic + out.jump_quadratic;
  return out;
}

void write_trajectory(std::ostream& out, const Trajectory& trajectory) {
  char fingerprint[32];
  std::snprintf(fingerprint, sizeof fingerprint, "%016llx",
                static_cast<unsigned long long>(trajectory.spec_fingerprint));
  out << "# mildsim trajectory v1\n";
  out << "# spec_fingerprint " << fingerprint << "\n# seed " << trajectory.noise_seed << "\n# scheme "
      << to_string(trajectory.config.scheme) << "\n# dt " << format_double(trajectory.config.dt) << "\n# epsilon "
      << format_double(trajectory.config.epsilon) << "\n# columns t u_1..u_n\n";
  for (std::size_t m = 0; m <= trajectory.grid.steps; ++m) {
    out << format_double(trajectory.grid.node(m));
    for (Eigen::Index i = 0; i < trajectory.states.cols(); ++i) {
      out << '\t' << format_double(trajectory.states(static_cast<Eigen::Index>(m), i));
    }
    out << '\n';
  }
}

}  // namespace mildsim
