#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>

#include "mildsim/analysis.hpp"
#include "mildsim/errors.hpp"
#include "mildsim/format.hpp"
#include "mildsim/rng.hpp"

namespace mildsim {

namespace {

constexpr std::uint64_t kAlgebraStream = 0x616c6765;
constexpr std::uint64_t kIntegrandStream = 0x696e7467;
constexpr std::uint64_t kInstanceStream = 0x72656775;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

Vector normal_vector(Rng& rng, std::size_t n) {
  Vector v(idx(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = rng.normal();
  }
  return v;
}

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(idx(rows), idx(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.normal();
    }
  }
  return m;
}

Verdict pass_if(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

}  // namespace

ExperimentReport resolvent_algebra_experiment(const SpectralOperator& A, std::size_t samples, std::uint64_t seed,
                                              double tolerance) {
  if (samples == 0) {
    throw std::invalid_argument("resolvent_algebra_experiment: no samples");
  }
  const HilbertSpace& space = A.space();
  Rng rng(seed, kAlgebraStream);
  double yosida = 0.0;
  double identity = 0.0;
  double contraction = -std::numeric_limits<double>::infinity();
  double monotone = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const double eps = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const double delta = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
    const Vector x = normal_vector(rng, A.dim());
    const Vector jx = resolvent_apply(A, eps, x);
    const Vector ax = yosida_apply(A, eps, x);
    yosida = std::max(yosida, space.norm(ax - (x - jx) / eps));
    const Vector rhs = (delta - eps) * resolvent_apply(A, eps, A.apply(resolvent_apply(A, delta, x)));
    identity = std::max(identity, space.norm(jx - resolvent_apply(A, delta, x) - rhs));
    contraction = std::max(contraction, space.norm(jx) - space.norm(x));
    monotone = std::min(monotone, space.inner(ax, x));
  }
  ExperimentReport r;
  r.name = "resolvent_algebra";
  r.parameters = {{"n", std::to_string(A.dim())}, {"samples", std::to_string(samples)},
                  {"tolerance", format_double(tolerance)}};
  r.add("yosida_identity_error", {}, yosida, 0.0, pass_if(yosida <= tolerance));
  r.add("resolvent_identity_error", {}, identity, 0.0, pass_if(identity <= tolerance));
  r.add("contraction_excess", {}, contraction, 0.0, pass_if(contraction <= tolerance));
  r.add("min_yosida_form", {}, monotone, 0.0, pass_if(monotone >= -1e-12));
  r.verdict = Verdict::pass;
  for (const auto& rec : r.records) {
    r.verdict = combine(r.verdict, rec.verdict);
  }
  return r;
}

// ---------------------------------------------------------------------------

TrotterKatoReport trotter_kato_experiment(const EquationSpec& spec, std::uint64_t seed,
                                          const TrotterKatoOptions& options) {
  if (options.epsilons.size() < 3) {
    throw std::invalid_argument("trotter_kato_experiment: need at least three epsilons");
  }
  TrotterKatoReport report;
  report.epsilons = options.epsilons;
  std::sort(report.epsilons.begin(), report.epsilons.end(), std::greater<>());
  const TimeGrid grid = TimeGrid::with_step(spec.T, options.dt);
  const NoiseSample noise = NoiseSample::generate(spec, grid, seed);
  try {
    const Trajectory reference = solve_exp_euler(spec, noise, options.dt);
    for (double eps : report.epsilons) {
      report.gaps.push_back(sup_gap(solve_yosida_explicit(spec, noise, options.dt, eps), reference, spec.space()));
    }
  } catch (const BlowUpError& e) {
    report.verdict = Verdict::inconclusive;
    report.reason = std::string("blow-up: ") + e.what();
    return report;
  }
  if (std::any_of(report.gaps.begin(), report.gaps.end(), [](double g) { return !(g > 0.0); })) {
    report.verdict = Verdict::inconclusive;
    report.reason = "zero gap; slope undefined";
    return report;
  }
  report.slope = fit_log_slope(report.epsilons, report.gaps);
  const bool ok = report.slope >= options.slope_min && report.slope <= options.slope_max;
  report.verdict = pass_if(ok);
  if (!ok) {
    report.reason = "slope " + format_double(report.slope) + " outside [" + format_double(options.slope_min) +
                    ", " + format_double(options.slope_max) + "]";
  }
  return report;
}

ExperimentReport TrotterKatoReport::to_report() const {
  ExperimentReport r;
  r.name = "trotter_kato";
  r.verdict = verdict;
  Curve c{"log_gap", "log_epsilon", "log_gap", {}, {}, {}};
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    r.add("gap", {{"epsilon", format_double(epsilons[i])}}, gaps[i]);
  }
  for (std::size_t i = gaps.size(); i-- > 0;) {
    if (gaps[i] > 0.0) {
      c.x.push_back(std::log(epsilons[i]));
      c.y.push_back(std::log(gaps[i]));
      c.err.push_back(0.0);
    }
  }
  r.add("slope", {}, slope, 0.0, verdict);
  r.curves.push_back(std::move(c));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

// ---------------------------------------------------------------------------

ExperimentReport isometry_experiment(const EquationSpec& spec, std::uint64_t seed, const IsometryOptions& options) {
  if (options.paths < 2) {
    throw std::invalid_argument("isometry_experiment: need at least two paths");
  }
  const HilbertSpace& space = spec.space();
  const Vector& q = spec.B.q();
  const MarkSpace& marks = spec.G.marks();
  const TimeGrid grid = TimeGrid::with_step(spec.T, options.dt);
  const std::size_t n = spec.dim();

  Rng rng(seed, kIntegrandStream);
  std::vector<Matrix> phi;
  std::vector<std::vector<Vector>> g;
  double ito_exact = 0.0;
  double poisson_exact = 0.0;
  for (std::size_t c = 0; c < grid.steps; ++c) {
    phi.push_back(normal_matrix(rng, n, static_cast<std::size_t>(q.size())));
    std::vector<Vector> atoms;
    for (std::size_t j = 0; j < marks.size(); ++j) {
      atoms.push_back(normal_vector(rng, n));
    }
    ito_exact += grid.dt() * q_norm_squared(phi.back(), q, space);
    poisson_exact += grid.dt() * m_norm_squared(atoms, marks, space);
    g.push_back(std::move(atoms));
  }
  const StepOperatorProcess phi_process = [&](std::size_t c) { return phi[c]; };
  const MarkStepProcess g_process = [&](std::size_t c, std::size_t j) { return g[c][j]; };

  struct Sample {
    double ito;
    double poisson;
    double poisson_first;
  };
  const auto samples = parallel_map(
      options.paths,
      [&](std::size_t i) {
        const WienerPath w = sample_wiener(q, grid, seed + i);
        const PoissonPath p = sample_poisson(marks, spec.T, seed + i);
        const Vector wi = ito_integral(phi_process, w, spec.T);
        const Vector pi = poisson_integral(g_process, p, marks, grid, spec.T, true, n);
        return Sample{space.norm_squared(wi), space.norm_squared(pi), pi[0]};
      },
      options.workers);
  RunningStats ito;
  RunningStats poisson;
  RunningStats centered;
  for (const auto& s : samples) {
    ito.add(s.ito);
    poisson.add(s.poisson);
    centered.add(s.poisson_first);
  }

  ExperimentReport r;
  r.name = "isometry";
  r.parameters = {{"paths", std::to_string(options.paths)}, {"dt", format_double(options.dt)},
                  {"relative_tolerance", format_double(options.relative_tolerance)}};
  auto relative = [](double estimate, double exact) { return std::abs(estimate - exact) / exact; };
  Verdict ito_verdict = Verdict::inconclusive;
  Verdict poisson_verdict = Verdict::inconclusive;
  if (ito_exact > 0.0) {
    ito_verdict = pass_if(relative(ito.mean(), ito_exact) < options.relative_tolerance);
  }
  if (poisson_exact > 0.0) {
    poisson_verdict = pass_if(relative(poisson.mean(), poisson_exact) < options.relative_tolerance);
  }
  r.add("ito_second_moment", {}, ito.mean(), ito.std_error());
  r.add("ito_closed_form", {}, ito_exact);
  r.add("ito_relative_error", {}, ito_exact > 0.0 ? relative(ito.mean(), ito_exact) : kNaN, 0.0, ito_verdict);
  r.add("poisson_second_moment", {}, poisson.mean(), poisson.std_error());
  r.add("poisson_closed_form", {}, poisson_exact);
  r.add("poisson_relative_error", {}, poisson_exact > 0.0 ? relative(poisson.mean(), poisson_exact) : kNaN, 0.0,
        poisson_verdict);
  r.add("poisson_mean_component_1", {}, centered.mean(), centered.std_error(),
        pass_if(std::abs(centered.mean()) <= 3.0 * centered.std_error() || centered.std_error() == 0.0));
  r.verdict = combine(ito_verdict, poisson_verdict);
  return r;
}

ExperimentReport compensator_experiment(const EquationSpec& spec, std::uint64_t seed,
                                        const CompensatorOptions& options) {
  if (options.paths < 2) {
    throw std::invalid_argument("compensator_experiment: need at least two paths");
  }
  const HilbertSpace& space = spec.space();
  const MarkSpace& marks = spec.G.marks();
  const TimeGrid grid = TimeGrid::with_step(spec.T, options.dt);
  Rng rng(seed, kIntegrandStream + 1);
  std::vector<std::vector<Vector>> D;
  for (std::size_t c = 0; c < grid.steps; ++c) {
    std::vector<Vector> atoms;
    for (std::size_t j = 0; j < marks.size(); ++j) {
      atoms.push_back(normal_vector(rng, spec.dim()));
    }
    D.push_back(std::move(atoms));
  }
  const MarkStepProcess process = [&](std::size_t c, std::size_t j) { return D[c][j]; };
  const auto sums = parallel_map(
      options.paths,
      [&](std::size_t i) {
        return quadratic_mark_sum(process, sample_poisson(marks, spec.T, seed + i), marks, grid, spec.T, space);
      },
      options.workers);
  RunningStats jump;
  RunningStats compensator;
  for (const auto& s : sums) {
    jump.add(s.jump_sum);
    compensator.add(s.compensator);
  }
  const double se = std::hypot(jump.std_error(), compensator.std_error());
  const double diff = std::abs(jump.mean() - compensator.mean());
  ExperimentReport r;
  r.name = "compensator";
  r.parameters = {{"paths", std::to_string(options.paths)}, {"dt", format_double(options.dt)}};
  r.add("jump_sum_mean", {}, jump.mean(), jump.std_error());
  r.add("compensator_mean", {}, compensator.mean(), compensator.std_error());
  r.verdict = compensator.mean() > 0.0 ? pass_if(diff <= options.se_factor * se) : Verdict::inconclusive;
  r.add("difference", {}, diff, se, r.verdict);
  return r;
}

// ---------------------------------------------------------------------------

ExperimentReport regularization_identity_experiment(std::uint64_t seed, const RegularizationOptions& options) {
  if (options.instances == 0 || options.dim == 0) {
    throw std::invalid_argument("regularization_identity_experiment: empty problem");
  }
  const Rng root(seed, kInstanceStream);
  const std::size_t n = options.dim;
  const double h = 1.0 / static_cast<double>(n + 1);
  const double horizon = 1.0;
  const TimeGrid grid = TimeGrid::with_step(horizon, options.dt);
  double worst_exp = 0.0;
  double worst_implicit = 0.0;
  double worst_yosida = 0.0;
  for (std::size_t i = 0; i < options.instances; ++i) {
    Rng rng = root.split(i);
    const Eigen::HouseholderQR<Matrix> qr(normal_matrix(rng, n, n));
    const Matrix Q = qr.householderQ();
    Vector eigs(idx(n));
    for (Eigen::Index k = 0; k < eigs.size(); ++k) {
      eigs[k] = rng.uniform(0.0, 50.0);
    }
    const SpectralOperator A(HilbertSpace(n, h), eigs, Q / std::sqrt(h));
    const MarkSpace marks{{1.0, 2.0}, {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)}};
    Vector q(3);
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      q[k] = rng.uniform(0.1, 1.0);
    }
    LinearData data;
    for (std::size_t c = 0; c < grid.steps; ++c) {
      data.drift.push_back(normal_vector(rng, n));
      data.diffusion.push_back(normal_matrix(rng, n, 3));
      data.jumps.push_back({normal_vector(rng, n), normal_vector(rng, n)});
    }
    const std::uint64_t path_seed = rng.next_u64();
    const NoiseSample noise{sample_wiener(q, grid, path_seed), sample_poisson(marks, horizon, path_seed)};
    worst_exp = std::max(worst_exp, regularized_coupling_identity(A, marks, data, noise,
                                                                  {Scheme::exp_euler, options.dt, 0.0},
                                                                  options.epsilon));
    worst_implicit = std::max(worst_implicit, regularized_coupling_identity(
                                                  A, marks, data, noise,
                                                  {Scheme::resolvent_implicit, options.dt, 0.0}, options.epsilon));
    worst_yosida = std::max(worst_yosida, regularized_coupling_identity(
                                              A, marks, data, noise,
                                              {Scheme::yosida_explicit, options.dt, 1.0 / 32.0}, options.epsilon));
  }
  ExperimentReport r;
  r.name = "regularization_identity";
  r.parameters = {{"instances", std::to_string(options.instances)},
                  {"n", std::to_string(n)},
                  {"epsilon", format_double(options.epsilon)},
                  {"dt", format_double(options.dt)}};
  r.add("max_residual", {{"scheme", "exp_euler"}}, worst_exp, 0.0, pass_if(worst_exp <= options.tolerance));
  r.add("max_residual", {{"scheme", "resolvent_implicit"}}, worst_implicit, 0.0,
        pass_if(worst_implicit <= options.tolerance));
  r.add("max_residual", {{"scheme", "yosida_explicit"}}, worst_yosida, 0.0,
        pass_if(worst_yosida <= options.tolerance));
  r.verdict = Verdict::pass;
  for (const auto& rec : r.records) {
    r.verdict = combine(r.verdict, rec.verdict);
  }
  return r;
}

// ---------------------------------------------------------------------------

EnergyReport energy_identity_experiment(const EquationSpec& spec, std::uint64_t seed, const EnergyOptions& options) {
  if (options.paths < 2) {
    throw std::invalid_argument("energy_identity_experiment: need at least two paths");
  }
  EnergyReport report;
  report.dts = dyadic_steps(options.dts);
  std::vector<LinearData> data;
  for (double dt : report.dts) {
    validate_scheme(spec.A, {Scheme::yosida_explicit, dt, options.epsilon}, spec.T);
    data.push_back(LinearData::from_spec(spec, TimeGrid::with_step(spec.T, dt)));
  }
  const TimeGrid fine = TimeGrid::with_step(spec.T, report.dts.back());
  const Vector zero = Vector::Zero(idx(spec.dim()));
  std::vector<std::vector<double>> members;
  try {
    members = parallel_map(
        options.paths,
        [&](std::size_t i) {
          const NoiseSample base = NoiseSample::generate(spec, fine, seed + i);
          std::vector<double> out;
          for (std::size_t d = 0; d < report.dts.size(); ++d) {
            const NoiseSample noise = base.on_step(report.dts[d]);
            const SchemeConfig config{Scheme::yosida_explicit, report.dts[d], options.epsilon};
            const Trajectory y = solve_linear(spec.A, spec.G.marks(), data[d], noise, config, zero);
            out.push_back(ito_energy_residual(y, spec.A, spec.G.marks(), data[d], noise).discrepancy());
          }
          return out;
        },
        options.workers);
  } catch (const BlowUpError& e) {
    report.verdict = Verdict::inconclusive;
    report.reason = std::string("blow-up: ") + e.what();
    return report;
  }
  for (std::size_t d = 0; d < report.dts.size(); ++d) {
    RunningStats signed_stats;
    RunningStats abs_stats;
    for (const auto& m : members) {
      signed_stats.add(m[d]);
      abs_stats.add(std::abs(m[d]));
    }
    report.residuals.push_back(std::abs(signed_stats.mean()));
    report.residual_se.push_back(signed_stats.std_error());
    report.mean_abs.push_back(abs_stats.mean());
  }
  if (std::any_of(report.residuals.begin(), report.residuals.end(), [](double v) { return !(v > 0.0); })) {
    const bool all_zero = std::all_of(report.residuals.begin(), report.residuals.end(),
                                      [](double v) { return v == 0.0; });
    report.verdict = all_zero ? Verdict::pass : Verdict::inconclusive;
    report.order = all_zero ? std::numeric_limits<double>::infinity() : kNaN;
    report.reason = all_zero ? "identity exact" : "vanishing residual; order undefined";
    return report;
  }
  report.order = fit_log_slope(report.dts, report.residuals);
  report.verdict = pass_if(report.order >= options.min_order);
  if (report.verdict == Verdict::fail) {
    report.reason = "fitted order " + format_double(report.order) + " below " + format_double(options.min_order);
  }
  return report;
}

ExperimentReport EnergyReport::to_report() const {
  ExperimentReport r;
  r.name = "energy_identity";
  r.verdict = verdict;
  Curve c{"log_residual", "log_dt", "log_residual", {}, {}, {}};
  for (std::size_t d = 0; d < dts.size(); ++d) {
    const Parameters p{{"dt", format_double(dts[d])}};
    r.add("residual", p, residuals[d], residual_se[d]);
    r.add("mean_abs_discrepancy", p, mean_abs[d]);
  }
  for (std::size_t d = dts.size(); d-- > 0;) {
    if (residuals[d] > 0.0) {
      c.x.push_back(std::log(dts[d]));
      c.y.push_back(std::log(residuals[d]));
      c.err.push_back(residual_se[d] / residuals[d]);
    }
  }
  r.add("order", {}, order, 0.0, verdict);
  r.curves.push_back(std::move(c));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

}  // namespace mildsim
