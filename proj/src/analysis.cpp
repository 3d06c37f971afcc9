#include "mildsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mildsim/errors.hpp"
#include "mildsim/format.hpp"

namespace mildsim {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string dt_text(double dt) { return format_double(dt); }

bool same_operator(const SpectralOperator& a, const SpectralOperator& b) {
  return a.space() == b.space() && a.eigenvalues() == b.eigenvalues() && a.eigenvectors() == b.eigenvectors();
}

void require_compatible(const EquationSpec& a, const EquationSpec& b, const char* what) {
  const bool ok = same_operator(a.A, b.A) && a.F.f.coefficients() == b.F.f.coefficients() && a.F.eta == b.F.eta &&
                  a.T == b.T && a.B.q() == b.B.q() && a.G.marks().labels == b.G.marks().labels &&
                  a.G.marks().weights == b.G.marks().weights;
  if (!ok) {
    throw std::invalid_argument(std::string(what) +
                                ": specs must share A, F, T, the Wiener covariance and the mark space");
  }
}

/// |G1(t,u,.) - G2(t,u,.)|_m^2.
double jump_difference(const JumpCoefficient& g1, const JumpCoefficient& g2, double t, const Vector& u,
                       const HilbertSpace& space) {
  auto a = g1.values(t, u);
  const auto b = g2.values(t, u);
  for (std::size_t j = 0; j < a.size(); ++j) {
    a[j] -= b[j];
  }
  return m_norm_squared(a, g1.marks(), space);
}

/// int_0^{t_m} (|B1 - B2|_Q^2 + |G1 - G2|_m^2) along `path`, cumulative per node.
std::vector<double> cumulative_coefficient_distance(const EquationSpec& s1, const EquationSpec& s2,
                                                    const Trajectory& path) {
  const double dt = path.grid.dt();
  const HilbertSpace& space = s1.space();
  std::vector<double> out(path.grid.steps + 1, 0.0);
  for (std::size_t n = 0; n < path.grid.steps; ++n) {
    const double t = path.grid.node(n);
    const Vector u = path.state(n);
    const double b = q_norm_squared(s1.B(t, u) - s2.B(t, u), s1.B.q(), space);
    out[n + 1] = out[n] + dt * (b + jump_difference(s1.G, s2.G, t, u, space));
  }
  return out;
}

double effective_alpha(const EquationSpec& spec, std::size_t samples, std::uint64_t seed, double radius,
                       MarginReport* report) {
  const MarginReport margin = check_dissipativity_triplet(spec, samples, seed, radius);
  if (report != nullptr) {
    *report = margin;
  }
  return spec.alpha + margin.margin;
}

}  // namespace

double sup_gap(const Trajectory& u, const Trajectory& v, const HilbertSpace& space) {
  if (u.states.rows() != v.states.rows() || u.states.cols() != v.states.cols()) {
    throw std::invalid_argument("sup_gap: trajectories live on different grids");
  }
  double sup = 0.0;
  for (Eigen::Index m = 0; m < u.states.rows(); ++m) {
    const Vector d = (u.states.row(m) - v.states.row(m)).transpose();
    sup = std::max(sup, space.norm(d));
  }
  return sup;
}

std::vector<double> dyadic_steps(std::vector<double> dts, std::size_t min_count) {
  if (dts.size() < min_count) {
    throw std::invalid_argument("need at least " + std::to_string(min_count) + " dyadic time steps, got " +
                                std::to_string(dts.size()));
  }
  std::sort(dts.begin(), dts.end(), std::greater<>());
  for (std::size_t i = 0; i < dts.size(); ++i) {
    if (!(dts[i] > 0.0) || !std::isfinite(dts[i])) {
      throw std::invalid_argument("time steps must be positive");
    }
    if (i > 0 && std::abs(dts[i - 1] / dts[i] - 2.0) > 1e-12) {
      throw std::invalid_argument("time steps must be dyadic: " + dt_text(dts[i - 1]) + " is not twice " +
                                  dt_text(dts[i]));
    }
  }
  return dts;
}

// ---------------------------------------------------------------------------

CouplingReport coupling_uniqueness_experiment(const EquationSpec& spec, std::uint64_t seed,
                                              const CouplingOptions& options) {
  CouplingReport report;
  report.dts = dyadic_steps(options.dts);
  const NoiseSample base = NoiseSample::generate(spec, TimeGrid::with_step(spec.T, report.dts.back()), seed);
  for (double dt : report.dts) {
    const NoiseSample noise = base.on_step(dt);
    Trajectory u;
    Trajectory v;
    try {
      u = solve(spec, noise, SchemeConfig{options.first, dt, options.epsilon});
      v = solve(spec, noise, SchemeConfig{options.second, dt, options.epsilon});
    } catch (const BlowUpError& e) {
      report.verdict = Verdict::inconclusive;
      report.reason = "blow-up at dt = " + dt_text(dt) + ": " + e.what();
      return report;
    }
    report.gaps.push_back(sup_gap(u, v, spec.space()));
    report.integrability_first.push_back(u.integrability);
    report.integrability_second.push_back(v.integrability);
    report.stiffness_warnings += u.stiffness.violations + v.stiffness.violations;
  }
  for (std::size_t i = 0; i < report.dts.size(); ++i) {
    if (!std::isfinite(report.integrability_first[i]) || !std::isfinite(report.integrability_second[i])) {
      report.verdict = Verdict::inconclusive;
      report.reason = "integrability integral not finite at dt = " + dt_text(report.dts[i]);
      return report;
    }
  }
  const auto zero = std::count(report.gaps.begin(), report.gaps.end(), 0.0);
  if (static_cast<std::size_t>(zero) == report.gaps.size()) {
    report.order = std::numeric_limits<double>::infinity();
    report.verdict = Verdict::pass;
    report.reason = "gaps identically zero";
    return report;
  }
  if (zero > 0) {
    report.verdict = Verdict::inconclusive;
    report.reason = "some but not all gaps are exactly zero; order undefined";
    return report;
  }
  report.order = fit_log_slope(report.dts, report.gaps);
  bool decreasing = true;
  for (std::size_t i = 1; i < report.gaps.size(); ++i) {
    decreasing = decreasing && report.gaps[i] < report.gaps[i - 1];
  }
  if (!decreasing) {
    report.verdict = Verdict::fail;
    report.reason = "gaps not strictly decreasing under refinement";
  } else if (!(report.order >= options.min_order)) {
    report.verdict = Verdict::fail;
    report.reason = "fitted order " + format_double(report.order) + " below " + format_double(options.min_order);
  } else {
    report.verdict = Verdict::pass;
  }
  return report;
}

ExperimentReport CouplingReport::to_report() const {
  ExperimentReport r;
  r.name = "coupling";
  r.verdict = verdict;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const Parameters p{{"dt", dt_text(dts[i])}};
    r.add("gap", p, gaps[i]);
    r.add("integrability_first", p, integrability_first[i]);
    r.add("integrability_second", p, integrability_second[i]);
  }
  r.add("order", {}, order, 0.0, verdict);
  r.add("stiffness_warnings", {}, static_cast<double>(stiffness_warnings));
  Curve c{"log_gap", "log_dt", "log_gap", {}, {}, {}};
  for (std::size_t i = gaps.size(); i-- > 0;) {
    if (gaps[i] > 0.0) {
      c.x.push_back(std::log(dts[i]));
      c.y.push_back(std::log(gaps[i]));
      c.err.push_back(0.0);
    }
  }
  r.curves.push_back(std::move(c));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

// ---------------------------------------------------------------------------

ContractionReport contraction_experiment(const EquationSpec& spec, const Vector& u0_a, const Vector& u0_b,
                                         std::size_t ensemble, std::uint64_t seed,
                                         const ContractionOptions& options) {
  if (!(spec.alpha > 0.0)) {
    throw std::invalid_argument("contraction_experiment needs alpha > 0, got " + format_double(spec.alpha));
  }
  if (ensemble == 0) {
    throw std::invalid_argument("contraction_experiment: empty ensemble");
  }
  spec.space().require_dim(u0_a, "u0_a");
  spec.space().require_dim(u0_b, "u0_b");
  ContractionReport report;
  report.alpha = spec.alpha;
  report.rate = options.rate_multiplier * spec.alpha;
  report.margin = check_dissipativity_triplet(spec, options.margin_samples, seed, options.margin_radius);
  if (report.margin.margin < 0.0) {
    throw HypothesisError("dissipativity triplet margin " + format_double(report.margin.margin) +
                          " is negative for alpha = " + format_double(spec.alpha));
  }
  const TimeGrid grid = TimeGrid::with_step(spec.T, options.dt);
  const SchemeConfig config{options.scheme, options.dt, options.epsilon};
  validate_scheme(spec.A, config, spec.T);
  EquationSpec spec_a = spec;
  spec_a.u0 = u0_a;
  EquationSpec spec_b = spec;
  spec_b.u0 = u0_b;
  report.initial_gap_sq = spec.space().norm_squared(u0_a - u0_b);

  std::vector<std::vector<double>> members;
  try {
    members = parallel_map(
        ensemble,
        [&](std::size_t i) {
          const NoiseSample noise = NoiseSample::generate(spec, grid, seed + i);
          const Trajectory a = solve(spec_a, noise, config);
          const Trajectory b = solve(spec_b, noise, config);
          std::vector<double> gaps(grid.steps + 1);
          for (std::size_t m = 0; m <= grid.steps; ++m) {
            gaps[m] = spec.space().norm_squared(a.state(m) - b.state(m));
          }
          return gaps;
        },
        options.workers);
  } catch (const BlowUpError& e) {
    report.verdict = Verdict::inconclusive;
    report.reason = std::string("blow-up: ") + e.what();
    return report;
  }
  for (std::size_t m = 0; m <= grid.steps; ++m) {
    RunningStats stats;
    for (const auto& member : members) {
      stats.add(member[m]);
    }
    const double t = grid.node(m);
    const double bound = std::exp(-report.rate * t) * report.initial_gap_sq;
    const double mean = stats.mean();
    const double allowed = mean > 0.0 ? bound * (1.0 + options.se_factor * stats.std_error() / mean) : bound;
    report.times.push_back(t);
    report.mean_sq_gap.push_back(mean);
    report.std_error.push_back(stats.std_error());
    report.bound.push_back(bound);
    if (mean > allowed) {
      ++report.violations;
    }
  }
  report.verdict = report.violations == 0 ? Verdict::pass : Verdict::fail;
  if (report.violations > 0) {
    report.reason = std::to_string(report.violations) + " grid times exceed the contraction bound";
  }
  return report;
}

ExperimentReport ContractionReport::to_report() const {
  ExperimentReport r;
  r.name = "contraction";
  r.verdict = verdict;
  r.add("alpha", {}, alpha);
  r.add("rate", {}, rate);
  r.add("sampled_margin", {{"evaluated", std::to_string(margin.evaluated)}}, margin.margin);
  r.add("initial_gap_sq", {}, initial_gap_sq);
  Curve gap{"log_mean_sq_gap", "t", "log_mean_sq_gap", {}, {}, {}};
  Curve env{"log_bound", "t", "log_bound", {}, {}, {}};
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double mean = mean_sq_gap[m];
    const double allowed = mean > 0.0 ? bound[m] * (1.0 + 3.0 * std_error[m] / mean) : bound[m];
    const Parameters p{{"t", format_double(times[m])}};
    r.add("mean_sq_gap", p, mean, std_error[m], mean <= allowed ? Verdict::pass : Verdict::fail);
    r.add("bound", p, bound[m]);
    if (mean > 0.0) {
      gap.x.push_back(times[m]);
      gap.y.push_back(std::log(mean));
      gap.err.push_back(std_error[m] / mean);
    }
    if (bound[m] > 0.0) {
      env.x.push_back(times[m]);
      env.y.push_back(std::log(bound[m]));
      env.err.push_back(0.0);
    }
  }
  r.add("violations", {}, static_cast<double>(violations), 0.0, verdict);
  r.curves.push_back(std::move(gap));
  r.curves.push_back(std::move(env));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

// ---------------------------------------------------------------------------

StabilityReport stability_estimate_experiment(const EquationSpec& spec1, const EquationSpec& spec2,
                                              std::size_t ensemble, std::uint64_t seed,
                                              const StabilityOptions& options) {
  require_compatible(spec1, spec2, "stability_estimate_experiment");
  if (ensemble == 0) {
    throw std::invalid_argument("stability_estimate_experiment: empty ensemble");
  }
  const TimeGrid grid = TimeGrid::with_step(spec1.T, options.dt);
  const SchemeConfig config{options.scheme, options.dt, options.epsilon};
  validate_scheme(spec1.A, config, spec1.T);
  StabilityReport report;
  report.envelope_alpha =
      effective_alpha(spec1, options.margin_samples, seed, options.margin_radius, &report.margin);
  const double u0_distance = spec1.space().norm_squared(spec1.u0 - spec2.u0);

  struct Member {
    std::vector<double> numerator;
    std::vector<double> data;
  };
  std::vector<Member> members;
  try {
    members = parallel_map(
        ensemble,
        [&](std::size_t i) {
          const NoiseSample noise = NoiseSample::generate(spec1, grid, seed + i);
          const Trajectory u1 = solve(spec1, noise, config);
          const Trajectory u2 = solve(spec2, noise, config);
          Member out;
          out.data = cumulative_coefficient_distance(spec1, spec2, u2);
          for (std::size_t m = 0; m <= grid.steps; ++m) {
            out.numerator.push_back(spec1.space().norm_squared(u1.state(m) - u2.state(m)));
            out.data[m] += u0_distance;
          }
          return out;
        },
        options.workers);
  } catch (const BlowUpError& e) {
    report.verdict = Verdict::inconclusive;
    report.reason = std::string("blow-up: ") + e.what();
    return report;
  }

  bool any_numerator = false;
  bool any_valid = false;
  for (std::size_t m = 0; m <= grid.steps; ++m) {
    RunningStats num;
    RunningStats den;
    for (const auto& member : members) {
      num.add(member.numerator[m]);
      den.add(member.data[m]);
    }
    const double t = grid.node(m);
    report.times.push_back(t);
    report.numerator.push_back(num.mean());
    report.numerator_se.push_back(num.std_error());
    report.data_distance.push_back(den.mean());
    report.data_se.push_back(den.std_error());
    report.envelope.push_back(std::exp(2.0 * std::abs(report.envelope_alpha) * t));
    any_numerator = any_numerator || num.mean() > 0.0;
    if (num.mean() == 0.0) {
      report.N.push_back(0.0);
      report.N_se.push_back(0.0);
      any_valid = true;
    } else if (den.mean() > options.noise_floor) {
      const double n = num.mean() / den.mean();
      const double rel = std::hypot(num.std_error() / num.mean(), den.std_error() / den.mean());
      report.N.push_back(n);
      report.N_se.push_back(n * rel);
      any_valid = true;
    } else {
      report.N.push_back(kNaN);
      report.N_se.push_back(kNaN);
    }
  }

  if (!any_numerator) {
    report.verdict = Verdict::pass;
    report.reason = "identical solutions; N = 0";
    return report;
  }
  if (!any_valid) {
    report.verdict = Verdict::inconclusive;
    report.reason = "data distance below the noise floor at every time";
    return report;
  }
  report.verdict = Verdict::pass;
  std::size_t previous = report.N.size();
  for (std::size_t m = 0; m < report.N.size(); ++m) {
    const double n = report.N[m];
    if (std::isnan(n)) {
      continue;
    }
    if (!std::isfinite(n)) {
      report.verdict = Verdict::fail;
      report.reason = "N not finite at t = " + format_double(report.times[m]);
      return report;
    }
    if (previous < report.N.size() && report.N[previous] > 0.0 && n > 0.0) {
      const double ratio = n / report.N[previous];
      if (ratio > options.jump_factor || ratio < 1.0 / options.jump_factor) {
        report.verdict = Verdict::fail;
        report.reason = "N jumps by a factor " + format_double(ratio) + " at t = " + format_double(report.times[m]);
        return report;
      }
    }
    if (options.check_envelope && n > 0.0) {
      const double allowed = report.envelope[m] * (1.0 + options.se_factor * report.N_se[m] / n);
      if (n > allowed) {
        report.verdict = Verdict::fail;
        report.reason = "N = " + format_double(n) + " exceeds the envelope at t = " + format_double(report.times[m]);
        return report;
      }
    }
    previous = m;
  }
  return report;
}

double StabilityReport::max_N() const {
  double out = 0.0;
  for (double n : N) {
    if (!std::isnan(n)) {
      out = std::max(out, n);
    }
  }
  return out;
}

ExperimentReport StabilityReport::to_report() const {
  ExperimentReport r;
  r.name = "stability";
  r.verdict = verdict;
  r.add("envelope_alpha", {}, envelope_alpha);
  r.add("sampled_margin", {{"evaluated", std::to_string(margin.evaluated)}}, margin.margin);
  Curve curve{"N", "t", "N", {}, {}, {}};
  for (std::size_t m = 0; m < times.size(); ++m) {
    const Parameters p{{"t", format_double(times[m])}};
    r.add("numerator", p, numerator[m], numerator_se[m]);
    r.add("data_distance", p, data_distance[m], data_se[m]);
    r.add("N", p, N[m], N_se[m], std::isnan(N[m]) ? Verdict::inconclusive : Verdict::pass);
    r.add("envelope", p, envelope[m]);
    if (!std::isnan(N[m])) {
      curve.x.push_back(times[m]);
      curve.y.push_back(N[m]);
      curve.err.push_back(N_se[m]);
    }
  }
  r.add("max_N", {}, max_N(), 0.0, verdict);
  r.curves.push_back(std::move(curve));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

EquationSpec mollified_spec(const EquationSpec& spec, double epsilon) {
  const Resolvent J(spec.A, epsilon);
  EquationSpec out = spec;
  out.u0 = J(spec.u0);
  out.B = spec.B.with_base(J.matrix() * spec.B.base());
  std::vector<Vector> shifts;
  for (const auto& s : spec.G.shifts()) {
    shifts.push_back(J(s));
  }
  out.G = spec.G.with_shifts(std::move(shifts));
  return out;
}

CauchyReport generalized_solution_cauchy(const std::vector<EquationSpec>& sequence, std::size_t ensemble,
                                         std::uint64_t seed, const CauchyOptions& options) {
  if (sequence.size() < 2) {
    throw std::invalid_argument("generalized_solution_cauchy: need at least two data sets");
  }
  if (ensemble == 0) {
    throw std::invalid_argument("generalized_solution_cauchy: empty ensemble");
  }
  for (std::size_t i = 1; i < sequence.size(); ++i) {
    require_compatible(sequence[0], sequence[i], "generalized_solution_cauchy");
  }
  const EquationSpec& first = sequence.front();
  const TimeGrid grid = TimeGrid::with_step(first.T, options.dt);
  const SchemeConfig config{options.scheme, options.dt, options.epsilon};
  validate_scheme(first.A, config, first.T);
  const std::size_t pairs = sequence.size() - 1;
  const HilbertSpace& space = first.space();

  struct Member {
    /// gaps[p][m] = |u_p(t_m) - u_{p+1}(t_m)|^2
    std::vector<std::vector<double>> gaps;
    std::vector<double> data;
  };
  CauchyReport report;
  std::vector<Member> members;
  try {
    members = parallel_map(
        ensemble,
        [&](std::size_t i) {
          const NoiseSample noise = NoiseSample::generate(first, grid, seed + i);
          std::vector<Trajectory> solutions;
          for (const auto& spec : sequence) {
            solutions.push_back(solve(spec, noise, config));
          }
          Member out;
          for (std::size_t p = 0; p < pairs; ++p) {
            std::vector<double> g(grid.steps + 1);
            for (std::size_t m = 0; m <= grid.steps; ++m) {
              g[m] = space.norm_squared(solutions[p].state(m) - solutions[p + 1].state(m));
            }
            out.gaps.push_back(std::move(g));
            out.data.push_back(space.norm_squared(sequence[p].u0 - sequence[p + 1].u0) +
                               cumulative_coefficient_distance(sequence[p], sequence[p + 1], solutions[p + 1])
                                   .back());
          }
          return out;
        },
        options.workers);
  } catch (const BlowUpError& e) {
    report.verdict = Verdict::inconclusive;
    report.reason = std::string("blow-up: ") + e.what();
    return report;
  }

  for (std::size_t p = 0; p < pairs; ++p) {
    RunningStats data;
    for (const auto& member : members) {
      data.add(member.data[p]);
    }
    report.data_distances.push_back(data.mean());
    report.data_se.push_back(data.std_error());
    double sup = 0.0;
    double sup_se = 0.0;
    for (std::size_t m = 0; m <= grid.steps; ++m) {
      RunningStats gap;
      for (const auto& member : members) {
        gap.add(member.gaps[p][m]);
      }
      if (gap.mean() > sup) {
        sup = gap.mean();
        sup_se = gap.std_error();
      }
    }
    report.solution_distances.push_back(sup);
    report.solution_se.push_back(sup_se);
  }

  const bool all_zero = std::all_of(report.data_distances.begin(), report.data_distances.end(),
                                    [](double d) { return d == 0.0; });
  if (!all_zero) {
    for (std::size_t p = 1; p < pairs; ++p) {
      if (!(report.data_distances[p] < report.data_distances[p - 1])) {
        throw std::invalid_argument("generalized_solution_cauchy: data distances must be strictly decreasing");
      }
    }
  }
  for (std::size_t p = 1; p < pairs; ++p) {
    report.ratios.push_back(report.solution_distances[p - 1] > 0.0
                                ? report.solution_distances[p] / report.solution_distances[p - 1]
                                : kNaN);
  }
  report.n_bound = options.n_bound > 0.0
                       ? options.n_bound
                       : std::exp(2.0 * std::abs(effective_alpha(first, options.margin_samples, seed,
                                                                 options.margin_radius, nullptr)) *
                                  first.T);
  if (all_zero) {
    const bool solutions_zero = std::all_of(report.solution_distances.begin(), report.solution_distances.end(),
                                            [](double d) { return d == 0.0; });
    report.verdict = solutions_zero ? Verdict::pass : Verdict::fail;
    report.reason = solutions_zero ? "constant sequence" : "identical data gave different solutions";
    return report;
  }
  report.verdict = Verdict::pass;
  for (std::size_t p = 0; p < pairs; ++p) {
    const double d = report.solution_distances[p];
    const double rel = d > 0.0 ? report.solution_se[p] / d : 0.0;
    if (d > report.n_bound * report.data_distances[p] * (1.0 + options.se_factor * rel)) {
      report.verdict = Verdict::fail;
      report.reason = "solution distance not controlled by the data distance for pair " + std::to_string(p);
      return report;
    }
    if (p > 0 && !(d < report.solution_distances[p - 1])) {
      report.verdict = Verdict::fail;
      report.reason = "solution distances not decreasing at pair " + std::to_string(p);
      return report;
    }
  }
  return report;
}

double CauchyReport::mean_ratio() const {
  double total = 0.0;
  std::size_t count = 0;
  for (double r : ratios) {
    if (!std::isnan(r)) {
      total += r;
      ++count;
    }
  }
  return count == 0 ? kNaN : total / static_cast<double>(count);
}

ExperimentReport CauchyReport::to_report() const {
  ExperimentReport r;
  r.name = "generalized_solution";
  r.verdict = verdict;
  Curve curve{"log_solution_distance", "index", "log_solution_distance", {}, {}, {}};
  for (std::size_t p = 0; p < solution_distances.size(); ++p) {
    const Parameters q{{"pair", std::to_string(p)}};
    r.add("data_distance", q, data_distances[p], data_se[p]);
    r.add("solution_distance", q, solution_distances[p], solution_se[p]);
    if (solution_distances[p] > 0.0) {
      curve.x.push_back(static_cast<double>(p));
      curve.y.push_back(std::log(solution_distances[p]));
      curve.err.push_back(solution_se[p] / solution_distances[p]);
    }
  }
  for (std::size_t p = 0; p < ratios.size(); ++p) {
    r.add("ratio", {{"pair", std::to_string(p + 1)}}, ratios[p]);
  }
  r.add("mean_ratio", {}, mean_ratio());
  r.add("n_bound", {}, n_bound, 0.0, verdict);
  r.curves.push_back(std::move(curve));
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

double h2_norm(const std::vector<Trajectory>& ensemble, const HilbertSpace& space) {
  if (ensemble.empty()) {
    throw std::invalid_argument("h2_norm: empty ensemble");
  }
  const Eigen::Index rows = ensemble.front().states.rows();
  for (const auto& traj : ensemble) {
    if (traj.states.rows() != rows || traj.states.cols() != idx(space.dim())) {
      throw std::invalid_argument("h2_norm: trajectories must share one grid and dimension");
    }
  }
  double sup = 0.0;
  for (Eigen::Index m = 0; m < rows; ++m) {
    double mean = 0.0;
    for (const auto& traj : ensemble) {
      mean += space.norm_squared(traj.states.row(m).transpose());
    }
    sup = std::max(sup, mean / static_cast<double>(ensemble.size()));
  }
  return sup;
}

// ---------------------------------------------------------------------------

std::vector<double> weak_solution_residual(const Trajectory& trajectory, const EquationSpec& spec,
                                           const NoiseSample& noise, double epsilon, std::size_t k_max) {
  if (k_max == 0 || k_max > spec.dim()) {
    throw std::invalid_argument("weak_solution_residual: k_max = " + std::to_string(k_max) +
                                " must lie in [1, " + std::to_string(spec.dim()) + "]");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("weak_solution_residual: epsilon must be positive");
  }
  if (trajectory.dim() != spec.dim() || noise.wiener.grid.steps != trajectory.grid.steps) {
    throw std::invalid_argument("weak_solution_residual: trajectory, spec and noise do not match");
  }
  if (!trajectory.integrable()) {
    throw std::invalid_argument("weak_solution_residual: trajectory fails the integrability check");
  }
  const TimeGrid& grid = trajectory.grid;
  const double dt = grid.dt();
  const auto cells = noise.poisson.bin(grid);
  const Vector& lambda = spec.A.eigenvalues();
  const bool has_jumps = spec.G.marks().total_mass() > 0.0;

  const Vector c0 = spec.A.coordinates(spec.u0);
  Vector running = Vector::Zero(idx(spec.dim()));
  std::vector<double> sup(k_max, 0.0);
  for (std::size_t n = 0; n < grid.steps; ++n) {
    const double t = grid.node(n);
    const Vector u = trajectory.state(n);
    Vector jumps = Vector::Zero(u.size());
    if (has_jumps) {
      for (std::size_t atom : cells[n]) {
        jumps += spec.G(t, u, atom);
      }
      jumps -= dt * spec.G.compensator(t, u);
    }
    const Vector forcing = dt * spec.F.apply(u) - spec.B.apply(t, u, noise.wiener.increment(n)) - jumps;
    running += dt * lambda.cwiseProduct(spec.A.coordinates(u)) + spec.A.coordinates(forcing);
    const Vector c = spec.A.coordinates(trajectory.state(n + 1));
    for (std::size_t k = 0; k < k_max; ++k) {
      const auto kk = idx(k);
      const double value = (c[kk] - c0[kk] + running[kk]) / (1.0 + epsilon * lambda[kk]);
      sup[k] = std::max(sup[k], std::abs(value));
    }
  }
  return sup;
}

WeakResidualReport weak_residual_experiment(const EquationSpec& spec, std::uint64_t seed,
                                            const WeakResidualOptions& options) {
  if (options.paths == 0) {
    throw std::invalid_argument("weak_residual_experiment: no paths");
  }
  WeakResidualReport report;
  report.dts = dyadic_steps(options.dts);
  const TimeGrid fine = TimeGrid::with_step(spec.T, report.dts.back());
  std::vector<std::vector<std::vector<double>>> members;
  try {
    members = parallel_map(
        options.paths,
        [&](std::size_t i) {
          const NoiseSample base = NoiseSample::generate(spec, fine, seed + i);
          std::vector<std::vector<double>> out;
          for (double dt : report.dts) {
            const NoiseSample noise = base.on_step(dt);
            const Trajectory u = solve(spec, noise, SchemeConfig{options.scheme, dt, options.epsilon});
            out.push_back(weak_solution_residual(u, spec, noise, options.epsilon, options.k_max));
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
    std::vector<double> mean(options.k_max, 0.0);
    for (const auto& member : members) {
      for (std::size_t k = 0; k < options.k_max; ++k) {
        mean[k] += member[d][k];
      }
    }
    for (auto& m : mean) {
      m /= static_cast<double>(members.size());
    }
    report.residuals.push_back(std::move(mean));
  }
  report.verdict = Verdict::pass;
  for (std::size_t k = 0; k < options.k_max; ++k) {
    std::vector<double> series;
    for (const auto& r : report.residuals) {
      series.push_back(r[k]);
    }
    if (std::any_of(series.begin(), series.end(), [](double v) { return !(v > 0.0); })) {
      report.orders.push_back(kNaN);
      report.verdict = combine(report.verdict, Verdict::inconclusive);
      report.reason = "mode " + std::to_string(k + 1) + " has a vanishing residual; order undefined";
      continue;
    }
    const double order = fit_log_slope(report.dts, series);
    report.orders.push_back(order);
    if (!(order >= options.min_order)) {
      report.verdict = Verdict::fail;
      report.reason = "mode " + std::to_string(k + 1) + " order " + format_double(order) + " below " +
                      format_double(options.min_order);
    }
  }
  return report;
}

ExperimentReport WeakResidualReport::to_report() const {
  ExperimentReport r;
  r.name = "weak_residual";
  r.verdict = verdict;
  for (std::size_t d = 0; d < dts.size(); ++d) {
    for (std::size_t k = 0; k < residuals[d].size(); ++k) {
      r.add("residual", {{"dt", dt_text(dts[d])}, {"k", std::to_string(k + 1)}}, residuals[d][k]);
    }
  }
  for (std::size_t k = 0; k < orders.size(); ++k) {
    r.add("order", {{"k", std::to_string(k + 1)}}, orders[k], 0.0,
          std::isnan(orders[k]) ? Verdict::inconclusive : (orders[k] >= 0.9 ? Verdict::pass : Verdict::fail));
    Curve c{"log_residual_k" + std::to_string(k + 1), "log_dt", "log_residual", {}, {}, {}};
    for (std::size_t d = dts.size(); d-- > 0;) {
      if (residuals[d][k] > 0.0) {
        c.x.push_back(std::log(dts[d]));
        c.y.push_back(std::log(residuals[d][k]));
        c.err.push_back(0.0);
      }
    }
    r.curves.push_back(std::move(c));
  }
  if (!reason.empty()) {
    r.notes.push_back(reason);
  }
  return r;
}

// ---------------------------------------------------------------------------

YosidaBoundCheck yosida_energy_bound_check(const EquationSpec& spec, const Trajectory& u, const Trajectory& v,
                                           double epsilon) {
  if (u.states.rows() != v.states.rows() || u.dim() != spec.dim() || v.dim() != spec.dim()) {
    throw std::invalid_argument("yosida_energy_bound_check: runs must share grid and dimension");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("yosida_energy_bound_check: epsilon must be positive");
  }
  const HilbertSpace& space = spec.space();
  const double dt = u.grid.dt();
  const double eta = std::abs(spec.F.eta);
  YosidaBoundCheck out;
  Vector y_eps = u.state(0) - v.state(0);
  const double start = space.norm_squared(y_eps);
  double energy = 0.0;
  double g_total = 0.0;
  double sup_diff = 0.0;
  double discrete = 0.0;
  out.lhs.push_back(start);
  out.rhs.push_back(start);
  out.holds = true;
  for (std::size_t n = 0; n < u.grid.steps; ++n) {
    const Vector un = u.state(n);
    const Vector vn = v.state(n);
    const Vector y = un - vn;
    const Vector g = spec.F.apply(vn) - spec.F.apply(un);
    const Vector slope = g - yosida_apply(spec.A, epsilon, y_eps);
    energy += dt * space.norm_squared(y);
    g_total += dt * space.norm(g);
    sup_diff = std::max(sup_diff, space.norm(y_eps - y));
    discrete += dt * dt * space.norm_squared(slope);
    y_eps += dt * slope;
    const double lhs = space.norm_squared(y_eps);
    const double rhs = start + 2.0 * eta * energy + 2.0 * sup_diff * g_total + discrete;
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    const double excess = lhs - rhs;
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > 1e-12 * std::max(1.0, rhs)) {
      out.holds = false;
    }
  }
  return out;
}

}  // namespace mildsim
