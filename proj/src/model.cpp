#include "mildsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mildsim/format.hpp"
#include "mildsim/rng.hpp"

namespace mildsim {

Polynomial::Polynomial(std::vector<double> coefficients) : coefficients_(std::move(coefficients)) {
  for (double c : coefficients_) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("Polynomial: coefficients must be finite");
    }
  }
}

std::size_t Polynomial::degree() const noexcept {
  std::size_t d = coefficients_.size();
  while (d > 1 && coefficients_[d - 1] == 0.0) {
    --d;
  }
  return d == 0 ? 0 : d - 1;
}

double Polynomial::operator()(double r) const noexcept {
  double acc = 0.0;
  for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
    acc = acc * r + *it;
  }
  return acc;
}

Polynomial Polynomial::derivative() const {
  if (coefficients_.size() <= 1) {
    return Polynomial({0.0});
  }
  std::vector<double> d(coefficients_.size() - 1);
  for (std::size_t i = 1; i < coefficients_.size(); ++i) {
    d[i - 1] = static_cast<double>(i) * coefficients_[i];
  }
  return Polynomial(std::move(d));
}

std::vector<double> Polynomial::real_roots(double lo, double hi) const {
  const std::size_t p = degree();
  std::vector<double> roots;
  if (p == 0) {
    return roots;
  }
  const double lead = coefficients_[p];
  const auto size = static_cast<Eigen::Index>(p);
  Matrix companion = Matrix::Zero(size, size);
  for (Eigen::Index i = 1; i < size; ++i) {
    companion(i, i - 1) = 1.0;
  }
  for (Eigen::Index i = 0; i < size; ++i) {
    companion(i, size - 1) = -coefficients_[static_cast<std::size_t>(i)] / lead;
  }
  Eigen::EigenSolver<Matrix> solver(companion, false);
  const Polynomial slope = derivative();
  for (const auto& z : solver.eigenvalues()) {
    if (std::abs(z.imag()) > 1e-8 * (1.0 + std::abs(z.real()))) {
      continue;
    }
    double r = z.real();
    for (int it = 0; it < 8; ++it) {
      const double d = slope(r);
      if (d == 0.0) {
        break;
      }
      r -= (*this)(r) / d;
    }
    if (r >= lo && r <= hi) {
      roots.push_back(r);
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

double Polynomial::minimum(double lo, double hi) const {
  double best = std::min((*this)(lo), (*this)(hi));
  for (double r : derivative().real_roots(lo, hi)) {
    best = std::min(best, (*this)(r));
  }
  return best;
}

Vector Nonlinearity::apply(const Vector& u) const {
  return u.unaryExpr([this](double r) { return f(r); });
}

double Nonlinearity::max_abs_derivative(const Vector& u) const {
  const Polynomial slope = f.derivative();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    worst = std::max(worst, std::abs(slope(u[i])));
  }
  return worst;
}

Vector drift_apply(const Nonlinearity& F, const Vector& u) { return F.apply(u); }

double q_norm_squared(const Matrix& B, const Vector& q, const HilbertSpace& space) {
  if (B.cols() != q.size() || static_cast<std::size_t>(B.rows()) != space.dim()) {
    throw std::invalid_argument("q_norm_squared: operator shape does not match (space, Q)");
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    total += q[k] * B.col(k).squaredNorm();
  }
  return space.weight() * total;
}

DiffusionCoefficient::DiffusionCoefficient(Matrix base, Vector q, double sigma, Matrix directions)
    : base_(std::move(base)), q_(std::move(q)), sigma_(sigma), directions_(std::move(directions)) {
  if (base_.cols() != q_.size() || directions_.rows() != base_.rows() || directions_.cols() != base_.cols()) {
    throw std::invalid_argument("DiffusionCoefficient: base, directions and q have inconsistent shapes");
  }
  if (q_.size() == 0) {
    throw std::invalid_argument("DiffusionCoefficient: noise dimension must be at least 1");
  }
  for (Eigen::Index k = 0; k < q_.size(); ++k) {
    if (!(q_[k] >= 0.0) || !std::isfinite(q_[k])) {
      throw std::invalid_argument("DiffusionCoefficient: covariance weight q_" + std::to_string(k + 1) +
                                  " must be nonnegative");
    }
  }
  if (!std::isfinite(sigma_) || !base_.allFinite() || !directions_.allFinite()) {
    throw std::invalid_argument("DiffusionCoefficient: coefficients must be finite");
  }
}

DiffusionCoefficient DiffusionCoefficient::additive(Matrix base, Vector q) {
  Matrix directions = Matrix::Zero(base.rows(), base.cols());
  return DiffusionCoefficient(std::move(base), std::move(q), 0.0, std::move(directions));
}

DiffusionCoefficient DiffusionCoefficient::none(std::size_t n) {
  const auto rows = static_cast<Eigen::Index>(n);
  return additive(Matrix::Zero(rows, 1), Vector::Zero(1));
}

Matrix DiffusionCoefficient::operator()(double /*t*/, const Vector& u) const {
  if (u.size() != base_.rows()) {
    throw std::invalid_argument("DiffusionCoefficient: state has the wrong dimension");
  }
  if (sigma_ == 0.0) {
    return base_;
  }
  return base_ + sigma_ * (u.asDiagonal() * directions_);
}

Vector DiffusionCoefficient::apply(double /*t*/, const Vector& u, const Vector& dw) const {
  Vector out = base_ * dw;
  if (sigma_ != 0.0) {
    out.array() += sigma_ * u.array() * (directions_ * dw).array();
  }
  return out;
}

double DiffusionCoefficient::lipschitz() const {
  if (sigma_ == 0.0) {
    return 0.0;
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < q_.size(); ++k) {
    total += q_[k] * directions_.col(k).array().square().maxCoeff();
  }
  return std::abs(sigma_) * std::sqrt(total);
}

DiffusionCoefficient DiffusionCoefficient::with_base(Matrix base) const {
  return DiffusionCoefficient(std::move(base), q_, sigma_, directions_);
}

double MarkSpace::total_mass() const noexcept {
  double total = 0.0;
  for (double m : weights) {
    total += m;
  }
  return total;
}

void MarkSpace::validate() const {
  if (!labels.empty() && labels.size() != weights.size()) {
    throw std::invalid_argument("MarkSpace: labels and weights differ in length");
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) {
      throw std::invalid_argument("MarkSpace: weight m_" + std::to_string(j + 1) + " must be nonnegative");
    }
  }
}

double m_norm_squared(const std::vector<Vector>& values, const MarkSpace& marks, const HilbertSpace& space) {
  if (values.size() != marks.size()) {
    throw std::invalid_argument("m_norm_squared: one value per atom required");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    total += marks.weights[j] * space.norm_squared(values[j]);
  }
  return total;
}

JumpCoefficient::JumpCoefficient(MarkSpace marks, std::vector<Vector> shifts, std::vector<double> scales)
    : marks_(std::move(marks)), shifts_(std::move(shifts)), scales_(std::move(scales)), state_dim_(0) {
  marks_.validate();
  if (shifts_.size() != marks_.size() || scales_.size() != marks_.size()) {
    throw std::invalid_argument("JumpCoefficient: one shift and one scale per atom required");
  }
  if (shifts_.empty()) {
    throw std::invalid_argument("JumpCoefficient: use JumpCoefficient::none for an empty mark space");
  }
  state_dim_ = static_cast<std::size_t>(shifts_.front().size());
  for (const auto& s : shifts_) {
    if (static_cast<std::size_t>(s.size()) != state_dim_ || !s.allFinite()) {
      throw std::invalid_argument("JumpCoefficient: shifts must be finite vectors of a common dimension");
    }
  }
}

JumpCoefficient JumpCoefficient::none(std::size_t n) {
  MarkSpace marks{{0.0}, {0.0}};
  return JumpCoefficient(std::move(marks), {Vector::Zero(static_cast<Eigen::Index>(n))}, {0.0});
}

bool JumpCoefficient::state_dependent() const noexcept {
  return std::any_of(scales_.begin(), scales_.end(), [](double s) { return s != 0.0; });
}

Vector JumpCoefficient::operator()(double /*t*/, const Vector& u, std::size_t atom) const {
  if (atom >= shifts_.size()) {
    throw std::invalid_argument("JumpCoefficient: atom index out of range");
  }
  if (scales_[atom] == 0.0) {
    return shifts_[atom];
  }
  return shifts_[atom] + scales_[atom] * u;
}

std::vector<Vector> JumpCoefficient::values(double t, const Vector& u) const {
  std::vector<Vector> out;
  out.reserve(shifts_.size());
  for (std::size_t j = 0; j < shifts_.size(); ++j) {
    out.push_back((*this)(t, u, j));
  }
  return out;
}

Vector JumpCoefficient::compensator(double t, const Vector& u) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(state_dim_));
  for (std::size_t j = 0; j < shifts_.size(); ++j) {
    if (marks_.weights[j] != 0.0) {
      out += marks_.weights[j] * (*this)(t, u, j);
    }
  }
  return out;
}

double JumpCoefficient::lipschitz() const {
  double total = 0.0;
  for (std::size_t j = 0; j < scales_.size(); ++j) {
    total += marks_.weights[j] * scales_[j] * scales_[j];
  }
  return std::sqrt(total);
}

JumpCoefficient JumpCoefficient::with_shifts(std::vector<Vector> shifts) const {
  return JumpCoefficient(marks_, std::move(shifts), scales_);
}

void EquationSpec::validate() const {
  const std::size_t n = dim();
  space().require_dim(u0, "EquationSpec: u0");
  if (!u0.allFinite()) {
    throw std::invalid_argument("EquationSpec: u0 must be finite");
  }
  if (B.state_dim() != n) {
    throw std::invalid_argument("EquationSpec: diffusion coefficient maps into the wrong dimension");
  }
  if (G.state_dim() != n) {
    throw std::invalid_argument("EquationSpec: jump coefficient maps into the wrong dimension");
  }
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw std::invalid_argument("EquationSpec: horizon T must be positive");
  }
  if (!std::isfinite(alpha)) {
    throw std::invalid_argument("EquationSpec: alpha must be finite");
  }
}

namespace {

void put_vector(std::ostringstream& out, const char* key, const Vector& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out << ' ' << format_double(v[i]);
  }
  out << '\n';
}

void put_matrix(std::ostringstream& out, const char* key, const Matrix& m) {
  out << key << " " << m.rows() << "x" << m.cols() << " =";
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << ' ' << format_double(m(i, j));
    }
  }
  out << '\n';
}

}  // namespace

std::string EquationSpec::canonical_text() const {
  std::ostringstream out;
  out << "weight = " << format_double(space().weight()) << '\n';
  put_vector(out, "eigenvalues", A.eigenvalues());
  put_matrix(out, "eigenvectors", A.eigenvectors());
  out << "drift =";
  for (double c : F.f.coefficients()) {
    out << ' ' << format_double(c);
  }
  out << "\neta = " << format_double(F.eta) << '\n';
  put_matrix(out, "diffusion.base", B.base());
  put_vector(out, "diffusion.q", B.q());
  out << "diffusion.sigma = " << format_double(B.sigma()) << '\n';
  put_matrix(out, "diffusion.directions", B.directions());
  const auto& marks = G.marks();
  for (std::size_t j = 0; j < marks.size(); ++j) {
    out << "jump." << j << ".label = " << format_double(marks.labels.empty() ? 0.0 : marks.labels[j]) << '\n';
    out << "jump." << j << ".weight = " << format_double(marks.weights[j]) << '\n';
    out << "jump." << j << ".scale = " << format_double(G.scales()[j]) << '\n';
    put_vector(out, "jump.shift", G.shifts()[j]);
  }
  put_vector(out, "u0", u0);
  out << "T = " << format_double(T) << "\nalpha = " << format_double(alpha) << '\n';
  return out.str();
}

std::uint64_t EquationSpec::fingerprint() const { return fnv1a64(canonical_text()); }

MarginReport check_shifted_monotonicity(const Nonlinearity& F, double eta, std::size_t sample_count,
                                        std::uint64_t seed, SamplingBox box) {
  if (sample_count == 0) {
    throw std::invalid_argument("check_shifted_monotonicity: sample_count must be at least 1");
  }
  if (box.dim == 0 || !(box.radius > 0.0)) {
    throw std::invalid_argument("check_shifted_monotonicity: empty sampling box");
  }
  Rng rng(seed, 0x6d6f6e6f);
  const auto n = static_cast<Eigen::Index>(box.dim);
  Vector u(n);
  Vector v(n);
  MarginReport report{std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t s = 0; s < sample_count; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = rng.uniform(-box.radius, box.radius);
      v[i] = rng.uniform(-box.radius, box.radius);
    }
    const Vector y = u - v;
    const double y2 = y.squaredNorm();
    if (std::sqrt(y2) < 1e-14) {
      ++report.skipped;
      continue;
    }
    const double value = ((F.apply(u) - F.apply(v)).dot(y) + eta * y2) / y2;
    report.margin = std::min(report.margin, value);
    ++report.evaluated;
  }
  return report;
}

double analytic_monotonicity_margin(const Nonlinearity& F, double eta, double radius) {
  return F.f.derivative().minimum(-radius, radius) + eta;
}

MarginReport check_dissipativity_triplet(const EquationSpec& spec, std::size_t sample_count, std::uint64_t seed,
                                         double radius) {
  if (sample_count == 0) {
    throw std::invalid_argument("check_dissipativity_triplet: sample_count must be at least 1");
  }
  spec.validate();
  const HilbertSpace& space = spec.space();
  const auto n = static_cast<Eigen::Index>(spec.dim());
  Rng rng(seed, 0x74726970);
  Vector u(n);
  Vector v(n);
  MarginReport report{std::numeric_limits<double>::infinity(), 0, 0};
  const MarkSpace& marks = spec.G.marks();
  for (std::size_t sample = 0; sample < sample_count; ++sample) {
    const double s = rng.uniform(0.0, spec.T);
    const double box = sample % 2 == 0 ? radius : radius * std::pow(10.0, -3.0 * rng.uniform(0.0, 1.0));
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = rng.uniform(-box, box);
      v[i] = rng.uniform(-box, box);
    }
    const Vector y = u - v;
    const double y2 = space.norm_squared(y);
    if (std::sqrt(y2) < 1e-14) {
      ++report.skipped;
      continue;
    }
    const double drift = 2.0 * space.inner(spec.F.apply(u) - spec.F.apply(v), y);
    const double diffusion = q_norm_squared(spec.B(s, u) - spec.B(s, v), spec.B.q(), space);
    double jumps = 0.0;
    for (std::size_t j = 0; j < marks.size(); ++j) {
      jumps += marks.weights[j] * space.norm_squared(spec.G(s, u, j) - spec.G(s, v, j));
    }
    const double value = (drift - diffusion - jumps - spec.alpha * y2) / y2;
    report.margin = std::min(report.margin, value);
    ++report.evaluated;
  }
  return report;
}

}  // namespace mildsim
