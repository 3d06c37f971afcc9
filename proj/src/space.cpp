#include "mildsim/space.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mildsim {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0)) {
    throw std::invalid_argument(std::string(what) + " must be positive");
  }
}

}  // namespace

HilbertSpace::HilbertSpace(std::size_t dim, double weight) : dim_(dim), weight_(weight) {
  if (dim == 0) {
    throw std::invalid_argument("HilbertSpace: dimension must be at least 1");
  }
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("HilbertSpace: weight must be positive and finite");
  }
}

double HilbertSpace::inner(const Vector& u, const Vector& v) const {
  require_dim(u, "inner: u");
  require_dim(v, "inner: v");
  return weight_ * u.dot(v);
}

double HilbertSpace::norm_squared(const Vector& u) const {
  require_dim(u, "norm: u");
  return weight_ * u.squaredNorm();
}

double HilbertSpace::norm(const Vector& u) const { return std::sqrt(norm_squared(u)); }

void HilbertSpace::require_dim(const Vector& x, std::string_view what) const {
  if (static_cast<std::size_t>(x.size()) != dim_) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(dim_) +
                                ", got " + std::to_string(x.size()));
  }
}

SpectralOperator::SpectralOperator(HilbertSpace space, Vector eigenvalues, Matrix eigenvectors)
    : space_(space), eigenvalues_(std::move(eigenvalues)), eigenvectors_(std::move(eigenvectors)) {
  const auto n = static_cast<Eigen::Index>(space_.dim());
  if (eigenvalues_.size() != n || eigenvectors_.rows() != n || eigenvectors_.cols() != n) {
    throw std::invalid_argument("SpectralOperator: eigendata does not match the space dimension");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(eigenvalues_[k] >= 0.0) || !std::isfinite(eigenvalues_[k])) {
      throw std::invalid_argument("SpectralOperator: eigenvalue " + std::to_string(k) +
                                  " is negative or not finite (operator must be monotone)");
    }
  }
  const Matrix gram = space_.weight() * eigenvectors_.transpose() * eigenvectors_;
  const double defect = (gram - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(defect <= 1e-10)) {
    throw std::invalid_argument("SpectralOperator: eigenvectors are not orthonormal in the weighted inner product");
  }
}

SpectralOperator SpectralOperator::diagonal(const Vector& eigenvalues) {
  const auto n = eigenvalues.size();
  return SpectralOperator(HilbertSpace(static_cast<std::size_t>(n), 1.0), eigenvalues, Matrix::Identity(n, n));
}

SpectralOperator SpectralOperator::from_symmetric(const HilbertSpace& space, const Matrix& matrix) {
  const auto n = static_cast<Eigen::Index>(space.dim());
  if (matrix.rows() != n || matrix.cols() != n) {
    throw std::invalid_argument("SpectralOperator::from_symmetric: matrix size does not match the space");
  }
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + matrix.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("SpectralOperator::from_symmetric: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix);
  if (solver.info() != Eigen::Success) {
    throw std::invalid_argument("SpectralOperator::from_symmetric: eigendecomposition failed");
  }
  Vector lambda = solver.eigenvalues();
  const double tol = 1e-12 * (1.0 + lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < n; ++k) {
    if (lambda[k] < -tol) {
      throw std::invalid_argument("SpectralOperator::from_symmetric: matrix is not positive semidefinite");
    }
    lambda[k] = std::max(lambda[k], 0.0);
  }
  // Euclidean-orthonormal columns become weighted-orthonormal after scaling by 1/sqrt(h).
  Matrix vectors = solver.eigenvectors() / std::sqrt(space.weight());
  return SpectralOperator(space, std::move(lambda), std::move(vectors));
}

double SpectralOperator::max_eigenvalue() const { return eigenvalues_.maxCoeff(); }

Vector SpectralOperator::mode(std::size_t k) const {
  if (k >= dim()) {
    throw std::invalid_argument("SpectralOperator::mode: index out of range");
  }
  return eigenvectors_.col(static_cast<Eigen::Index>(k));
}

Vector SpectralOperator::coordinates(const Vector& x) const {
  space_.require_dim(x, "SpectralOperator: x");
  return space_.weight() * (eigenvectors_.transpose() * x);
}

Vector SpectralOperator::synthesize(const Vector& coords) const {
  if (coords.size() != eigenvalues_.size()) {
    throw std::invalid_argument("SpectralOperator::synthesize: wrong number of coordinates");
  }
  return eigenvectors_ * coords;
}

Vector SpectralOperator::apply(const Vector& x) const {
  return apply_function([](double lambda) { return lambda; }, x);
}

Matrix SpectralOperator::dense() const {
  return function_matrix([](double lambda) { return lambda; });
}

SpectralOperator SpectralOperator::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("SpectralOperator::scaled: factor must be nonnegative");
  }
  return SpectralOperator(space_, factor * eigenvalues_, eigenvectors_);
}

Resolvent::Resolvent(const SpectralOperator& op, double epsilon) : op_(op), epsilon_(epsilon) {
  require_positive(epsilon, "Resolvent: epsilon");
}

Vector Resolvent::operator()(const Vector& x) const {
  return op_.apply_function([this](double lambda) { return factor(lambda); }, x);
}

Matrix Resolvent::matrix() const {
  return op_.function_matrix([this](double lambda) { return factor(lambda); });
}

Vector resolvent_apply(const SpectralOperator& op, double epsilon, const Vector& x) {
  require_positive(epsilon, "resolvent_apply: epsilon");
  return op.apply_function([epsilon](double lambda) { return 1.0 / (1.0 + epsilon * lambda); }, x);
}

Vector yosida_apply(const SpectralOperator& op, double epsilon, const Vector& x) {
  require_positive(epsilon, "yosida_apply: epsilon");
  return op.apply_function([epsilon](double lambda) { return lambda / (1.0 + epsilon * lambda); }, x);
}

Vector semigroup_apply(const SpectralOperator& op, double t, const Vector& x) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("semigroup_apply: time must be nonnegative");
  }
  return op.apply_function([t](double lambda) { return std::exp(-t * lambda); }, x);
}

SpectralOperator dirichlet_laplacian(std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("dirichlet_laplacian: n must be at least 1");
  }
  const double h = 1.0 / static_cast<double>(n + 1);
  const auto size = static_cast<Eigen::Index>(n);
  Vector lambda(size);
  Matrix vectors(size, size);
  constexpr double pi = std::numbers::pi;
  for (Eigen::Index k = 1; k <= size; ++k) {
    const double s = std::sin(static_cast<double>(k) * pi * h / 2.0);
    lambda[k - 1] = 4.0 / (h * h) * s * s;
    for (Eigen::Index i = 1; i <= size; ++i) {
      vectors(i - 1, k - 1) = std::numbers::sqrt2 * std::sin(static_cast<double>(k * i) * pi * h);
    }
  }
  return SpectralOperator(HilbertSpace(n, h), std::move(lambda), std::move(vectors));
}

}  // namespace mildsim
