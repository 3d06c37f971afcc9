#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

namespace mildsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// R^n with the mesh-weighted inner product <u,v> = h * sum_i u_i v_i.
///
/// With h = 1/(n+1) the induced norm approximates the L2(0,1) norm of a grid
/// function on the interior nodes of a uniform mesh.
class HilbertSpace {
 public:
  HilbertSpace(std::size_t dim, double weight);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] double weight() const noexcept { return weight_; }

  [[nodiscard]] double inner(const Vector& u, const Vector& v) const;
  [[nodiscard]] double norm_squared(const Vector& u) const;
  [[nodiscard]] double norm(const Vector& u) const;

  /// Throws std::invalid_argument naming `what` when x has the wrong size.
  void require_dim(const Vector& x, std::string_view what) const;

  friend bool operator==(const HilbertSpace&, const HilbertSpace&) = default;

 private:
  std::size_t dim_;
  double weight_;
};

/// Self-adjoint monotone operator given by its eigendecomposition
/// A e_k = lambda_k e_k, lambda_k >= 0, {e_k} orthonormal in the weighted
/// inner product. Every function of A (resolvent, Yosida approximation,
/// semigroup) acts diagonally on the coordinates <x, e_k>.
class SpectralOperator {
 public:
  /// Columns of `eigenvectors` are the e_k. Validates nonnegativity and
  /// weighted orthonormality (to 1e-10).
  SpectralOperator(HilbertSpace space, Vector eigenvalues, Matrix eigenvectors);

  /// diag(eigenvalues) on R^n with the standard basis and unit weight.
  static SpectralOperator diagonal(const Vector& eigenvalues);

  /// Symmetric positive semidefinite matrix acting on `space`.
  static SpectralOperator from_symmetric(const HilbertSpace& space, const Matrix& matrix);

  [[nodiscard]] const HilbertSpace& space() const noexcept { return space_; }
  [[nodiscard]] std::size_t dim() const noexcept { return space_.dim(); }
  [[nodiscard]] const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  [[nodiscard]] const Matrix& eigenvectors() const noexcept { return eigenvectors_; }
  [[nodiscard]] double max_eigenvalue() const;

  /// k-th eigenvector (0-based).
  [[nodiscard]] Vector mode(std::size_t k) const;

  /// c_k = <x, e_k>.
  [[nodiscard]] Vector coordinates(const Vector& x) const;
  /// sum_k c_k e_k.
  [[nodiscard]] Vector synthesize(const Vector& coords) const;

  [[nodiscard]] Vector apply(const Vector& x) const;

  /// f(A) x for a scalar function f of the eigenvalue.
  template <class F>
  [[nodiscard]] Vector apply_function(F&& f, const Vector& x) const {
    Vector c = coordinates(x);
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      c[k] *= f(eigenvalues_[k]);
    }
    return synthesize(c);
  }

  /// Dense matrix of f(A) in the standard coordinates.
  template <class F>
  [[nodiscard]] Matrix function_matrix(F&& f) const {
    Vector d(eigenvalues_.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      d[k] = f(eigenvalues_[k]);
    }
    return space_.weight() * eigenvectors_ * d.asDiagonal() * eigenvectors_.transpose();
  }

  /// Dense matrix of A itself.
  [[nodiscard]] Matrix dense() const;

  /// c * A for c >= 0 (e.g. a diffusivity in front of the Laplacian).
  [[nodiscard]] SpectralOperator scaled(double factor) const;

 private:
  HilbertSpace space_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

/// J_eps = (I + eps A)^{-1}: scales the k-th mode by 1/(1 + eps lambda_k).
class Resolvent {
 public:
  Resolvent(const SpectralOperator& op, double epsilon);

  [[nodiscard]] double epsilon() const noexcept { return epsilon_; }
  [[nodiscard]] double factor(double lambda) const noexcept { return 1.0 / (1.0 + epsilon_ * lambda); }
  [[nodiscard]] Vector operator()(const Vector& x) const;
  [[nodiscard]] Matrix matrix() const;

 private:
  SpectralOperator op_;
  double epsilon_;
};

[[nodiscard]] Vector resolvent_apply(const SpectralOperator& op, double epsilon, const Vector& x);

/// A_eps x = A J_eps x = (x - J_eps x) / eps.
[[nodiscard]] Vector yosida_apply(const SpectralOperator& op, double epsilon, const Vector& x);

/// e^{-tA} x.
[[nodiscard]] Vector semigroup_apply(const SpectralOperator& op, double t, const Vector& x);

/// (1/h^2) tridiag(-1, 2, -1) on n interior nodes, h = 1/(n+1), with the exact
/// discrete sine eigenpairs lambda_k = (4/h^2) sin^2(k pi h / 2) and
/// (e_k)_i = sqrt(2) sin(k pi i h), orthonormal for the h-weighted product.
[[nodiscard]] SpectralOperator dirichlet_laplacian(std::size_t n);

}  // namespace mildsim
