#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mildsim/space.hpp"
#include "mildsim/stats.hpp"

using namespace mildsim;

namespace {

/// Explicit (1/h^2) tridiag(-1, 2, -1), built independently of the library.
Matrix tridiagonal_laplacian(int n) {
  const double h = 1.0 / (n + 1);
  Matrix T = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    T(i, i) = 2.0 / (h * h);
    if (i > 0) {
      T(i, i - 1) = -1.0 / (h * h);
    }
    if (i + 1 < n) {
      T(i, i + 1) = -1.0 / (h * h);
    }
  }
  return T;
}

Vector random_vector(std::mt19937_64& gen, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector x(n);
  for (int i = 0; i < n; ++i) {
    x[i] = u(gen);
  }
  return x;
}

}  // namespace

TEST_CASE("hilbert space inner product is h-weighted and positive definite") {
  const HilbertSpace space(4, 0.25);
  const Vector u = Vector::Ones(4);
  CHECK(space.inner(u, u) == doctest::Approx(1.0));
  CHECK(space.norm(Vector::Zero(4)) == 0.0);
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector a = random_vector(gen, 4);
    const Vector b = random_vector(gen, 4);
    CHECK(std::abs(space.inner(a, b)) <= space.norm(a) * space.norm(b) + 1e-14);
    CHECK(space.norm_squared(a) > 0.0);
  }
  CHECK_THROWS_AS(HilbertSpace(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(HilbertSpace(3, 0.0), std::invalid_argument);
}

TEST_CASE("resolvent on a diagonal operator scales by 1/(1 + eps lambda)") {
  const auto A = SpectralOperator::diagonal(Vector{{1.0, 2.0, 4.0}});
  const Vector y = resolvent_apply(A, 0.5, Vector::Ones(3));
  CHECK(y[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("resolvent tends to the identity as eps tends to zero") {
  const auto A = dirichlet_laplacian(7);
  std::mt19937_64 gen(11);
  const Vector x = random_vector(gen, 7);
  const Vector y = resolvent_apply(A, 1e-13, x);
  CHECK((y - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("resolvent of the 3-point laplacian matches a dense linear solve") {
  const auto A = dirichlet_laplacian(3);
  const Vector x{{1.0, 0.0, 0.0}};
  const Matrix M = Matrix::Identity(3, 3) + 0.1 * tridiagonal_laplacian(3);
  const Vector oracle = M.partialPivLu().solve(x);
  CHECK((resolvent_apply(A, 0.1, x) - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("resolvent argument errors") {
  const auto A = dirichlet_laplacian(3);
  CHECK_THROWS_AS((void)resolvent_apply(A, 0.0, Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS((void)resolvent_apply(A, -1.0, Vector::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS((void)resolvent_apply(A, 0.1, Vector::Zero(4)), std::invalid_argument);
  CHECK_THROWS_AS((void)yosida_apply(A, 0.0, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("yosida approximation of a single eigenvalue") {
  const auto A = SpectralOperator::diagonal(Vector{{2.0}});
  const Vector y = yosida_apply(A, 0.5, Vector{{1.0}});
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("yosida approximation equals (x - J x) / eps") {
  const auto A = dirichlet_laplacian(15);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> log_eps(-3.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = std::pow(10.0, log_eps(gen));
    const Vector x = random_vector(gen, 15);
    const Vector lhs = yosida_apply(A, eps, x);
    const Vector rhs = (x - resolvent_apply(A, eps, x)) / eps;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("yosida approximation converges to A on the first eigenvector") {
  const auto A = dirichlet_laplacian(15);
  const Vector x = A.mode(0);
  const Vector Ax = tridiagonal_laplacian(15) * x;
  const double lambda = A.eigenvalues()[0];
  double previous = INFINITY;
  std::vector<double> eps_list;
  std::vector<double> scaled;
  for (int k = 1; k <= 6; ++k) {
    const double eps = std::ldexp(1.0, -k);
    const double err = A.space().norm(yosida_apply(A, eps, x) - Ax);
    // |A_eps e - A e| = lambda^2 eps / (1 + eps lambda) for a unit eigenvector.
    CHECK(err == doctest::Approx(lambda * lambda * eps / (1.0 + eps * lambda)).epsilon(1e-8));
    CHECK(err < previous);
    previous = err;
    eps_list.push_back(eps);
    scaled.push_back(err / eps);
  }
  // err / eps increases toward lambda^2: the error is linear in eps as eps -> 0.
  for (std::size_t i = 1; i < scaled.size(); ++i) {
    CHECK(scaled[i] > scaled[i - 1]);
    CHECK(scaled[i] < lambda * lambda);
  }
  CHECK(scaled.back() > 0.85 * lambda * lambda);
}

TEST_CASE("semigroup basics") {
  const auto D = SpectralOperator::diagonal(Vector{{1.0, 2.0}});
  const Vector y = semigroup_apply(D, std::log(2.0), Vector::Ones(2));
  CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.25).epsilon(1e-14));

  const auto A = dirichlet_laplacian(9);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> time(0.0, 0.1);
  const Vector x = random_vector(gen, 9);
  CHECK((semigroup_apply(A, 0.0, x) - x).cwiseAbs().maxCoeff() < 1e-13);
  for (int trial = 0; trial < 20; ++trial) {
    const double s = time(gen);
    const double t = time(gen);
    const Vector z = random_vector(gen, 9);
    const Vector once = semigroup_apply(A, s + t, z);
    const Vector twice = semigroup_apply(A, s, semigroup_apply(A, t, z));
    CHECK((once - twice).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(A.space().norm(once) <= A.space().norm(z) + 1e-14);
  }
  CHECK_THROWS_AS((void)semigroup_apply(A, -0.1, x), std::invalid_argument);
}

TEST_CASE("dirichlet laplacian eigenpairs") {
  CHECK(dirichlet_laplacian(1).eigenvalues()[0] == doctest::Approx(8.0).epsilon(1e-14));

  const auto A3 = dirichlet_laplacian(3);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(tridiagonal_laplacian(3));
  CHECK(std::abs(A3.eigenvalues()[0] - solver.eigenvalues()[0]) < 1e-10);
  // h = 1/4: lambda_1 = 64 sin^2(pi/8).
  CHECK(A3.eigenvalues()[0] == doctest::Approx(64.0 * std::pow(std::sin(M_PI / 8.0), 2)).epsilon(1e-12));

  const auto A10 = dirichlet_laplacian(10);
  const double h = 1.0 / 11.0;
  const Matrix& V = A10.eigenvectors();
  const Matrix gram = h * V.transpose() * V;
  CHECK((gram - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-10);
  for (int k = 1; k < 10; ++k) {
    CHECK(A10.eigenvalues()[k] > A10.eigenvalues()[k - 1]);
  }
  CHECK(A10.eigenvalues()[0] > 0.0);
  CHECK((A10.dense() - tridiagonal_laplacian(10)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS((void)dirichlet_laplacian(0), std::invalid_argument);
}

TEST_CASE("resolvent identity, monotonicity and commutation on random samples") {
  const auto A = dirichlet_laplacian(31);
  const HilbertSpace& H = A.space();
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> log_eps(-3.0, 1.0);
  std::uniform_real_distribution<double> time(0.0, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const double eps = std::pow(10.0, log_eps(gen));
    const double delta = std::pow(10.0, log_eps(gen));
    const Vector x = random_vector(gen, 31, 3.0);
    const Vector lhs = resolvent_apply(A, eps, x) - resolvent_apply(A, delta, x);
    const Vector rhs = (delta - eps) * resolvent_apply(A, eps, A.apply(resolvent_apply(A, delta, x)));
    CHECK(H.norm(lhs - rhs) <= 1e-9 * std::max(1.0, H.norm(x)));
    CHECK(H.inner(yosida_apply(A, eps, x), x) >= -1e-12);
    CHECK(H.norm(resolvent_apply(A, eps, x)) <= H.norm(x) + 1e-14);
    const double t = time(gen);
    const Vector a = resolvent_apply(A, eps, semigroup_apply(A, t, x));
    const Vector b = semigroup_apply(A, t, resolvent_apply(A, eps, x));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("spectral operator from a symmetric matrix") {
  const HilbertSpace space(10, 1.0 / 11.0);
  const auto A = SpectralOperator::from_symmetric(space, tridiagonal_laplacian(10));
  const auto B = dirichlet_laplacian(10);
  for (int k = 0; k < 10; ++k) {
    CHECK(A.eigenvalues()[k] == doctest::Approx(B.eigenvalues()[k]).epsilon(1e-10));
  }
  std::mt19937_64 gen(9);
  const Vector x = random_vector(gen, 10);
  CHECK((resolvent_apply(A, 0.2, x) - resolvent_apply(B, 0.2, x)).cwiseAbs().maxCoeff() < 1e-10);
  Matrix indefinite = Matrix::Identity(10, 10);
  indefinite(0, 0) = -1.0;
  CHECK_THROWS_AS((void)SpectralOperator::from_symmetric(space, indefinite), std::invalid_argument);
}

TEST_CASE("function matrix of A agrees with apply_function") {
  const auto A = dirichlet_laplacian(8);
  auto f = [](double lambda) { return std::exp(-0.01 * lambda); };
  std::mt19937_64 gen(1);
  const Vector x = random_vector(gen, 8);
  CHECK((A.function_matrix(f) * x - A.apply_function(f, x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Resolvent(A, 0.3).matrix() * x - resolvent_apply(A, 0.3, x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("least squares slope helper") {
  const std::vector<double> x{1.0, 2.0, 4.0, 8.0};
  const std::vector<double> y{3.0, 6.0, 12.0, 24.0};
  CHECK(fit_log_slope(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  RunningStats stats;
  for (double v : {1.0, 2.0, 3.0, 4.0}) {
    stats.add(v);
  }
  CHECK(stats.mean() == doctest::Approx(2.5));
  CHECK(stats.variance() == doctest::Approx(5.0 / 3.0));
}
