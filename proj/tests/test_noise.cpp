#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mildsim/noise.hpp"
#include "mildsim/space.hpp"
#include "mildsim/stats.hpp"

using namespace mildsim;

namespace {

/// Mean within `k` standard errors of `target`.
bool within_se(const RunningStats& s, double target, double k = 3.0) {
  return std::abs(s.mean() - target) <= k * s.std_error();
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid grid = TimeGrid::with_step(1.0, 0.125);
  CHECK(grid.steps == 8);
  CHECK(grid.node(0) == 0.0);
  CHECK(grid.node(8) == 1.0);
  for (std::size_t n = 1; n <= 8; ++n) {
    CHECK(grid.node(n) > grid.node(n - 1));
  }
  CHECK(grid.node_index(0.5) == 4);
  CHECK(grid.cell_of(0.5) == 3);
  CHECK(grid.cell_of(0.51) == 4);
  CHECK(grid.cell_of(1.0) == 7);
  CHECK_THROWS_AS((void)grid.node_index(0.3), std::invalid_argument);
  CHECK_THROWS_AS((void)TimeGrid::with_step(1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(0.0, 4), std::invalid_argument);
}

TEST_CASE("wiener path: degenerate covariance and determinism") {
  const TimeGrid grid(1.0, 64);
  const WienerPath zero = sample_wiener(Vector::Zero(3), grid, 1);
  CHECK(zero.increments.cwiseAbs().maxCoeff() == 0.0);
  const Vector q{{1.0, 0.5}};
  const WienerPath a = sample_wiener(q, grid, 77);
  const WienerPath b = sample_wiener(q, grid, 77);
  CHECK(a.increments == b.increments);
  CHECK(sample_wiener(q, grid, 78).increments != a.increments);
  CHECK_THROWS_AS((void)sample_wiener(Vector{{-1.0}}, grid, 1), std::invalid_argument);
}

TEST_CASE("wiener increment variance equals dt q") {
  const TimeGrid grid(0.01, 1);
  RunningStats mean;
  RunningStats square;
  for (std::uint64_t seed = 0; seed < 100000; ++seed) {
    const double x = sample_wiener(Vector{{2.0}}, grid, seed).increments(0, 0);
    mean.add(x);
    square.add(x * x);
  }
  CHECK(within_se(mean, 0.0));
  CHECK(within_se(square, 0.02));
}

TEST_CASE("wiener increments are independent across steps and modes") {
  const TimeGrid grid(1.0, 4);
  RunningStats cross_time;
  RunningStats cross_mode;
  for (std::uint64_t seed = 0; seed < 20000; ++seed) {
    const WienerPath w = sample_wiener(Vector{{1.0, 1.0}}, grid, seed);
    cross_time.add(w.increments(0, 0) * w.increments(1, 0));
    cross_mode.add(w.increments(2, 0) * w.increments(2, 1));
  }
  CHECK(within_se(cross_time, 0.0));
  CHECK(within_se(cross_mode, 0.0));
}

TEST_CASE("coarsening sums increments") {
  const TimeGrid grid(1.0, 16);
  const WienerPath fine = sample_wiener(Vector{{1.0, 0.3}}, grid, 5);
  const WienerPath coarse = fine.coarsen(4);
  CHECK(coarse.grid.steps == 4);
  for (int n = 0; n < 4; ++n) {
    for (int k = 0; k < 2; ++k) {
      double sum = 0.0;
      for (int i = 0; i < 4; ++i) {
        sum += fine.increments(4 * n + i, k);
      }
      CHECK(coarse.increments(n, k) == doctest::Approx(sum).epsilon(1e-15));
    }
  }
  CHECK((coarse.value(4) - fine.value(16)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS((void)fine.coarsen(3), std::invalid_argument);
}

TEST_CASE("poisson path: zero intensity and basic structure") {
  const MarkSpace none{{1.0, 2.0}, {0.0, 0.0}};
  CHECK(sample_poisson(none, 5.0, 3).size() == 0);
  const MarkSpace marks{{1.0, 2.0}, {3.0, 5.0}};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const PoissonPath p = sample_poisson(marks, 2.0, seed);
    REQUIRE(p.marks.size() == p.times.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p.times[i] > 0.0);
      CHECK(p.times[i] <= 2.0);
      CHECK(p.marks[i] < 2);
      if (i > 0) {
        CHECK(p.times[i] > p.times[i - 1]);
      }
    }
  }
}

TEST_CASE("poisson count mean and mark frequencies") {
  const MarkSpace marks{{1.0, 2.0}, {1.0, 3.0}};
  RunningStats count;
  RunningStats first_mark;
  for (std::uint64_t seed = 0; seed < 100000; ++seed) {
    const PoissonPath p = sample_poisson(marks, 1.0, seed);
    count.add(static_cast<double>(p.size()));
    for (std::size_t mark : p.marks) {
      first_mark.add(mark == 0 ? 1.0 : 0.0);
    }
  }
  CHECK(within_se(count, 4.0));
  // P(z_1) = 1 / 4: frequency ratio 1:3.
  CHECK(within_se(first_mark, 0.25));
}

TEST_CASE("binning places each jump in its cell") {
  const MarkSpace marks{{1.0}, {20.0}};
  const PoissonPath p = sample_poisson(marks, 1.0, 9);
  const TimeGrid grid(1.0, 8);
  const auto bins = p.bin(grid);
  REQUIRE(bins.size() == 8);
  std::size_t total = 0;
  for (const auto& b : bins) {
    total += b.size();
  }
  CHECK(total == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t cell = grid.cell_of(p.times[i]);
    CHECK(p.times[i] > grid.node(cell));
    CHECK(p.times[i] <= grid.node(cell + 1));
  }
}

TEST_CASE("ito integral trivial cases") {
  const TimeGrid grid(1.0, 32);
  const WienerPath w = sample_wiener(Vector::Ones(3), grid, 4);
  const Vector zero = ito_integral([](std::size_t) { return Matrix::Zero(3, 3); }, w, 1.0);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t m : {0u, 5u, 32u}) {
    const double t = grid.node(m);
    const Vector I = ito_integral([](std::size_t) { return Matrix::Identity(3, 3); }, w, t);
    CHECK((I - w.value(m)).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK_THROWS_AS((void)ito_integral([](std::size_t) { return Matrix::Identity(3, 3); }, w, 0.3),
                  std::invalid_argument);
}

TEST_CASE("ito isometry for a deterministic step integrand") {
  const auto A = dirichlet_laplacian(7);
  const HilbertSpace& H = A.space();
  const Vector q{{1.0, 0.5, 0.25}};
  const TimeGrid grid(1.0, 16);
  auto phi = [&](std::size_t cell) {
    return Matrix(A.eigenvectors().leftCols(3) * (1.0 + 0.1 * static_cast<double>(cell)));
  };
  double closed_form = 0.0;
  for (std::size_t n = 0; n < grid.steps; ++n) {
    closed_form += grid.dt() * q_norm_squared(phi(n), q, H);
  }
  RunningStats second_moment;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    second_moment.add(H.norm_squared(ito_integral(phi, sample_wiener(q, grid, seed), 1.0)));
  }
  CHECK(std::abs(second_moment.mean() / closed_form - 1.0) < 0.05);
}

TEST_CASE("compensated poisson integral: zero, martingale and isometry") {
  const HilbertSpace H(3, 0.25);
  const MarkSpace marks{{1.0, 2.0}, {1.5, 0.5}};
  const TimeGrid grid(2.0, 8);
  const Vector c{{1.0, -2.0, 0.5}};
  const Vector d{{0.0, 1.0, 1.0}};
  auto zero = [](std::size_t, std::size_t) { return Vector(Vector::Zero(3)); };
  auto constant = [&](std::size_t, std::size_t) { return c; };
  auto by_atom = [&](std::size_t, std::size_t atom) { return atom == 0 ? c : d; };

  const PoissonPath p0 = sample_poisson(marks, 2.0, 0);
  CHECK(poisson_integral(zero, p0, marks, grid, 2.0, true, 3).cwiseAbs().maxCoeff() == 0.0);

  RunningStats first_component;
  RunningStats second_moment;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const PoissonPath p = sample_poisson(marks, 2.0, seed);
    first_component.add(poisson_integral(constant, p, marks, grid, 2.0, true, 3)[0]);
    second_moment.add(H.norm_squared(poisson_integral(by_atom, p, marks, grid, 2.0, true, 3)));
  }
  CHECK(within_se(first_component, 0.0));
  const double closed_form = 2.0 * (1.5 * H.norm_squared(c) + 0.5 * H.norm_squared(d));
  CHECK(std::abs(second_moment.mean() / closed_form - 1.0) < 0.05);

  // Uncompensated minus compensated is the exact compensator.
  const Vector raw = poisson_integral(constant, p0, marks, grid, 1.0, false, 3);
  const Vector centered = poisson_integral(constant, p0, marks, grid, 1.0, true, 3);
  CHECK(((raw - centered) - 1.0 * 2.0 * c).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("quadratic mark sums") {
  const HilbertSpace H(2, 1.0);
  const MarkSpace marks{{1.0, 2.0}, {0.75, 1.25}};
  const TimeGrid grid(1.0, 10);
  auto unit = [](std::size_t, std::size_t) { return Vector(Vector::Unit(2, 0)); };

  PoissonPath empty;
  empty.horizon = 1.0;
  const auto none = quadratic_mark_sum(unit, empty, marks, grid, 0.6, H);
  CHECK(none.jump_sum == 0.0);
  CHECK(none.compensator == doctest::Approx(2.0 * 0.6).epsilon(1e-14));

  auto D = [](std::size_t cell, std::size_t atom) {
    return Vector(Vector{{std::sin(1.0 + static_cast<double>(cell)), atom == 0 ? 0.5 : -1.5}});
  };
  RunningStats difference;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto sums = quadratic_mark_sum(D, sample_poisson(marks, 1.0, seed), marks, grid, 1.0, H);
    difference.add(sums.jump_sum - sums.compensator);
  }
  CHECK(within_se(difference, 0.0));
}

TEST_CASE("dominated convergence with resolvent-mollified integrands") {
  const auto A = dirichlet_laplacian(9);
  const HilbertSpace& H = A.space();
  const Vector q{{1.0, 1.0, 1.0}};
  const TimeGrid grid(1.0, 32);
  const WienerPath w = sample_wiener(q, grid, 21);
  Matrix base(9, 3);
  base.col(0) = Vector::Ones(9);
  base.col(1) = A.mode(4);
  base.col(2) = A.mode(8);
  auto phi = [&](std::size_t cell) { return Matrix(base * (1.0 + 0.05 * static_cast<double>(cell))); };
  const Vector limit = ito_integral(phi, w, 1.0);
  double previous = INFINITY;
  for (int n : {1, 4, 16, 64, 256, 1024, 4096, 16384, 65536}) {
    const Resolvent J(A, 1.0 / n);
    const Matrix Jm = J.matrix();
    auto phi_n = [&](std::size_t cell) { return Matrix(Jm * phi(cell)); };
    const Vector integral = ito_integral(phi_n, w, 1.0);
    // Linearity: the mollified integral is J applied to the limit integral.
    CHECK(H.norm(integral - J(limit)) < 1e-10);
    const double gap = H.norm(integral - limit);
    CHECK(gap < previous);
    previous = gap;
  }
  CHECK(previous < 0.01 * H.norm(limit));
}

TEST_CASE("refinement consistency of a coarse step integrand") {
  const Vector q{{0.5, 2.0}};
  const TimeGrid fine_grid(1.0, 64);
  const WienerPath fine = sample_wiener(q, fine_grid, 31);
  const WienerPath coarse = fine.coarsen(4);
  Matrix M(3, 2);
  M << 1.0, 2.0, -1.0, 0.5, 0.0, 3.0;
  auto coarse_phi = [&](std::size_t cell) { return Matrix(M * (1.0 + static_cast<double>(cell))); };
  auto fine_phi = [&](std::size_t cell) { return coarse_phi(cell / 4); };
  for (double t : {0.25, 0.5, 1.0}) {
    const Vector a = ito_integral(coarse_phi, coarse, t);
    const Vector b = ito_integral(fine_phi, fine, t);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("path export format") {
  const WienerPath w = sample_wiener(Vector{{1.0, 0.25}}, TimeGrid(1.0, 4), 3);
  std::ostringstream out;
  write_wiener_path(out, w);
  const std::string text = out.str();
  CHECK(text.rfind("# mildsim wiener-path v1\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : text) {
    lines += ch == '\n' ? 1 : 0;
  }
  // Six header lines, one row per step.
  CHECK(lines == 6 + 4);
  CHECK(text.find("\n1\t") != std::string::npos);

  const PoissonPath p = sample_poisson(MarkSpace{{1.0}, {3.0}}, 1.0, 3);
  std::ostringstream jumps;
  write_poisson_path(jumps, p);
  CHECK(jumps.str().rfind("# mildsim poisson-path v1\n", 0) == 0);
}
