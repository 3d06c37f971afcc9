#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mildsim/space.hpp"

namespace mildsim {

/// Real polynomial c_0 + c_1 r + ... + c_p r^p (ascending coefficients).
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coefficients);

  [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  /// Degree after trimming trailing zeros; the zero polynomial has degree 0.
  [[nodiscard]] std::size_t degree() const noexcept;
  [[nodiscard]] double operator()(double r) const noexcept;
  [[nodiscard]] Polynomial derivative() const;
  /// Real roots in [lo, hi] (companion-matrix eigenvalues, polished by Newton).
  [[nodiscard]] std::vector<double> real_roots(double lo, double hi) const;
  /// Exact minimum over [lo, hi]: endpoints plus interior critical points.
  [[nodiscard]] double minimum(double lo, double hi) const;

 private:
  std::vector<double> coefficients_;
};

/// Componentwise polynomial drift F(u)_i = f(u_i), with the shift eta for
/// which u -> F(u) + eta u is expected to be monotone.
struct Nonlinearity {
  Polynomial f;
  double eta = 0.0;

  [[nodiscard]] Vector apply(const Vector& u) const;
  /// max_i |f'(u_i)|.
  [[nodiscard]] double max_abs_derivative(const Vector& u) const;
  /// True when F is affine-constant (f of degree 0): then F carries no state dependence.
  [[nodiscard]] bool state_dependent() const noexcept { return f.degree() > 0; }
};

[[nodiscard]] Vector drift_apply(const Nonlinearity& F, const Vector& u);

/// |B|_Q^2 = sum_k q_k |B k-th column|^2 (Hilbert-Schmidt norm on Q^{1/2}K -> H).
[[nodiscard]] double q_norm_squared(const Matrix& B, const Vector& q, const HilbertSpace& space);

/// B(t, u) = base + sigma * diag(u) * directions, an n x d operator K -> H,
/// with a Q-Wiener covariance q on K = R^d.
///
/// Time-autonomous; t is carried through the interface.
class DiffusionCoefficient {
 public:
  DiffusionCoefficient(Matrix base, Vector q, double sigma, Matrix directions);

  /// B(t, u) = base.
  static DiffusionCoefficient additive(Matrix base, Vector q);
  /// No Wiener forcing at all (d = 1, q = 0).
  static DiffusionCoefficient none(std::size_t n);

  [[nodiscard]] std::size_t state_dim() const noexcept { return static_cast<std::size_t>(base_.rows()); }
  [[nodiscard]] std::size_t noise_dim() const noexcept { return static_cast<std::size_t>(base_.cols()); }
  [[nodiscard]] const Matrix& base() const noexcept { return base_; }
  [[nodiscard]] const Vector& q() const noexcept { return q_; }
  [[nodiscard]] double sigma() const noexcept { return sigma_; }
  [[nodiscard]] const Matrix& directions() const noexcept { return directions_; }
  [[nodiscard]] bool state_dependent() const noexcept { return sigma_ != 0.0; }

  [[nodiscard]] Matrix operator()(double t, const Vector& u) const;
  /// B(t, u) dw without forming the matrix.
  [[nodiscard]] Vector apply(double t, const Vector& u, const Vector& dw) const;
  /// Lipschitz bound sigma * sqrt(sum_k q_k max_i directions_ik^2) for u -> B(t,u) in |.|_Q.
  [[nodiscard]] double lipschitz() const;

  [[nodiscard]] DiffusionCoefficient with_base(Matrix base) const;

 private:
  Matrix base_;
  Vector q_;
  double sigma_;
  Matrix directions_;
};

/// Finite atomic mark space Z = {z_1, ..., z_J} with weights m_j >= 0.
struct MarkSpace {
  std::vector<double> labels;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
  [[nodiscard]] double total_mass() const noexcept;
  void validate() const;
};

/// |phi|_m^2 = sum_j m_j |phi(z_j)|^2 for phi given by its atom values.
[[nodiscard]] double m_norm_squared(const std::vector<Vector>& values, const MarkSpace& marks,
                                    const HilbertSpace& space);

/// G(t, u, z_j) = shift_j + scale_j * u.
class JumpCoefficient {
 public:
  JumpCoefficient(MarkSpace marks, std::vector<Vector> shifts, std::vector<double> scales);

  static JumpCoefficient none(std::size_t n);

  [[nodiscard]] const MarkSpace& marks() const noexcept { return marks_; }
  [[nodiscard]] const std::vector<Vector>& shifts() const noexcept { return shifts_; }
  [[nodiscard]] const std::vector<double>& scales() const noexcept { return scales_; }
  [[nodiscard]] std::size_t state_dim() const noexcept { return state_dim_; }
  [[nodiscard]] bool state_dependent() const noexcept;

  [[nodiscard]] Vector operator()(double t, const Vector& u, std::size_t atom) const;
  /// All atom values at (t, u).
  [[nodiscard]] std::vector<Vector> values(double t, const Vector& u) const;
  /// sum_j m_j G(t, u, z_j), the compensator drift.
  [[nodiscard]] Vector compensator(double t, const Vector& u) const;
  /// sqrt(sum_j m_j scale_j^2); exact Lipschitz constant in |.|_m.
  [[nodiscard]] double lipschitz() const;

  [[nodiscard]] JumpCoefficient with_shifts(std::vector<Vector> shifts) const;

 private:
  MarkSpace marks_;
  std::vector<Vector> shifts_;
  std::vector<double> scales_;
  std::size_t state_dim_;
};

/// The data of du + Au dt + F(u) dt = B(t,u) dW + int_Z G(t,u(t-),z) mu_bar(dt,dz).
struct EquationSpec {
  SpectralOperator A;
  Nonlinearity F;
  DiffusionCoefficient B;
  JumpCoefficient G;
  Vector u0;
  double T = 1.0;
  /// Claimed margin of the dissipativity triplet inequality.
  double alpha = 0.0;

  /// Checks dimensions and horizons; throws std::invalid_argument.
  void validate() const;
  [[nodiscard]] const HilbertSpace& space() const noexcept { return A.space(); }
  [[nodiscard]] std::size_t dim() const noexcept { return A.dim(); }
  /// Canonical text rendering (17 significant digits) of every field.
  [[nodiscard]] std::string canonical_text() const;
  /// FNV-1a of canonical_text().
  [[nodiscard]] std::uint64_t fingerprint() const;
};

/// Minimal sampled Rayleigh-type margin of a monotonicity hypothesis.
struct MarginReport {
  double margin = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

/// Sampling region for hypothesis checks: u, v uniform in [-radius, radius]^dim.
struct SamplingBox {
  std::size_t dim = 4;
  double radius = 5.0;
};

/// min over sampled pairs of [<Fu - Fv, u - v> + eta |u - v|^2] / |u - v|^2,
/// in the unweighted product (the weight cancels). Pairs with |u - v| < 1e-14
/// are skipped.
[[nodiscard]] MarginReport check_shifted_monotonicity(const Nonlinearity& F, double eta, std::size_t sample_count,
                                                      std::uint64_t seed, SamplingBox box = {});

/// Lower bound min f' + eta over [-radius, radius] for the same margin; valid
/// for every pair in the box by the mean value theorem.
[[nodiscard]] double analytic_monotonicity_margin(const Nonlinearity& F, double eta, double radius);

/// min over sampled (s, u, v) of
///   [2<Fu-Fv,u-v> - |B(s,u)-B(s,v)|_Q^2 - |G(s,u,.)-G(s,v,.)|_m^2 - alpha |u-v|^2] / |u-v|^2.
/// Even samples draw u, v from [-radius, radius]^n, odd samples from a box
/// shrunk by a log-uniform factor in [1e-3, 1].
[[nodiscard]] MarginReport check_dissipativity_triplet(const EquationSpec& spec, std::size_t sample_count,
                                                       std::uint64_t seed, double radius = 5.0);

}  // namespace mildsim
