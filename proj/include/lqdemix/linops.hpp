#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace lqdemix {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when operand shapes do not agree with an operator or problem.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OperatorKind {
  dense,
  identity,
  dct,
  idct,
  dct2d,
  idct2d,
  gaussian_orthonormal,
};

std::string_view to_string(OperatorKind kind);
/// Accepts the names produced by to_string(); throws std::invalid_argument otherwise.
OperatorKind parse_operator_kind(std::string_view name);

/// Extreme eigenvalues of AᵀA.
struct OperatorBounds {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
};

/*
 * Immutable linear map A : R^cols -> R^rows.
 *
 * Copies share the underlying data, so operators are cheap to pass by value
 * and safe to use from several solver runs at once. Both apply() and
 * apply_adjoint() act column-by-column on a matrix argument, which is how the
 * multichannel solvers push all channels through at once.
 *
 * The DCT kinds use the orthonormal type-II transform (dct) and its inverse
 * (idct = dctᵀ). The 2-D kinds act on images stored row-major, i.e. pixel
 * (r, c) of a height x width image lives at index r * width + c.
 */
class LinearOperator {
 public:
  static LinearOperator identity(Index n);
  static LinearOperator dct(Index n);
  static LinearOperator idct(Index n);
  static LinearOperator dct2d(Index height, Index width);
  static LinearOperator idct2d(Index height, Index width);
  static LinearOperator dense(Matrix matrix);
  /// Rows are Gram-Schmidt orthonormalized i.i.d. standard-normal draws.
  static LinearOperator gaussian_orthonormal(Index rows, Index cols, std::uint64_t seed);

  Index rows() const;
  Index cols() const;
  OperatorKind kind() const;
  /// True when A·Aᵀ = I holds by construction.
  bool row_orthonormal() const;

  Matrix apply(const Eigen::Ref<const Matrix>& x) const;
  Matrix apply_adjoint(const Eigen::Ref<const Matrix>& y) const;

  /// Explicit matrix; O(rows * cols) memory.
  Matrix to_dense() const;

 private:
  struct Impl;
  explicit LinearOperator(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

/// Orthonormal type-II DCT matrix; row k holds the k-th cosine basis vector.
Matrix dct_matrix(Index n);

/*
 * λ_max(AᵀA) and λ_min(AᵀA).
 *
 * Orthonormal kinds use closed forms. Dense operators run Lanczos with full
 * reorthogonalization on AᵀA and stop once the Ritz residual bound of both
 * extreme values drops below 1e-12 * λ_max. Throws std::runtime_error if the
 * iteration budget (1000 steps) is exhausted first.
 */
OperatorBounds spectral_bounds(const LinearOperator& op);

}  // namespace lqdemix
