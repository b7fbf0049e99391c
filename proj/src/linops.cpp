#include "lqdemix/linops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lqdemix/random.hpp"

namespace lqdemix {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_positive(Index n, const char* what) {
  if (n <= 0) {
    throw DimensionError(std::string(what) + " must be positive, got " + std::to_string(n));
  }
}

}  // namespace

struct LinearOperator::Impl {
  OperatorKind kind = OperatorKind::identity;
  Index rows = 0;
  Index cols = 0;
  // dense and gaussian_orthonormal
  Matrix matrix;
  // 1-D DCT kinds use basis_h only; 2-D kinds use both.
  Matrix basis_h;
  Matrix basis_w;
};

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::dense: return "dense";
    case OperatorKind::identity: return "identity";
    case OperatorKind::dct: return "dct";
    case OperatorKind::idct: return "idct";
    case OperatorKind::dct2d: return "dct2d";
    case OperatorKind::idct2d: return "idct2d";
    case OperatorKind::gaussian_orthonormal: return "gaussian-orthonormal";
  }
  return "unknown";
}

OperatorKind parse_operator_kind(std::string_view name) {
  for (auto kind : {OperatorKind::dense, OperatorKind::identity, OperatorKind::dct, OperatorKind::idct,
                    OperatorKind::dct2d, OperatorKind::idct2d, OperatorKind::gaussian_orthonormal}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown operator kind '" + std::string(name) + "'");
}

Matrix dct_matrix(Index n) {
  require_positive(n, "DCT size");
  Matrix c(n, n);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n));
  const double scale = std::sqrt(2.0 / static_cast<double>(n));
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      const double angle = std::numbers::pi * static_cast<double>((2 * i + 1) * k) / static_cast<double>(2 * n);
      c(k, i) = (k == 0 ? scale0 : scale) * std::cos(angle);
    }
  }
  return c;
}

LinearOperator::LinearOperator(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

LinearOperator LinearOperator::identity(Index n) {
  require_positive(n, "identity size");
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::identity;
  impl->rows = impl->cols = n;
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::dct(Index n) {
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::dct;
  impl->rows = impl->cols = n;
  impl->basis_h = dct_matrix(n);
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::idct(Index n) {
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::idct;
  impl->rows = impl->cols = n;
  impl->basis_h = dct_matrix(n);
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::dct2d(Index height, Index width) {
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::dct2d;
  impl->basis_h = dct_matrix(height);
  impl->basis_w = dct_matrix(width);
  impl->rows = impl->cols = height * width;
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::idct2d(Index height, Index width) {
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::idct2d;
  impl->basis_h = dct_matrix(height);
  impl->basis_w = dct_matrix(width);
  impl->rows = impl->cols = height * width;
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::dense(Matrix matrix) {
  require_positive(matrix.rows(), "dense operator rows");
  require_positive(matrix.cols(), "dense operator cols");
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::dense;
  impl->rows = matrix.rows();
  impl->cols = matrix.cols();
  impl->matrix = std::move(matrix);
  return LinearOperator(std::move(impl));
}

LinearOperator LinearOperator::gaussian_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  require_positive(rows, "rows");
  require_positive(cols, "cols");
  if (rows > cols) {
    throw DimensionError("gaussian_orthonormal needs rows <= cols, got " + std::to_string(rows) + " > " +
                         std::to_string(cols));
  }
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (;;) {
      Vector v(cols);
      for (Index j = 0; j < cols; ++j) v(j) = normal(rng);
      const double initial = v.norm();
      // Two passes of modified Gram-Schmidt keep the rows orthonormal to machine precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (Index p = 0; p < i; ++p) v -= q.row(p).dot(v) * q.row(p).transpose();
      }
      const double norm = v.norm();
      if (norm > 1e-8 * initial) {
        q.row(i) = v.transpose() / norm;
        break;
      }
    }
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = OperatorKind::gaussian_orthonormal;
  impl->rows = rows;
  impl->cols = cols;
  impl->matrix = std::move(q);
  return LinearOperator(std::move(impl));
}

Index LinearOperator::rows() const { return impl_->rows; }
Index LinearOperator::cols() const { return impl_->cols; }
OperatorKind LinearOperator::kind() const { return impl_->kind; }

bool LinearOperator::row_orthonormal() const { return impl_->kind != OperatorKind::dense; }

Matrix LinearOperator::apply(const Eigen::Ref<const Matrix>& x) const {
  const Impl& op = *impl_;
  if (x.rows() != op.cols) {
    throw DimensionError("apply: operand has " + std::to_string(x.rows()) + " rows, operator expects " +
                         std::to_string(op.cols));
  }
  switch (op.kind) {
    case OperatorKind::identity: return x;
    case OperatorKind::dense:
    case OperatorKind::gaussian_orthonormal: return op.matrix * x;
    case OperatorKind::dct: return op.basis_h * x;
    case OperatorKind::idct: return op.basis_h.transpose() * x;
    case OperatorKind::dct2d:
    case OperatorKind::idct2d: {
      const Index h = op.basis_h.rows();
      const Index w = op.basis_w.rows();
      Matrix out(op.rows, x.cols());
      for (Index c = 0; c < x.cols(); ++c) {
        Eigen::Map<const RowMajorMatrix> image(x.col(c).data(), h, w);
        Eigen::Map<RowMajorMatrix> result(out.col(c).data(), h, w);
        if (op.kind == OperatorKind::dct2d) {
          result.noalias() = op.basis_h * image * op.basis_w.transpose();
        } else {
          result.noalias() = op.basis_h.transpose() * image * op.basis_w;
        }
      }
      return out;
    }
  }
  throw std::logic_error("unhandled operator kind");
}

Matrix LinearOperator::apply_adjoint(const Eigen::Ref<const Matrix>& y) const {
  const Impl& op = *impl_;
  if (y.rows() != op.rows) {
    throw DimensionError("apply_adjoint: operand has " + std::to_string(y.rows()) + " rows, operator expects " +
                         std::to_string(op.rows));
  }
  switch (op.kind) {
    case OperatorKind::identity: return y;
    case OperatorKind::dense:
    case OperatorKind::gaussian_orthonormal: return op.matrix.transpose() * y;
    case OperatorKind::dct: return op.basis_h.transpose() * y;
    case OperatorKind::idct: return op.basis_h * y;
    case OperatorKind::dct2d:
    case OperatorKind::idct2d: {
      const Index h = op.basis_h.rows();
      const Index w = op.basis_w.rows();
      Matrix out(op.cols, y.cols());
      for (Index c = 0; c < y.cols(); ++c) {
        Eigen::Map<const RowMajorMatrix> image(y.col(c).data(), h, w);
        Eigen::Map<RowMajorMatrix> result(out.col(c).data(), h, w);
        if (op.kind == OperatorKind::dct2d) {
          result.noalias() = op.basis_h.transpose() * image * op.basis_w;
        } else {
          result.noalias() = op.basis_h * image * op.basis_w.transpose();
        }
      }
      return out;
    }
  }
  throw std::logic_error("unhandled operator kind");
}

Matrix LinearOperator::to_dense() const {
  if (impl_->kind == OperatorKind::dense || impl_->kind == OperatorKind::gaussian_orthonormal) {
    return impl_->matrix;
  }
  return apply(Matrix::Identity(impl_->cols, impl_->cols));
}

namespace {

constexpr int kLanczosBudget = 1000;
constexpr double kLanczosTolerance = 1e-12;

OperatorBounds lanczos_bounds(const LinearOperator& op) {
  const Index n = op.cols();
  const Index max_steps = std::min<Index>(n, kLanczosBudget);

  Rng rng = make_rng(0x1a2c05);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector start(n);
  for (Index i = 0; i < n; ++i) start(i) = normal(rng);

  Matrix basis(n, max_steps);
  basis.col(0) = start / start.norm();
  std::vector<double> alpha;
  std::vector<double> beta;

  for (Index j = 0; j < max_steps; ++j) {
    Vector w = op.apply_adjoint(op.apply(basis.col(j)));
    alpha.push_back(basis.col(j).dot(w));
    w -= alpha.back() * basis.col(j);
    if (j > 0) w -= beta.back() * basis.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      const auto span = basis.leftCols(j + 1);
      w -= span * (span.transpose() * w);
    }
    const double next_beta = w.norm();

    const Index k = j + 1;
    const bool last = (k == max_steps);
    const bool check = k < 64 || k % 8 == 0 || last;
    if (!check && next_beta > 0.0) {
      beta.push_back(next_beta);
      basis.col(j + 1) = w / next_beta;
      continue;
    }

    Vector diag = Eigen::Map<const Vector>(alpha.data(), k);
    Vector sub(std::max<Index>(k - 1, 1));
    sub.setZero();
    for (Index i = 0; i + 1 < k; ++i) sub(i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Matrix> tri;
    tri.computeFromTridiagonal(diag, sub.head(k - 1), Eigen::ComputeEigenvectors);
    const Vector& ritz = tri.eigenvalues();
    const double top = ritz(k - 1);
    const double bottom = ritz(0);
    const double scale = std::max(std::abs(top), std::numeric_limits<double>::min());
    const double res_top = next_beta * std::abs(tri.eigenvectors()(k - 1, k - 1));
    const double res_bottom = next_beta * std::abs(tri.eigenvectors()(k - 1, 0));

    const bool breakdown = next_beta <= kLanczosTolerance * scale;
    const bool exhausted_space = (k == n);
    const bool converged = res_top <= kLanczosTolerance * scale && res_bottom <= kLanczosTolerance * scale;
    if (breakdown || exhausted_space || converged) {
      const double lmax = std::max(top, 0.0);
      const double lmin = std::clamp(bottom, 0.0, lmax);
      return {lmax, lmin};
    }
    if (last) break;
    beta.push_back(next_beta);
    basis.col(j + 1) = w / next_beta;
  }
  throw std::runtime_error("spectral_bounds: Lanczos did not converge within " + std::to_string(kLanczosBudget) +
                           " steps");
}

}  // namespace

OperatorBounds spectral_bounds(const LinearOperator& op) {
  switch (op.kind()) {
    case OperatorKind::identity:
    case OperatorKind::dct:
    case OperatorKind::idct:
    case OperatorKind::dct2d:
    case OperatorKind::idct2d: return {1.0, 1.0};
    case OperatorKind::gaussian_orthonormal:
      // AᵀA is the orthogonal projector onto the row space.
      return {1.0, op.rows() == op.cols() ? 1.0 : 0.0};
    case OperatorKind::dense: return lanczos_bounds(op);
  }
  throw std::logic_error("unhandled operator kind");
}

}  // namespace lqdemix
