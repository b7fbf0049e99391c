#include "lqdemix/prox.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace lqdemix {

namespace {

constexpr int kNewtonIterations = 100;
constexpr double kGroupNormFloor = 1e-300;

double sign_of(double t) { return t < 0.0 ? -1.0 : 1.0; }

// Root of h(z) = q z^{q−1} + η z − η a on (beta, a), a = |t| > tau.
// h is convex and increasing there, so Newton from the right end converges
// monotonically; the bracket catches any step that leaves (lo, hi).
double fractional_root(double a, double q, double eta, double beta) {
  auto h = [&](double z) { return q * std::pow(z, q - 1.0) + eta * z - eta * a; };
  auto dh = [&](double z) { return q * (q - 1.0) * std::pow(z, q - 2.0) + eta; };

  double lo = beta;
  double hi = a;
  // |t| within rounding of tau: the tie, resolved toward zero.
  if (!(h(lo) < 0.0)) return 0.0;
  if (!(h(hi) > 0.0)) {
    throw ProxError("prox_scalar: cannot bracket root for |t| = " + std::to_string(a) +
                    ", q = " + std::to_string(q) + ", eta = " + std::to_string(eta));
  }
  const double tol = 1e-12 * eta * a;
  double z = hi;
  for (int it = 0; it < kNewtonIterations; ++it) {
    const double hz = h(z);
    if (std::abs(hz) <= tol) return z;
    if (hz > 0.0) {
      hi = z;
    } else {
      lo = z;
    }
    double next = z - hz / dh(z);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == z || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return next;
    z = next;
  }
  return z;
}

}  // namespace

void ProxParams::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("prox: q must lie in [0, 1], got " + std::to_string(q));
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("prox: eta must be positive and finite, got " + std::to_string(eta));
  }
}

FractionalProxConstants fractional_constants(const ProxParams& p) {
  if (!(p.q > 0.0 && p.q < 1.0)) throw std::invalid_argument("fractional_constants: needs 0 < q < 1");
  const double beta = std::pow(2.0 * (1.0 - p.q) / p.eta, 1.0 / (2.0 - p.q));
  const double tau = beta + p.q * std::pow(beta, p.q - 1.0) / p.eta;
  return {beta, tau};
}

double zero_threshold(const ProxParams& p) {
  if (p.q == 0.0) return std::sqrt(2.0 / p.eta);
  if (p.q == 1.0) return 1.0 / p.eta;
  return fractional_constants(p).tau;
}

double prox_scalar(double t, const ProxParams& p) {
  p.validate();
  const double a = std::abs(t);
  if (p.q == 1.0) return sign_of(t) * std::max(a - 1.0 / p.eta, 0.0);
  if (p.q == 0.0) return a > std::sqrt(2.0 / p.eta) ? t : 0.0;
  const auto [beta, tau] = fractional_constants(p);
  if (a <= tau) return 0.0;
  return sign_of(t) * fractional_root(a, p.q, p.eta, beta);
}

Matrix prox_vector(const Eigen::Ref<const Matrix>& t, const ProxParams& p) {
  p.validate();
  Matrix out(t.rows(), t.cols());
  if (p.q == 1.0 || p.q == 0.0) {
    for (Index j = 0; j < t.cols(); ++j) {
      for (Index i = 0; i < t.rows(); ++i) out(i, j) = prox_scalar(t(i, j), p);
    }
    return out;
  }
  const auto [beta, tau] = fractional_constants(p);
  for (Index j = 0; j < t.cols(); ++j) {
    for (Index i = 0; i < t.rows(); ++i) {
      const double v = t(i, j);
      const double a = std::abs(v);
      out(i, j) = a <= tau ? 0.0 : sign_of(v) * fractional_root(a, p.q, p.eta, beta);
    }
  }
  return out;
}

Vector prox_group(const Eigen::Ref<const Vector>& t, const ProxParams& p) {
  p.validate();
  const double norm = t.norm();
  if (norm < kGroupNormFloor) return Vector::Zero(t.size());
  // The minimizer is α·t where α is the scalar prox of 1 with penalty η‖t‖^{2−q}.
  const ProxParams scaled{p.q, p.eta * std::pow(norm, 2.0 - p.q)};
  const double alpha = prox_scalar(1.0, scaled);
  return alpha * t;
}

Matrix prox_rows(const Eigen::Ref<const Matrix>& t, const ProxParams& p) {
  p.validate();
  // A one-entry group is the scalar problem; route it there so L = 1 runs match the elementwise solvers bit for bit.
  if (t.cols() == 1) return prox_vector(t, p);
  Matrix out(t.rows(), t.cols());
  for (Index i = 0; i < t.rows(); ++i) {
    const double norm = t.row(i).norm();
    if (norm < kGroupNormFloor) {
      out.row(i).setZero();
      continue;
    }
    const ProxParams scaled{p.q, p.eta * std::pow(norm, 2.0 - p.q)};
    out.row(i) = prox_scalar(1.0, scaled) * t.row(i);
  }
  return out;
}

double lq_term(double magnitude, double q) {
  if (magnitude == 0.0) return 0.0;
  if (q == 0.0) return 1.0;
  return std::pow(magnitude, q);
}

}  // namespace lqdemix
