#pragma once

#include <stdexcept>

#include "lqdemix/linops.hpp"

namespace lqdemix {

/*
 * Proximity operators of the ℓq quasi-norm, 0 <= q <= 1:
 *
 *   prox_{q,η}(t) = argmin_x ‖x‖_q^q + (η/2)‖x − t‖²
 *
 * q = 0 is hard thresholding, q = 1 soft thresholding, and 0 < q < 1 is
 * solved per entry by a safeguarded Newton iteration. When the minimizer set
 * is {0, nonzero} (the threshold tie), zero is returned.
 */

struct ProxParams {
  double q = 1.0;
  double eta = 1.0;

  /// Throws std::invalid_argument unless 0 <= q <= 1 and eta > 0 (finite).
  void validate() const;
};

/// Threshold constants of the fractional case.
struct FractionalProxConstants {
  /// Smallest nonzero magnitude the prox can return: [2(1−q)/η]^{1/(2−q)}.
  double beta_thresh = 0.0;
  /// Inputs with |t| <= tau map to zero: beta_thresh + q·beta_thresh^{q−1}/η.
  double tau = 0.0;
};

/// Raised if the fractional root solve fails to bracket; not expected in practice.
class ProxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requires 0 < q < 1.
FractionalProxConstants fractional_constants(const ProxParams& p);

/// |t| at or below this value maps to zero: √(2/η) for q = 0, 1/η for q = 1, τ otherwise.
double zero_threshold(const ProxParams& p);

double prox_scalar(double t, const ProxParams& p);

/// Elementwise prox_scalar.
Matrix prox_vector(const Eigen::Ref<const Matrix>& t, const ProxParams& p);

/// Minimizer of ‖x‖₂^q + (η/2)‖x − t‖₂²; always a multiple α·t with 0 <= α <= 1.
Vector prox_group(const Eigen::Ref<const Vector>& t, const ProxParams& p);

/// prox_group applied to every row of t.
Matrix prox_rows(const Eigen::Ref<const Matrix>& t, const ProxParams& p);

/// Value of |x|^q with the convention 0^0 = 0 (so q = 0 counts nonzeros).
double lq_term(double magnitude, double q);

}  // namespace lqdemix
