#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lqdemix/linops.hpp"
#include "lqdemix/prox.hpp"

namespace lqdemix {

/// y = A₁x₁ + A₂x₂ with y of shape m x L (L = channels).
struct DemixProblem {
  LinearOperator a1;
  LinearOperator a2;
  Matrix y;

  Index channels() const { return y.cols(); }
  /// Throws DimensionError on shape mismatch, std::invalid_argument on non-finite data.
  void validate() const;
};

/*
 * Parameters shared by all solvers. The penalized objective is
 *
 *   (1/β)‖A₁X₁ + A₂X₂ − Y‖_F² + μ Σᵢ‖X₁[i,:]‖^{q₁} + Σᵢ‖X₂[i,:]‖^{q₂}
 *
 * and β decays geometrically from beta_start to beta_target. Unset eta/rho
 * are derived from the operators' spectral bounds.
 */
struct SolverConfig {
  double q1 = 0.5;
  double q2 = 0.5;
  double mu = 1.0;
  double beta_target = 1e-6;
  double beta_start = 1.0;
  double beta_decay = 0.97;
  int max_iters = 5000;
  double tol = 1e-8;
  std::optional<double> eta1;
  std::optional<double> eta2;
  std::optional<double> rho1;
  std::optional<double> rho2;
  // Standard two-block ADMM baseline.
  double sadmm_rho = 10.0;
  double sadmm_c_factor = 2.1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Split copies and multipliers of the four-block ADMM.
struct AdmmState {
  Matrix z1;
  Matrix z2;
  Matrix w1;
  Matrix w2;
};

struct SolveResult {
  Matrix x1;
  Matrix x2;
  std::vector<double> objective_trace;
  std::vector<double> residual_trace;
  std::vector<double> iterate_gap_trace;
  int iterations = 0;
  bool converged = false;
  double final_beta = 0.0;
  /// Parameters actually used (after auto resolution).
  double eta1 = 0.0;
  double eta2 = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  std::vector<std::string> warnings;
  std::optional<AdmmState> admm_state;
};

struct InitialPoint {
  Matrix x1;
  Matrix x2;
};

/// Called after every iteration with the 1-based iteration count and the new iterates.
using IterationObserver = std::function<void(int, const Matrix&, const Matrix&)>;

enum class SolverId { bcd, admm, multitask_bcd, multitask_admm, sadmm };

/// "bcd", "admm", "mt-bcd", "mt-admm", "sadmm".
std::string_view to_string(SolverId id);
SolverId parse_solver_id(std::string_view name);
bool is_multitask(SolverId id);

/// η₁ > 2λ_max(A₁ᵀA₁) and η₂ > 2λ_max(A₂ᵀA₂); guarantees descent of the BCD iteration.
bool bcd_step_condition_holds(double eta1, double eta2, const OperatorBounds& b1, const OperatorBounds& b2);

/*
 * Sufficient convergence condition of the four-block ADMM:
 *   ρ₁ > 16λ₁²/ρ₁ + 16λ₁λ₂/ρ₂ − 2φ₁
 *   ρ₂ > 16λ₂²/ρ₂ + 16λ₁λ₂/ρ₁ − 2φ₂
 * with λᵢ = λ_max(AᵢᵀAᵢ), φᵢ = λ_min(AᵢᵀAᵢ).
 */
bool admm_penalty_condition_holds(double rho1, double rho2, const OperatorBounds& b1, const OperatorBounds& b2);

/// Smallest common ρ = ρ₁ = ρ₂ at which both ADMM inequalities become equalities.
double critical_equal_penalty(const OperatorBounds& b1, const OperatorBounds& b2);

/// max(beta_decay * beta, beta_target).
double next_beta(double beta, const SolverConfig& cfg);

/// Penalized objective at the given β; row 2-norms are used when L > 1.
double objective_value(const DemixProblem& p, const Eigen::Ref<const Matrix>& x1, const Eigen::Ref<const Matrix>& x2,
                       const SolverConfig& cfg, double beta);

/// Proximal BCD with elementwise ℓq prox. Requires one channel.
SolveResult bcd_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init = {},
                      const IterationObserver& observer = {});

/// Four-block ADMM (z-steps, then x-steps, then multipliers). Requires one channel.
SolveResult admm_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init = {},
                       const IterationObserver& observer = {});

/// BCD on the row-sparse multichannel objective; row-wise group prox.
SolveResult multitask_bcd_solve(const DemixProblem& p, const SolverConfig& cfg,
                                const std::optional<InitialPoint>& init = {}, const IterationObserver& observer = {});

/// Four-block ADMM on the row-sparse multichannel objective.
SolveResult multitask_admm_solve(const DemixProblem& p, const SolverConfig& cfg,
                                 const std::optional<InitialPoint>& init = {},
                                 const IterationObserver& observer = {});

/*
 * Standard two-block ADMM on the constrained problem
 *   min μ‖x₁‖_{q₁}^{q₁} + ‖x₂‖_{q₂}^{q₂}  s.t.  A₁x₁ + A₂x₂ = y
 * with proximal linearization of both primal steps. Convergent for q = 1
 * only; for q < 1 it typically oscillates, and `converged` reports that.
 * β is not used except to evaluate the objective trace at beta_target.
 */
SolveResult sadmm_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init = {},
                        const IterationObserver& observer = {});

SolveResult solve(SolverId id, const DemixProblem& p, const SolverConfig& cfg,
                  const std::optional<InitialPoint>& init = {}, const IterationObserver& observer = {});

}  // namespace lqdemix
