#include "lqdemix/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lqdemix {

namespace {

constexpr double kAutoStepFactor = 2.1;
constexpr double kAutoPenaltyMargin = 1.05;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

double relative_change(const Matrix& next, const Matrix& prev) {
  return (next - prev).norm() / std::max(prev.norm(), 1.0);
}

double penalty(const Eigen::Ref<const Matrix>& x, double q) {
  double sum = 0.0;
  for (Index i = 0; i < x.rows(); ++i) sum += lq_term(x.row(i).norm(), q);
  return sum;
}

Matrix prox_step(const Matrix& t, double q, double eta, bool rowwise) {
  const ProxParams params{q, eta};
  return rowwise ? prox_rows(t, params) : prox_vector(t, params);
}

void require_single_channel(const DemixProblem& p, std::string_view solver) {
  if (p.channels() != 1) {
    throw DimensionError(std::string(solver) + " handles a single channel; got " + std::to_string(p.channels()) +
                         " (use the multitask solver)");
  }
}

InitialPoint resolve_init(const DemixProblem& p, const std::optional<InitialPoint>& init) {
  const Index l = p.channels();
  if (!init) return {Matrix::Zero(p.a1.cols(), l), Matrix::Zero(p.a2.cols(), l)};
  if (init->x1.rows() != p.a1.cols() || init->x1.cols() != l || init->x2.rows() != p.a2.cols() ||
      init->x2.cols() != l) {
    throw DimensionError("initial point shape does not match the problem");
  }
  return *init;
}

double auto_step(const OperatorBounds& b) {
  return b.lambda_max > 0.0 ? kAutoStepFactor * b.lambda_max : 1.0;
}

// True once the iterate gap is small and continuation has finished. A zero
// residual also ends continuation: the objective no longer depends on β.
bool should_stop(double gap, double beta, double residual, const SolverConfig& cfg) {
  return gap <= cfg.tol && (beta == cfg.beta_target || residual == 0.0);
}

void record(SolveResult& r, double objective, double residual, double gap) {
  r.objective_trace.push_back(objective);
  r.residual_trace.push_back(residual);
  r.iterate_gap_trace.push_back(gap);
  ++r.iterations;
}

SolveResult run_bcd(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                    const IterationObserver& observer, bool rowwise) {
  p.validate();
  cfg.validate();
  const OperatorBounds b1 = spectral_bounds(p.a1);
  const OperatorBounds b2 = spectral_bounds(p.a2);

  SolveResult result;
  result.eta1 = cfg.eta1.value_or(auto_step(b1));
  result.eta2 = cfg.eta2.value_or(auto_step(b2));
  if (!bcd_step_condition_holds(result.eta1, result.eta2, b1, b2)) {
    result.warnings.push_back("proximal parameters eta1 = " + fmt_double(result.eta1) +
                              ", eta2 = " + fmt_double(result.eta2) + " violate eta_i > 2 lambda_max(A_i^T A_i) (" +
                              fmt_double(2 * b1.lambda_max) + ", " + fmt_double(2 * b2.lambda_max) +
                              "); descent is not guaranteed");
  }

  auto [x1, x2] = resolve_init(p, init);
  Matrix a1x1 = p.a1.apply(x1);
  Matrix a2x2 = p.a2.apply(x2);
  double beta = cfg.beta_start;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    result.final_beta = beta;
    const Matrix c1 = x1 - (2.0 / result.eta1) * p.a1.apply_adjoint(a1x1 + a2x2 - p.y);
    Matrix x1_next = prox_step(c1, cfg.q1, result.eta1 / (beta * cfg.mu), rowwise);
    a1x1 = p.a1.apply(x1_next);

    const Matrix c2 = x2 - (2.0 / result.eta2) * p.a2.apply_adjoint(a1x1 + a2x2 - p.y);
    Matrix x2_next = prox_step(c2, cfg.q2, result.eta2 / beta, rowwise);
    a2x2 = p.a2.apply(x2_next);

    const double gap = std::max(relative_change(x1_next, x1), relative_change(x2_next, x2));
    x1 = std::move(x1_next);
    x2 = std::move(x2_next);

    const double residual = (a1x1 + a2x2 - p.y).norm();
    const double objective =
        residual * residual / beta + cfg.mu * penalty(x1, cfg.q1) + penalty(x2, cfg.q2);
    record(result, objective, residual, gap);
    if (observer) observer(k, x1, x2);
    if (should_stop(gap, beta, residual, cfg)) {
      result.converged = true;
      break;
    }
    beta = next_beta(beta, cfg);
  }
  result.x1 = std::move(x1);
  result.x2 = std::move(x2);
  return result;
}

// Solves (2AᵀA + ρI) x = rhs. Row-orthonormal operators use the closed form
// (1/ρ)I − 2/(ρ(2+ρ)) AᵀA; otherwise a Cholesky factor is computed once.
class QuadraticStep {
 public:
  QuadraticStep(const LinearOperator& a, double rho) : a_(a), rho_(rho) {
    if (!a.row_orthonormal()) {
      const Matrix dense = a.to_dense();
      Matrix system = 2.0 * dense.transpose() * dense;
      system.diagonal().array() += rho;
      llt_.compute(system);
      if (llt_.info() != Eigen::Success) {
        throw std::runtime_error("ADMM x-step system is not positive definite (rho = " + fmt_double(rho) + ")");
      }
    }
  }

  Matrix solve(const Matrix& rhs) const {
    if (a_.row_orthonormal()) {
      return rhs / rho_ - (2.0 / (rho_ * (2.0 + rho_))) * a_.apply_adjoint(a_.apply(rhs));
    }
    return llt_.solve(rhs);
  }

 private:
  LinearOperator a_;
  double rho_;
  Eigen::LLT<Matrix> llt_;
};

SolveResult run_admm(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                     const IterationObserver& observer, bool rowwise) {
  p.validate();
  cfg.validate();
  const OperatorBounds b1 = spectral_bounds(p.a1);
  const OperatorBounds b2 = spectral_bounds(p.a2);

  SolveResult result;
  const double auto_rho = kAutoPenaltyMargin * critical_equal_penalty(b1, b2);
  const double rho1 = cfg.rho1.value_or(auto_rho);
  const double rho2 = cfg.rho2.value_or(auto_rho);
  result.rho1 = rho1;
  result.rho2 = rho2;
  if (!admm_penalty_condition_holds(rho1, rho2, b1, b2)) {
    result.warnings.push_back("penalties rho1 = " + fmt_double(rho1) + ", rho2 = " + fmt_double(rho2) +
                              " violate the ADMM convergence condition (critical equal penalty " +
                              fmt_double(critical_equal_penalty(b1, b2)) + "); convergence is not guaranteed");
  }

  const QuadraticStep step1(p.a1, rho1);
  const QuadraticStep step2(p.a2, rho2);

  auto [x1, x2] = resolve_init(p, init);
  Matrix z1 = x1;
  Matrix z2 = x2;
  Matrix w1 = Matrix::Zero(x1.rows(), x1.cols());
  Matrix w2 = Matrix::Zero(x2.rows(), x2.cols());
  Matrix a1x1 = p.a1.apply(x1);
  Matrix a2x2 = p.a2.apply(x2);
  double beta = cfg.beta_start;

  for (int k = 1; k <= cfg.max_iters; ++k) {
    result.final_beta = beta;
    Matrix z1_next = prox_step(x1 + w1 / rho1, cfg.q1, rho1 / (beta * cfg.mu), rowwise);
    Matrix z2_next = prox_step(x2 + w2 / rho2, cfg.q2, rho2 / beta, rowwise);

    Matrix x1_next = step1.solve(2.0 * p.a1.apply_adjoint(p.y - a2x2) + rho1 * z1_next - w1);
    a1x1 = p.a1.apply(x1_next);
    Matrix x2_next = step2.solve(2.0 * p.a2.apply_adjoint(p.y - a1x1) + rho2 * z2_next - w2);
    a2x2 = p.a2.apply(x2_next);

    w1 += rho1 * (x1_next - z1_next);
    w2 += rho2 * (x2_next - z2_next);

    const double gap = std::max({relative_change(x1_next, x1), relative_change(x2_next, x2),
                                 relative_change(z1_next, z1), relative_change(z2_next, z2),
                                 (x1_next - z1_next).norm() / std::max(x1_next.norm(), 1.0),
                                 (x2_next - z2_next).norm() / std::max(x2_next.norm(), 1.0)});
    x1 = std::move(x1_next);
    x2 = std::move(x2_next);
    z1 = std::move(z1_next);
    z2 = std::move(z2_next);

    const double residual = (a1x1 + a2x2 - p.y).norm();
    const double objective =
        residual * residual / beta + cfg.mu * penalty(x1, cfg.q1) + penalty(x2, cfg.q2);
    record(result, objective, residual, gap);
    if (observer) observer(k, x1, x2);
    if (should_stop(gap, beta, residual, cfg)) {
      result.converged = true;
      break;
    }
    beta = next_beta(beta, cfg);
  }
  result.x1 = std::move(x1);
  result.x2 = std::move(x2);
  result.admm_state = AdmmState{std::move(z1), std::move(z2), std::move(w1), std::move(w2)};
  return result;
}

}  // namespace

void DemixProblem::validate() const {
  if (a1.rows() != y.rows() || a2.rows() != y.rows()) {
    throw DimensionError("operator rows (" + std::to_string(a1.rows()) + ", " + std::to_string(a2.rows()) +
                         ") must equal measurement rows " + std::to_string(y.rows()));
  }
  if (y.cols() < 1) throw DimensionError("measurements need at least one channel");
  if (!y.allFinite()) throw std::invalid_argument("measurements contain NaN or Inf");
}

void SolverConfig::validate() const {
  require(q1 >= 0.0 && q1 <= 1.0, "q1 must lie in [0, 1], got " + fmt_double(q1));
  require(q2 >= 0.0 && q2 <= 1.0, "q2 must lie in [0, 1], got " + fmt_double(q2));
  require(mu > 0.0 && std::isfinite(mu), "mu must be positive, got " + fmt_double(mu));
  require(beta_target > 0.0, "beta_target must be positive, got " + fmt_double(beta_target));
  require(beta_start >= beta_target, "beta_start must be >= beta_target");
  require(beta_decay > 0.0 && beta_decay < 1.0, "beta_decay must lie in (0, 1), got " + fmt_double(beta_decay));
  require(max_iters > 0, "max_iters must be positive");
  require(tol > 0.0, "tol must be positive, got " + fmt_double(tol));
  require(!eta1 || *eta1 > 0.0, "eta1 must be positive");
  require(!eta2 || *eta2 > 0.0, "eta2 must be positive");
  require(!rho1 || *rho1 > 0.0, "rho1 must be positive");
  require(!rho2 || *rho2 > 0.0, "rho2 must be positive");
  require(sadmm_rho > 0.0, "sadmm_rho must be positive");
  require(sadmm_c_factor > 0.0, "sadmm_c_factor must be positive");
}

std::string_view to_string(SolverId id) {
  switch (id) {
    case SolverId::bcd: return "bcd";
    case SolverId::admm: return "admm";
    case SolverId::multitask_bcd: return "mt-bcd";
    case SolverId::multitask_admm: return "mt-admm";
    case SolverId::sadmm: return "sadmm";
  }
  return "unknown";
}

SolverId parse_solver_id(std::string_view name) {
  for (auto id : {SolverId::bcd, SolverId::admm, SolverId::multitask_bcd, SolverId::multitask_admm, SolverId::sadmm}) {
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown solver '" + std::string(name) + "' (expected bcd|admm|mt-bcd|mt-admm|sadmm)");
}

bool is_multitask(SolverId id) { return id == SolverId::multitask_bcd || id == SolverId::multitask_admm; }

bool bcd_step_condition_holds(double eta1, double eta2, const OperatorBounds& b1, const OperatorBounds& b2) {
  return eta1 > 2.0 * b1.lambda_max && eta2 > 2.0 * b2.lambda_max;
}

bool admm_penalty_condition_holds(double rho1, double rho2, const OperatorBounds& b1, const OperatorBounds& b2) {
  const double l1 = b1.lambda_max;
  const double l2 = b2.lambda_max;
  const bool first = rho1 > 16.0 * l1 * l1 / rho1 + 16.0 * l1 * l2 / rho2 - 2.0 * b1.lambda_min;
  const bool second = rho2 > 16.0 * l2 * l2 / rho2 + 16.0 * l1 * l2 / rho1 - 2.0 * b2.lambda_min;
  return first && second;
}

double critical_equal_penalty(const OperatorBounds& b1, const OperatorBounds& b2) {
  // With ρ₁ = ρ₂ = ρ each inequality reads ρ² + 2φᵢρ − 16λᵢ(λ₁ + λ₂) > 0.
  const double sum = b1.lambda_max + b2.lambda_max;
  auto root = [&](const OperatorBounds& b) {
    const double phi = b.lambda_min;
    return -phi + std::sqrt(phi * phi + 16.0 * b.lambda_max * sum);
  };
  return std::max(root(b1), root(b2));
}

double next_beta(double beta, const SolverConfig& cfg) {
  return std::max(cfg.beta_decay * beta, cfg.beta_target);
}

double objective_value(const DemixProblem& p, const Eigen::Ref<const Matrix>& x1, const Eigen::Ref<const Matrix>& x2,
                       const SolverConfig& cfg, double beta) {
  const double residual = (p.a1.apply(x1) + p.a2.apply(x2) - p.y).squaredNorm();
  return residual / beta + cfg.mu * penalty(x1, cfg.q1) + penalty(x2, cfg.q2);
}

SolveResult bcd_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                      const IterationObserver& observer) {
  require_single_channel(p, "bcd_solve");
  return run_bcd(p, cfg, init, observer, false);
}

SolveResult multitask_bcd_solve(const DemixProblem& p, const SolverConfig& cfg,
                                const std::optional<InitialPoint>& init, const IterationObserver& observer) {
  return run_bcd(p, cfg, init, observer, true);
}

SolveResult admm_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                       const IterationObserver& observer) {
  require_single_channel(p, "admm_solve");
  return run_admm(p, cfg, init, observer, false);
}

SolveResult multitask_admm_solve(const DemixProblem& p, const SolverConfig& cfg,
                                 const std::optional<InitialPoint>& init, const IterationObserver& observer) {
  return run_admm(p, cfg, init, observer, true);
}

SolveResult sadmm_solve(const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                        const IterationObserver& observer) {
  require_single_channel(p, "sadmm_solve");
  p.validate();
  cfg.validate();
  const double c1 = cfg.sadmm_c_factor * std::max(spectral_bounds(p.a1).lambda_max, 1e-12);
  const double c2 = cfg.sadmm_c_factor * std::max(spectral_bounds(p.a2).lambda_max, 1e-12);
  const double rho = cfg.sadmm_rho;

  SolveResult result;
  result.rho1 = result.rho2 = rho;
  result.eta1 = c1;
  result.eta2 = c2;
  result.final_beta = cfg.beta_target;

  auto [x1, x2] = resolve_init(p, init);
  Matrix a1x1 = p.a1.apply(x1);
  Matrix a2x2 = p.a2.apply(x2);
  Matrix w = Matrix::Zero(p.y.rows(), p.y.cols());
  const double y_scale = std::max(p.y.norm(), 1.0);

  for (int k = 1; k <= cfg.max_iters; ++k) {
    const Matrix shift = p.y + w / rho;
    const Matrix g1 = p.a1.apply_adjoint(a1x1 + a2x2 - shift);
    Matrix x1_next = prox_vector(x1 - g1 / c1, {cfg.q1, c1 * rho / cfg.mu});
    a1x1 = p.a1.apply(x1_next);
    const Matrix g2 = p.a2.apply_adjoint(a1x1 + a2x2 - shift);
    Matrix x2_next = prox_vector(x2 - g2 / c2, {cfg.q2, c2 * rho});
    a2x2 = p.a2.apply(x2_next);

    const Matrix r = a1x1 + a2x2 - p.y;
    w -= rho * r;

    const double residual = r.norm();
    // ‖w^{k+1} − w^k‖/ρ equals the constraint residual.
    const double gap =
        std::max({relative_change(x1_next, x1), relative_change(x2_next, x2), residual / y_scale});
    x1 = std::move(x1_next);
    x2 = std::move(x2_next);

    const double objective =
        residual * residual / cfg.beta_target + cfg.mu * penalty(x1, cfg.q1) + penalty(x2, cfg.q2);
    record(result, objective, residual, gap);
    if (observer) observer(k, x1, x2);
    if (gap <= cfg.tol) {
      result.converged = true;
      break;
    }
  }
  result.x1 = std::move(x1);
  result.x2 = std::move(x2);
  return result;
}

SolveResult solve(SolverId id, const DemixProblem& p, const SolverConfig& cfg, const std::optional<InitialPoint>& init,
                  const IterationObserver& observer) {
  switch (id) {
    case SolverId::bcd: return bcd_solve(p, cfg, init, observer);
    case SolverId::admm: return admm_solve(p, cfg, init, observer);
    case SolverId::multitask_bcd: return multitask_bcd_solve(p, cfg, init, observer);
    case SolverId::multitask_admm: return multitask_admm_solve(p, cfg, init, observer);
    case SolverId::sadmm: return sadmm_solve(p, cfg, init, observer);
  }
  throw std::logic_error("unhandled solver id");
}

}  // namespace lqdemix
