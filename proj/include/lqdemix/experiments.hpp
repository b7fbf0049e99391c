#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqdemix/solvers.hpp"

namespace lqdemix {

struct NoiseModel {
  enum class Kind { none, sas };
  Kind kind = Kind::none;
  double alpha = 1.0;
  double gamma = 1e-3;
};

/*
 * Synthetic demixing instance y = A₁x₁ + A₂x₂. With noise = none both
 * components are K-sparse with standard-normal amplitudes; with noise = sas
 * x₂ is a dense symmetric α-stable vector and A₂ is expected to be the
 * identity (robust compressive sensing).
 */
struct SyntheticSpec {
  Index m = 128;
  Index n1 = 128;
  Index n2 = 128;
  Index sparsity_k = 20;
  OperatorKind a1_kind = OperatorKind::dct;
  OperatorKind a2_kind = OperatorKind::gaussian_orthonormal;
  NoiseModel noise;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticInstance {
  DemixProblem problem;
  Vector x1;
  Vector x2;
};

/// Builds one instance; every random draw is derived from `seed`.
SyntheticInstance make_instance(const SyntheticSpec& spec, Index k, std::uint64_t seed);

/// Exactly k nonzeros on a uniformly random support, i.i.d. N(0, 1) values.
Vector generate_sparse_signal(Index n, Index k, std::uint64_t seed);

/*
 * n i.i.d. symmetric α-stable samples with characteristic function
 * exp(−γ^α|ω|^α), drawn with the Chambers-Mallows-Stuck transform (Cauchy
 * closed form at α = 1). Samples are γ times the γ = 1 draw of the same seed.
 */
Vector sas_noise(Index n, double alpha, double gamma, std::uint64_t seed);

/// ‖estimate − truth‖_F / ‖truth‖_F; throws std::invalid_argument if truth is zero.
double relerr(const Eigen::Ref<const Matrix>& estimate, const Eigen::Ref<const Matrix>& truth);

/// RelErr in dB, 20·log10(relerr), with relerr floored at 1e-16.
double relerr_db(double relerr);

inline constexpr double kSuccessThreshold = 1e-2;

/// Trial seed for trial `trial` at sparsity k: mix64(mix64(mix64(base) ^ k) ^ trial).
std::uint64_t derive_seed(std::uint64_t base, Index k, Index trial);

/*
 * Experiment protocol around a solver. For the proposed solvers with a
 * nonconvex configuration (q₁ < 1 or q₂ < 1) the solve is warm-started from
 * the convex two-block ADMM baseline (q₁ = q₂ = 1, μ = 1) run for
 * min(warm_start_iters, max_iters) iterations. Multichannel problems are warm
 * started channel by channel.
 */
struct Protocol {
  bool warm_start = true;
  int warm_start_iters = 1000;
};

SolveResult solve_with_protocol(SolverId solver, const DemixProblem& problem, const SolverConfig& cfg,
                                const Protocol& protocol = {});

struct TrialOutcome {
  Index k = 0;
  Index trial = 0;
  std::uint64_t seed = 0;
  double relerr_x1 = 0.0;
  bool success = false;
  int iterations = 0;
  bool converged = false;
  double wall_time = 0.0;  // seconds; never serialized into result tables
  std::string error;       // non-empty when the solve threw
};

TrialOutcome run_trial(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg, Index k, Index trial,
                       const Protocol& protocol = {});

struct PhaseTransitionReport {
  std::vector<Index> k_values;
  std::vector<double> success_rate;
  /// Ordered by (k index, trial).
  std::vector<TrialOutcome> trials;
  Index trials_per_point = 0;
};

/// Success rate per K over `trials` independent instances. `threads` = 0 uses all cores.
PhaseTransitionReport run_phase_transition(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg,
                                           const std::vector<Index>& k_values, Index trials,
                                           const Protocol& protocol = {}, unsigned threads = 1);

struct GridReport {
  std::vector<double> q1_values;
  std::vector<double> q2_values;
  /// mean RelErr in dB, rows indexed by q1, columns by q2
  Matrix mean_relerr_db;
  Matrix success_rate;
  /// μ used per cell (selected from mu_grid when one is given)
  Matrix mu;
  Index trials_per_cell = 0;
  SyntheticSpec spec;
  SolverConfig cfg;
};

/*
 * Mean RelErr (dB) of x₁ over a (q₁, q₂) grid at K = spec.sparsity_k. All
 * cells share the same trial seeds. With a non-empty mu_grid every cell runs
 * each candidate μ and keeps the one with the lowest mean RelErr.
 */
GridReport run_q_grid(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg,
                      const std::vector<double>& q1_values, const std::vector<double>& q2_values, Index trials,
                      const std::vector<double>& mu_grid = {}, const Protocol& protocol = {}, unsigned threads = 1);

/// Candidate with the lowest RelErr; ties go to the larger μ.
double select_mu(const std::vector<double>& candidates, const std::vector<double>& relerrs);

/// 10^{-2}, 10^{-1.5}, ..., 10^{2}.
std::vector<double> default_mu_grid();

}  // namespace lqdemix
