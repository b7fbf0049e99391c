#include "lqdemix/experiments.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "lqdemix/random.hpp"
#include "parallel.hpp"

namespace lqdemix {

namespace {

LinearOperator make_operator(OperatorKind kind, Index rows, Index cols, std::uint64_t seed, const char* name) {
  auto square = [&] {
    if (rows != cols) {
      throw DimensionError(std::string(name) + ": " + std::string(to_string(kind)) + " needs a square shape, got " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  };
  switch (kind) {
    case OperatorKind::identity: square(); return LinearOperator::identity(rows);
    case OperatorKind::dct: square(); return LinearOperator::dct(rows);
    case OperatorKind::idct: square(); return LinearOperator::idct(rows);
    case OperatorKind::gaussian_orthonormal: return LinearOperator::gaussian_orthonormal(rows, cols, seed);
    case OperatorKind::dense:
    case OperatorKind::dct2d:
    case OperatorKind::idct2d: break;
  }
  throw std::invalid_argument(std::string(name) + ": operator kind " + std::string(to_string(kind)) +
                              " cannot be generated for synthetic instances");
}

}  // namespace

void SyntheticSpec::validate() const {
  if (m <= 0 || n1 <= 0 || n2 <= 0) throw std::invalid_argument("m, n1, n2 must be positive");
  if (sparsity_k < 0) throw std::invalid_argument("k must be nonnegative");
  if (noise.kind == NoiseModel::Kind::none && sparsity_k > std::min(n1, n2)) {
    throw std::invalid_argument("k = " + std::to_string(sparsity_k) + " exceeds min(n1, n2)");
  }
  if (noise.kind == NoiseModel::Kind::sas) {
    if (!(noise.alpha > 0.0 && noise.alpha <= 2.0)) throw std::invalid_argument("alpha must lie in (0, 2]");
    if (!(noise.gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  }
}

SyntheticInstance make_instance(const SyntheticSpec& spec, Index k, std::uint64_t seed) {
  LinearOperator a1 = make_operator(spec.a1_kind, spec.m, spec.n1, mix_seed(seed, 1), "a1");
  LinearOperator a2 = make_operator(spec.a2_kind, spec.m, spec.n2, mix_seed(seed, 2), "a2");
  Vector x1 = generate_sparse_signal(spec.n1, k, mix_seed(seed, 3));
  Vector x2 = spec.noise.kind == NoiseModel::Kind::sas
                  ? sas_noise(spec.n2, spec.noise.alpha, spec.noise.gamma, mix_seed(seed, 4))
                  : generate_sparse_signal(spec.n2, k, mix_seed(seed, 4));
  Matrix y = a1.apply(x1) + a2.apply(x2);
  return {DemixProblem{std::move(a1), std::move(a2), std::move(y)}, std::move(x1), std::move(x2)};
}

Vector generate_sparse_signal(Index n, Index k, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("generate_sparse_signal: n must be positive");
  if (k < 0 || k > n) {
    throw std::invalid_argument("generate_sparse_signal: need 0 <= k <= n, got k = " + std::to_string(k) +
                                ", n = " + std::to_string(n));
  }
  Rng rng = make_rng(seed);
  std::vector<Index> positions(static_cast<std::size_t>(n));
  std::iota(positions.begin(), positions.end(), Index{0});
  // Partial Fisher-Yates: the first k slots form a uniform random k-subset.
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(positions[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(pick(rng))]);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x = Vector::Zero(n);
  for (Index i = 0; i < k; ++i) {
    double v = 0.0;
    while (v == 0.0) v = normal(rng);
    x(positions[static_cast<std::size_t>(i)]) = v;
  }
  return x;
}

Vector sas_noise(Index n, double alpha, double gamma, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sas_noise: n must be nonnegative");
  if (!(alpha > 0.0 && alpha <= 2.0)) {
    throw std::invalid_argument("sas_noise: alpha must lie in (0, 2], got " + std::to_string(alpha));
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("sas_noise: gamma must be positive, got " + std::to_string(gamma));
  }
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> exponential(1.0);
  auto open_uniform = [&] {
    double u = 0.0;
    while (u == 0.0) u = uniform(rng);
    return u;
  };
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const double v = std::numbers::pi * (open_uniform() - 0.5);
    double x = 0.0;
    if (alpha == 1.0) {
      x = std::tan(v);
    } else {
      const double w = exponential(rng);
      x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
          std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
    }
    out(i) = gamma * x;
  }
  return out;
}

double relerr(const Eigen::Ref<const Matrix>& estimate, const Eigen::Ref<const Matrix>& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw DimensionError("relerr: shape mismatch");
  }
  const double norm = truth.norm();
  if (norm == 0.0) throw std::invalid_argument("relerr: truth is identically zero");
  return (estimate - truth).norm() / norm;
}

double relerr_db(double relerr) { return 20.0 * std::log10(std::max(relerr, 1e-16)); }

std::uint64_t derive_seed(std::uint64_t base, Index k, Index trial) {
  return mix64(mix64(mix64(base) ^ static_cast<std::uint64_t>(k)) ^ static_cast<std::uint64_t>(trial));
}

SolveResult solve_with_protocol(SolverId solver, const DemixProblem& problem, const SolverConfig& cfg,
                                const Protocol& protocol) {
  const bool nonconvex = cfg.q1 < 1.0 || cfg.q2 < 1.0;
  if (!protocol.warm_start || solver == SolverId::sadmm || !nonconvex) return solve(solver, problem, cfg);

  problem.validate();
  SolverConfig warm = cfg;
  warm.q1 = 1.0;
  warm.q2 = 1.0;
  warm.mu = 1.0;
  warm.max_iters = std::min(protocol.warm_start_iters, cfg.max_iters);
  InitialPoint init{Matrix(problem.a1.cols(), problem.channels()), Matrix(problem.a2.cols(), problem.channels())};
  for (Index c = 0; c < problem.channels(); ++c) {
    const DemixProblem channel{problem.a1, problem.a2, problem.y.col(c)};
    SolveResult start = sadmm_solve(channel, warm);
    init.x1.col(c) = start.x1;
    init.x2.col(c) = start.x2;
  }
  return solve(solver, problem, cfg, init);
}

namespace {

TrialOutcome evaluate(const SyntheticInstance& instance, SolverId solver, const SolverConfig& cfg,
                      const Protocol& protocol) {
  TrialOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    const SolveResult r = solve_with_protocol(solver, instance.problem, cfg, protocol);
    // A zero ground truth (K = 0) is scored by the absolute error.
    out.relerr_x1 = instance.x1.norm() == 0.0 ? r.x1.norm() : relerr(r.x1, instance.x1);
    out.success = out.relerr_x1 <= kSuccessThreshold;
    out.iterations = r.iterations;
    out.converged = r.converged;
  } catch (const std::exception& e) {
    out.relerr_x1 = std::numeric_limits<double>::quiet_NaN();
    out.success = false;
    out.error = e.what();
  }
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

TrialOutcome run_trial(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg, Index k, Index trial,
                       const Protocol& protocol) {
  const std::uint64_t seed = derive_seed(spec.seed, k, trial);
  TrialOutcome out = evaluate(make_instance(spec, k, seed), solver, cfg, protocol);
  out.k = k;
  out.trial = trial;
  out.seed = seed;
  return out;
}

PhaseTransitionReport run_phase_transition(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg,
                                           const std::vector<Index>& k_values, Index trials, const Protocol& protocol,
                                           unsigned threads) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (k_values.empty()) throw std::invalid_argument("k_values must be nonempty");
  spec.validate();
  cfg.validate();
  for (Index k : k_values) {
    SyntheticSpec at_k = spec;
    at_k.sparsity_k = k;
    at_k.validate();
  }

  PhaseTransitionReport report;
  report.k_values = k_values;
  report.trials_per_point = trials;
  const std::size_t per_k = static_cast<std::size_t>(trials);
  report.trials.resize(k_values.size() * per_k);
  detail::parallel_for(report.trials.size(), threads, [&](std::size_t i) {
    const Index k = k_values[i / per_k];
    report.trials[i] = run_trial(spec, solver, cfg, k, static_cast<Index>(i % per_k), protocol);
  });
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < per_k; ++t) hits += report.trials[ki * per_k + t].success ? 1 : 0;
    report.success_rate.push_back(static_cast<double>(hits) / static_cast<double>(per_k));
  }
  return report;
}

GridReport run_q_grid(const SyntheticSpec& spec, SolverId solver, const SolverConfig& cfg,
                      const std::vector<double>& q1_values, const std::vector<double>& q2_values, Index trials,
                      const std::vector<double>& mu_grid, const Protocol& protocol, unsigned threads) {
  if (q1_values.empty() || q2_values.empty()) throw std::invalid_argument("q grids must be nonempty");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  spec.validate();
  cfg.validate();
  for (double q : q1_values) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q1 grid values must lie in [0, 1]");
  }
  for (double q : q2_values) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q2 grid values must lie in [0, 1]");
  }
  const std::vector<double> mus = mu_grid.empty() ? std::vector<double>{cfg.mu} : mu_grid;

  const Index k = spec.sparsity_k;
  std::vector<SyntheticInstance> instances;
  instances.reserve(static_cast<std::size_t>(trials));
  for (Index t = 0; t < trials; ++t) instances.push_back(make_instance(spec, k, derive_seed(spec.seed, k, t)));

  const std::size_t n1 = q1_values.size();
  const std::size_t n2 = q2_values.size();
  const std::size_t nm = mus.size();
  const std::size_t nt = static_cast<std::size_t>(trials);
  std::vector<TrialOutcome> outcomes(n1 * n2 * nm * nt);
  detail::parallel_for(outcomes.size(), threads, [&](std::size_t idx) {
    const std::size_t t = idx % nt;
    const std::size_t m = (idx / nt) % nm;
    const std::size_t j = (idx / (nt * nm)) % n2;
    const std::size_t i = idx / (nt * nm * n2);
    SolverConfig cell = cfg;
    cell.q1 = q1_values[i];
    cell.q2 = q2_values[j];
    cell.mu = mus[m];
    outcomes[idx] = evaluate(instances[t], solver, cell, protocol);
  });

  GridReport report;
  report.q1_values = q1_values;
  report.q2_values = q2_values;
  report.trials_per_cell = trials;
  report.spec = spec;
  report.cfg = cfg;
  report.mean_relerr_db.resize(static_cast<Index>(n1), static_cast<Index>(n2));
  report.success_rate.resize(static_cast<Index>(n1), static_cast<Index>(n2));
  report.mu.resize(static_cast<Index>(n1), static_cast<Index>(n2));
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      std::vector<double> mean_db(nm);
      std::vector<double> rate(nm);
      for (std::size_t m = 0; m < nm; ++m) {
        double db = 0.0;
        double hits = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
          const TrialOutcome& o = outcomes[((i * n2 + j) * nm + m) * nt + t];
          // Failed solves count as total loss (RelErr 1, i.e. 0 dB).
          db += std::isfinite(o.relerr_x1) ? relerr_db(o.relerr_x1) : 0.0;
          hits += o.success ? 1.0 : 0.0;
        }
        mean_db[m] = db / static_cast<double>(nt);
        rate[m] = hits / static_cast<double>(nt);
      }
      const double best_mu = select_mu(mus, mean_db);
      const auto pick = static_cast<std::size_t>(std::find(mus.begin(), mus.end(), best_mu) - mus.begin());
      const auto ri = static_cast<Index>(i);
      const auto rj = static_cast<Index>(j);
      report.mean_relerr_db(ri, rj) = mean_db[pick];
      report.success_rate(ri, rj) = rate[pick];
      report.mu(ri, rj) = best_mu;
    }
  }
  return report;
}

double select_mu(const std::vector<double>& candidates, const std::vector<double>& relerrs) {
  if (candidates.empty()) throw std::invalid_argument("select_mu: no candidates");
  if (candidates.size() != relerrs.size()) throw std::invalid_argument("select_mu: size mismatch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (relerrs[i] < relerrs[best] || (relerrs[i] == relerrs[best] && candidates[i] > candidates[best])) best = i;
  }
  return candidates[best];
}

std::vector<double> default_mu_grid() {
  std::vector<double> grid;
  for (int i = -4; i <= 4; ++i) grid.push_back(std::pow(10.0, 0.5 * i));
  return grid;
}

}  // namespace lqdemix
