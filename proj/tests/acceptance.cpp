// Acceptance checks 1-11. Prints one PASS/FAIL line per check and exits
// nonzero if any check fails. Pass check numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqdemix/cli.hpp"
#include "lqdemix/experiments.hpp"
#include "lqdemix/imaging.hpp"
#include "lqdemix/prox.hpp"
#include "lqdemix/random.hpp"
#include "lqdemix/serialize.hpp"
#include "lqdemix/solvers.hpp"
#include "oracles.hpp"

using namespace lqdemix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

Outcome prox_oracle_suite() {
  Rng rng = make_rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr long kGrid = 1'000'000;
  double worst = 0.0;
  int closed_form_mismatch = 0;
  for (int i = 0; i < 1000; ++i) {
    double q = unit(rng);
    if (i % 10 == 0) q = 0.0;
    if (i % 10 == 1) q = 1.0;
    const double eta = std::pow(10.0, -1.0 + 2.0 * unit(rng));
    const ProxParams p{q, eta};
    const double thr = zero_threshold(p);
    // Half the draws land within 20% of the zero threshold, where the prox jumps.
    double mag = (i % 2 == 0) ? thr * (0.8 + 0.4 * unit(rng)) : 5.0 * thr * unit(rng) + 1e-3;
    const double t = unit(rng) < 0.5 ? -mag : mag;
    const double x = prox_scalar(t, p);
    const double gap = oracle::scalar_objective(x, t, q, eta) - oracle::grid_min(t, q, eta, kGrid);
    worst = std::max(worst, std::abs(gap));
    if (q == 0.0) {
      const double expect = std::abs(t) > std::sqrt(2.0 / eta) ? t : 0.0;
      if (x != expect) ++closed_form_mismatch;
    } else if (q == 1.0) {
      const double expect = std::copysign(std::max(std::abs(t) - 1.0 / eta, 0.0), t);
      if (x != expect) ++closed_form_mismatch;
    }
  }
  return {worst <= 1e-8 && closed_form_mismatch == 0,
          "max |f(prox) - grid min| = " + fmt(worst) + ", closed-form mismatches = " +
              std::to_string(closed_form_mismatch)};
}

Outcome group_prox_suite() {
  Rng rng = make_rng(202);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr long kGrid = 1'000'000;
  double worst = 0.0;
  double worst_perp = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Index len = 1 + static_cast<Index>(i % 8);
    double q = unit(rng);
    if (i % 10 == 0) q = 0.0;
    if (i % 10 == 1) q = 1.0;
    const double eta = std::pow(10.0, -1.0 + 2.0 * unit(rng));
    Vector t(len);
    const double scale = std::pow(10.0, -0.5 + 1.5 * unit(rng));
    for (Index j = 0; j < len; ++j) t(j) = scale * normal(rng);
    const Vector x = prox_group(t, ProxParams{q, eta});
    const double gap = oracle::group_objective(x, t, q, eta) - oracle::alpha_grid_min(t, q, eta, kGrid);
    worst = std::max(worst, std::abs(gap));
    if (x.norm() > 0.0) {
      const Vector unit_t = t / t.norm();
      const Vector perp = x - x.dot(unit_t) * unit_t;
      worst_perp = std::max(worst_perp, perp.norm() / x.norm());
      if (x.dot(t) < 0.0) worst_perp = 1.0;
    }
  }
  return {worst <= 1e-8 && worst_perp <= 1e-12,
          "max |f(prox) - alpha-grid min| = " + fmt(worst) + ", max relative off-axis part = " + fmt(worst_perp)};
}

Outcome penalty_checker() {
  const OperatorBounds ortho{1.0, 1.0};
  const bool at4 = admm_penalty_condition_holds(4.0, 4.0, ortho, ortho);
  const bool at5 = admm_penalty_condition_holds(5.0, 5.0, ortho, ortho);
  double lo = 4.0;
  double hi = 5.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (admm_penalty_condition_holds(mid, mid, ortho, ortho) ? hi : lo) = mid;
  }
  const double expected = std::sqrt(33.0) - 1.0;
  const double critical = critical_equal_penalty(ortho, ortho);
  const bool ok = !at4 && at5 && std::abs(hi - expected) <= 1e-3 && std::abs(critical - expected) <= 1e-3;
  return {ok, std::string("rho=4 -> ") + (at4 ? "true" : "false") + ", rho=5 -> " + (at5 ? "true" : "false") +
                  ", flip at " + fmt(hi, 8) + " (expected " + fmt(expected, 8) + ")"};
}

Outcome descent_invariant() {
  Rng rng = make_rng(404);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double qs[] = {0.0, 0.5, 1.0};
  int violations = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index m = 16 + static_cast<Index>(inst % 49);
    Matrix g(m, m);
    for (Index r = 0; r < m; ++r) {
      for (Index c = 0; c < m; ++c) g(r, c) = normal(rng) / std::sqrt(static_cast<double>(m));
    }
    const LinearOperator a1 = LinearOperator::dct(m);
    const LinearOperator a2 = LinearOperator::dense(g);
    const Index k = std::max<Index>(1, m / 8);
    const Vector x1 = generate_sparse_signal(m, k, mix_seed(404, 2 * inst));
    const Vector x2 = generate_sparse_signal(m, k, mix_seed(404, 2 * inst + 1));
    const DemixProblem p{a1, a2, a1.apply(x1) + a2.apply(x2)};
    SolverConfig cfg;
    cfg.q1 = cfg.q2 = qs[inst % 3];
    cfg.beta_start = cfg.beta_target;
    cfg.max_iters = 300;
    double prev = objective_value(p, Matrix::Zero(m, 1), Matrix::Zero(m, 1), cfg, cfg.beta_target);
    bcd_solve(p, cfg, std::nullopt, [&](int, const Matrix& u1, const Matrix& u2) {
      const double f = objective_value(p, u1, u2, cfg, cfg.beta_target);
      const double rise = (f - prev) / std::max(1.0, std::abs(prev));
      worst = std::max(worst, rise);
      if (rise > 1e-10) ++violations;
      prev = f;
    });
  }
  return {violations == 0,
          "steps with relative increase > 1e-10: " + std::to_string(violations) + ", largest relative change " +
              fmt(worst)};
}

Outcome global_optimum() {
  SyntheticSpec spec;
  spec.m = spec.n1 = spec.n2 = 8;
  spec.sparsity_k = 1;
  spec.a1_kind = OperatorKind::dct;
  spec.a2_kind = OperatorKind::identity;
  SolverConfig cfg;
  cfg.q1 = cfg.q2 = 0.5;
  cfg.mu = 1.0;
  int bcd_hits = 0;
  int admm_hits = 0;
  for (Index i = 0; i < 20; ++i) {
    const SyntheticInstance inst = make_instance(spec, 1, derive_seed(505, 1, i));
    const oracle::Split best = oracle::enumerate_supports(inst.problem.a1.to_dense(), inst.problem.a2.to_dense(),
                                                          inst.problem.y, cfg.q1, cfg.q2, cfg.mu, 2);
    const SolveResult b = solve_with_protocol(SolverId::bcd, inst.problem, cfg);
    const SolveResult a = solve_with_protocol(SolverId::admm, inst.problem, cfg);
    if (oracle::pair_relerr(b.x1, b.x2, best.x1, best.x2) <= 1e-3) ++bcd_hits;
    if (oracle::pair_relerr(a.x1, a.x2, best.x1, best.x2) <= 1e-3) ++admm_hits;
  }
  return {bcd_hits >= 18 && admm_hits >= 18,
          "BCD " + std::to_string(bcd_hits) + "/20, ADMM " + std::to_string(admm_hits) + "/20 at the enumerated optimum"};
}

Outcome sadmm_divergence() {
  SyntheticSpec spec;  // m = n1 = n2 = 128, dct + gaussian-orthonormal
  spec.sparsity_k = 20;
  SolverConfig cfg;
  cfg.q1 = cfg.q2 = 0.5;
  cfg.mu = 1.0;
  SolverConfig baseline = cfg;
  baseline.max_iters = 2000;
  int hits = 0;
  int sadmm_fail = 0;
  int admm_conv = 0;
  for (Index i = 0; i < 10; ++i) {
    const SyntheticInstance inst = make_instance(spec, 20, derive_seed(606, 20, i));
    const SolveResult s = solve_with_protocol(SolverId::sadmm, inst.problem, baseline);
    const SolveResult a = solve_with_protocol(SolverId::admm, inst.problem, cfg);
    sadmm_fail += s.converged ? 0 : 1;
    admm_conv += a.converged ? 1 : 0;
    if (!s.converged && a.converged) ++hits;
  }
  return {hits >= 8, "S-ADMM non-converged " + std::to_string(sadmm_fail) + "/10, ADMM converged " +
                         std::to_string(admm_conv) + "/10, both " + std::to_string(hits) + "/10"};
}

Outcome phase_transition_trend() {
  SyntheticSpec spec;  // m = n1 = n2 = 128, dct + gaussian-orthonormal
  spec.seed = 707;
  std::vector<Index> ks;
  for (Index k = 5; k <= 60; k += 5) ks.push_back(k);
  constexpr Index kTrials = 50;
  struct Run {
    SolverId solver;
    double q;
  };
  const Run runs[] = {{SolverId::bcd, 0.5}, {SolverId::bcd, 1.0}, {SolverId::admm, 0.5}, {SolverId::admm, 1.0}};
  std::map<std::pair<int, double>, std::vector<double>> rates;
  for (const Run& r : runs) {
    SolverConfig cfg;
    cfg.q1 = cfg.q2 = r.q;
    rates[{static_cast<int>(r.solver), r.q}] = run_phase_transition(spec, r.solver, cfg, ks, kTrials).success_rate;
  }
  SolverConfig convex;
  convex.q1 = convex.q2 = 1.0;
  const double sadmm_k5 = run_phase_transition(spec, SolverId::sadmm, convex, {5}, kTrials).success_rate[0];

  std::string detail;
  bool ok = sadmm_k5 >= 0.95;
  for (SolverId s : {SolverId::bcd, SolverId::admm}) {
    const auto& half = rates[{static_cast<int>(s), 0.5}];
    const auto& one = rates[{static_cast<int>(s), 1.0}];
    double best_gain = -1.0;
    Index best_k = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (half[i] - one[i] > best_gain) {
        best_gain = half[i] - one[i];
        best_k = ks[i];
      }
    }
    ok = ok && best_gain >= 0.2 && half[0] >= 0.95 && one[0] >= 0.95;
    detail += std::string(to_string(s)) + ": K=5 rates " + fmt(half[0]) + "/" + fmt(one[0]) + ", max gain " +
              fmt(best_gain) + " at K=" + std::to_string(best_k) + "; ";
    detail += "q=0.5 [";
    for (double v : half) detail += fmt(v, 2) + " ";
    detail += "] q=1 [";
    for (double v : one) detail += fmt(v, 2) + " ";
    detail += "]; ";
  }
  detail += "sadmm(q=1) K=5 rate " + fmt(sadmm_k5);
  return {ok, detail};
}

Outcome multitask_reduction() {
  SyntheticSpec spec;
  spec.m = spec.n1 = spec.n2 = 64;
  spec.sparsity_k = 8;
  double worst = 0.0;
  for (Index i = 0; i < 10; ++i) {
    const SyntheticInstance inst = make_instance(spec, 8, derive_seed(808, 8, i));
    SolverConfig cfg;
    cfg.q1 = i % 2 == 0 ? 0.5 : 0.3;
    cfg.q2 = i % 3 == 0 ? 1.0 : 0.6;
    cfg.max_iters = 600;
    for (const auto& [single, multi] : {std::pair{SolverId::bcd, SolverId::multitask_bcd},
                                        std::pair{SolverId::admm, SolverId::multitask_admm}}) {
      std::vector<Matrix> a;
      std::vector<Matrix> b;
      solve(single, inst.problem, cfg, std::nullopt, [&](int, const Matrix& u1, const Matrix& u2) {
        Matrix s(u1.rows() + u2.rows(), 1);
        s << u1, u2;
        a.push_back(s);
      });
      solve(multi, inst.problem, cfg, std::nullopt, [&](int, const Matrix& u1, const Matrix& u2) {
        Matrix s(u1.rows() + u2.rows(), 1);
        s << u1, u2;
        b.push_back(s);
      });
      if (a.size() != b.size()) return {false, "iteration counts differ"};
      for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, (a[j] - b[j]).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, "max iterate difference over all iterations = " + fmt(worst)};
}

// 16 x 16 x 3 image whose channels share a 5-term 2-D DCT support (DC plus four random terms).
Image sparse_dct_image(std::uint64_t seed, Matrix& coefficients) {
  constexpr Index kSide = 16;
  constexpr Index kPixels = kSide * kSide;
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<Index> pick(1, kPixels - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::set<Index> support;
  while (support.size() < 4) support.insert(pick(rng));
  coefficients = Matrix::Zero(kPixels, 3);
  for (Index c = 0; c < 3; ++c) {
    coefficients(0, c) = 16.0 * (128.0 + 20.0 * (2.0 * unit(rng) - 1.0));
    for (Index s : support) {
      const double mag = 40.0 + 160.0 * unit(rng);
      coefficients(s, c) = unit(rng) < 0.5 ? -mag : mag;
    }
  }
  Image img(kSide, kSide, 3);
  img.pixels = LinearOperator::idct2d(kSide, kSide).apply(coefficients);
  return img;
}

Outcome inpainting_trend() {
  const SolverConfig cfg = cli::defaults_for("inpaint").solver_cfg;
  int nonconvex_wins = 0;
  int joint_wins = 0;
  double psnr_nc = 0.0;
  double psnr_cv = 0.0;
  double err_joint = 0.0;
  double err_sep = 0.0;
  constexpr int kSeeds = 20;
  for (int s = 0; s < kSeeds; ++s) {
    Matrix truth;
    const Image clean = sparse_dct_image(mix_seed(909, static_cast<std::uint64_t>(s)), truth);
    const Corruption corrupted = salt_pepper_corrupt(clean, 0.3, mix_seed(910, static_cast<std::uint64_t>(s)));
    const InpaintResult nc = inpaint({corrupted.image, 0.7, 0.4, 1.0, true}, cfg, SolverId::multitask_bcd);
    const InpaintResult cv = inpaint({corrupted.image, 1.0, 1.0, 1.0, true}, cfg, SolverId::multitask_bcd);
    const InpaintResult sep = inpaint({corrupted.image, 0.7, 0.4, 1.0, false}, cfg, SolverId::bcd);
    const double p_nc = reported_psnr(psnr(nc.restored, clean));
    const double p_cv = reported_psnr(psnr(cv.restored, clean));
    const double e_joint = relerr(nc.coefficients, truth);
    const double e_sep = relerr(sep.coefficients, truth);
    nonconvex_wins += p_nc > p_cv ? 1 : 0;
    joint_wins += e_joint <= e_sep ? 1 : 0;
    psnr_nc += p_nc / kSeeds;
    psnr_cv += p_cv / kSeeds;
    err_joint += e_joint / kSeeds;
    err_sep += e_sep / kSeeds;
  }
  return {nonconvex_wins >= 16 && joint_wins >= 14,
          "(a) nonconvex PSNR > convex in " + std::to_string(nonconvex_wins) + "/20 (mean " + fmt(psnr_nc) +
              " vs " + fmt(psnr_cv) + " dB); (b) joint RelErr <= per-channel in " + std::to_string(joint_wins) +
              "/20 (mean " + fmt(err_joint) + " vs " + fmt(err_sep) + ")"};
}

Outcome robust_cs_region() {
  const cli::RunConfig preset = cli::defaults_for("robust-cs");
  SolverConfig cfg;
  const std::vector<double> grid = {0.2, 0.5, 0.8};
  const GridReport report = run_q_grid(preset.spec, SolverId::bcd, cfg, grid, grid, 20, default_mu_grid());
  Index bi = 0;
  Index bj = 0;
  report.mean_relerr_db.minCoeff(&bi, &bj);
  const double q1 = grid[static_cast<std::size_t>(bi)];
  const double q2 = grid[static_cast<std::size_t>(bj)];
  std::string table;
  for (Index i = 0; i < 3; ++i) {
    table += "[";
    for (Index j = 0; j < 3; ++j) table += fmt(report.mean_relerr_db(i, j), 3) + (j < 2 ? " " : "");
    table += "]";
  }
  return {q1 <= 0.5 && q2 >= 0.5, "best cell q1=" + fmt(q1) + ", q2=" + fmt(q2) + " (" +
                                      fmt(report.mean_relerr_db(bi, bj)) + " dB); rows q1, cols q2 (dB): " + table};
}

std::map<std::string, std::string> read_csvs(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[entry.path().filename().string()] = ss.str();
  }
  return files;
}

Outcome reproducibility() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "lqdemix_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  Matrix unused;
  Image img = sparse_dct_image(11, unused);
  write_image(img, root / "input.ppm");

  const std::vector<std::vector<std::string>> commands = {
      {"separate", "--k", "10"},
      {"phase", "--k-values", "5,10", "--trials", "3", "--threads", "2"},
      {"grid", "--q1-grid", "0.5,1", "--q2-grid", "0.5,1", "--trials", "2", "--k", "10"},
      {"robust-cs", "--k-values", "5", "--trials", "2", "--max-iters", "600"},
      {"robust-cs", "--robust-mode", "grid", "--q1-grid", "0.5", "--q2-grid", "0.5", "--trials", "2",
       "--mu-grid", "0.1,1"},
      {"inpaint", "--input", (root / "input.ppm").string(), "--max-iters", "800"},
  };
  int identical = 0;
  std::string failures;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::map<std::string, std::string> runs[2];
    bool ran = true;
    for (int r = 0; r < 2; ++r) {
      const fs::path dir = root / ("cmd" + std::to_string(i) + "_run" + std::to_string(r));
      std::vector<std::string> args = commands[i];
      args.push_back("--out");
      args.push_back(dir.string());
      std::ostringstream out;
      std::ostringstream err;
      if (cli::main_entry(args, out, err) != 0) {
        failures += commands[i][0] + " exited nonzero: " + err.str();
        ran = false;
        break;
      }
      runs[r] = read_csvs(dir);
    }
    if (ran && !runs[0].empty() && runs[0] == runs[1]) {
      ++identical;
    } else if (ran) {
      failures += commands[i][0] + " CSVs differ; ";
    }
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical" +
              (failures.empty() ? "" : "; " + failures)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {1, "prox oracle suite", 30, prox_oracle_suite},
      {2, "group prox oracle", 30, group_prox_suite},
      {3, "ADMM penalty condition checker", 1, penalty_checker},
      {4, "BCD descent invariant", 120, descent_invariant},
      {5, "global optimum at m=8", 120, global_optimum},
      {6, "S-ADMM non-convergence vs ADMM", 300, sadmm_divergence},
      {7, "phase-transition ordering", 1200, phase_transition_trend},
      {8, "multitask reduction at L=1", 60, multitask_reduction},
      {9, "inpainting ordering", 600, inpainting_trend},
      {10, "robust-CS best region", 900, robust_cs_region},
      {11, "CLI reproducibility", 60, reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const Check& c : checks) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " -- " << o.detail << " ["
              << fmt(secs, 3) << " s, budget " << fmt(c.budget_seconds) << " s"
              << (in_budget ? "" : ", OVER BUDGET") << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
