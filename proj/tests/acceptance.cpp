// Acceptance run: one PASS/FAIL line per criterion, with its measured
// values and wall time. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsr/bounds.hpp"
#include "tsr/constrained.hpp"
#include "tsr/core.hpp"
#include "tsr/data.hpp"
#include "tsr/experiment.hpp"
#include "tsr/graph.hpp"
#include "tsr/ltr.hpp"
#include "tsr/rng.hpp"
#include "tsr/stability.hpp"
#include "tsr/synthetic.hpp"
#include "tsr/unconstrained.hpp"

using namespace tsr;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v) { return format_double(v); }

Vector uniform_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

// Plain gradient descent on h'Qh + (h-y)'C(h-y) until the gradient is below tol.
Vector gradient_descent(const Matrix& q, const Matrix& c, const Vector& y, double tol) {
  const Matrix hess = q + c;
  const double step = 1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(hess, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  Vector h = Vector::Zero(y.size());
  for (long it = 0; it < 50'000'000; ++it) {
    const Vector g = hess * h - c * y;  // half the gradient
    if (2.0 * g.cwiseAbs().maxCoeff() <= tol) break;
    h -= step * g;
  }
  return h;
}

Outcome closed_form_correctness() {
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index n = 5 + rng.below(16);
    const GraphSpec g = random_connected_graph(n, 0.35, rng.next_u64());
    const Partition p = sample_partition(n, 1 + rng.below(n - 1), rng.next_u64());
    const Vector y = uniform_vector(rng, n, -1.0, 1.0);
    UnconstrainedProblem prob = [&] {
      switch (k % 3) {
        case 0: return build_cm(g, rng.uniform(0.2, 3.0), y, p);
        case 1: return build_llreg(g.weights(), rng.uniform(0.5, 3.0), rng.uniform(0.1, 1.0), y, p);
        default: return build_gmf(g, rng.uniform(0.5, 3.0), rng.uniform(0.1, 1.0), y, p);
      }
    }();
    const Vector h = solve_unconstrained(prob).scores;
    const Vector ref = gradient_descent(prob.q(), prob.c(), prob.y(), 1e-10);
    worst = std::max(worst, (h - ref).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, "max sup-norm gap to gradient descent " + num(worst) + " over 50 instances"};
}

Outcome constrained_correctness() {
  Rng rng(202);
  double worst_feas = 0.0, worst_gap = -1e300;
  for (int k = 0; k < 20; ++k) {
    const Index n = 5 + rng.below(11);
    const GraphSpec g = random_connected_graph(n, 0.35, rng.next_u64());
    ConstrainedProblem cp{laplacian(g), rng.uniform(0.2, 10.0), sample_partition(n, 1 + rng.below(n - 1), rng.next_u64()),
                          uniform_vector(rng, n, -1.0, 1.0), std::nullopt, false};
    const Vector h = solve_constrained(cp).scores;
    worst_feas = std::max(worst_feas, std::abs(h.sum()) / h.norm());
    const double f = cp.objective(h);
    for (int t = 0; t < 10000; ++t) {
      // Half global draws, half local perturbations; both projected onto 1-perp.
      Vector z = t % 2 == 0 ? uniform_vector(rng, n, -2.0, 2.0)
                            : Vector(h + uniform_vector(rng, n, -1.0, 1.0) * std::pow(10.0, -1.0 - rng.below(6)));
      z.array() -= z.mean();
      worst_gap = std::max(worst_gap, f - cp.objective(z));
    }
  }
  const bool ok = worst_feas <= 1e-10 && worst_gap <= 1e-12;
  return {ok, "max |h'u|/|h| " + num(worst_feas) + ", max objective excess over 2e5 feasible points " + num(worst_gap)};
}

Outcome rkhs_equivalence() {
  Rng rng(303);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Index n = 6 + rng.below(15);
    const Matrix l = laplacian(random_connected_graph(n, 0.3, rng.next_u64()));
    const Partition p = sample_partition(n, 1 + rng.below(n - 1), rng.next_u64());
    Vector y = uniform_vector(rng, n, -1.0, 1.0);
    const double c = rng.uniform(0.2, 10.0);
    const Vector hc = solve_constrained({l, c, p, y, std::nullopt, false}).scores;
    const Vector hl =
        solve_ltr({std::make_shared<const GramMatrix>(pseudo_inverse(l)), p, y, Vector(), c, 0.0}).scores;
    worst = std::max(worst, (hc - hl).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "max coordinate difference " + num(worst) + " over 10 graphs"};
}

Outcome stability_upper_bounds() {
  Rng rng(404);
  const Index n = 28, m = 14;  // m u = 196
  double cm_excess = -1e300, ll_excess = -1e300, bk_excess = -1e300;
  Index bk_instances = 0;
  for (int k = 0; k < 4; ++k) {
    const GraphSpec g = random_connected_graph(n, 0.3, rng.next_u64());
    const double mb = rng.uniform(0.5, 2.0);
    const Vector y = uniform_vector(rng, n, -mb, mb);
    const FullSample s(Matrix::Zero(n, 1), y, mb);
    const Partition p = sample_partition(n, m, rng.next_u64());
    const double mu = rng.uniform(0.1, 5.0);
    const auto cm = empirical_stability([&](const Partition& q) { return solve_unconstrained(build_cm(g, mu, y, q)); },
                                        s, p, enumerate_swaps(p));
    cm_excess = std::max(cm_excess, cm.max_score_delta - cm_score_bound(mb));

    const double cl = rng.uniform(0.5, 5.0), cu = rng.uniform(0.05, 1.0);
    const auto ll = empirical_stability(
        [&](const Partition& q) { return solve_unconstrained(build_llreg(g.weights(), cl, cu, y, q)); }, s, p,
        enumerate_swaps(p));
    ll_excess = std::max(ll_excess, ll.max_score_delta - llreg_score_bound(mb, m, std::min(cl, cu), std::max(cl, cu)));
  }
  for (int k = 0; k < 20 && bk_instances < 4; ++k) {
    const GraphSpec g = random_connected_graph(n, 0.6, rng.next_u64());
    const Matrix l = laplacian(g);
    const double lambda2 = spectrum(l).lambda2;
    const double c = rng.uniform(0.05, 1.0) * static_cast<double>(m) * lambda2;
    if (static_cast<double>(m) * lambda2 / c <= 1.0) continue;
    Vector y = uniform_vector(rng, n, -1.0, 1.0);
    y.array() -= y.mean();
    const double mb = y.cwiseAbs().maxCoeff();
    const FullSample s(Matrix::Zero(n, 1), y, mb);
    const Partition p = sample_partition(n, m, rng.next_u64());
    const auto bk = empirical_stability(
        [&](const Partition& q) { return solve_constrained({l, c, q, y, std::nullopt, false}); }, s, p,
        enumerate_swaps(p));
    bk_excess = std::max(bk_excess, bk.max_score_delta - belkin_score_stability(mb, m, c, lambda2));
    ++bk_instances;
  }
  const bool ok = cm_excess <= 1e-9 && ll_excess <= 1e-9 && bk_excess <= 1e-9 && bk_instances > 0;
  return {ok, "max (empirical - bound): CM " + num(cm_excess) + ", LL-Reg " + num(ll_excess) + ", Belkin " +
                  num(bk_excess) + " (" + std::to_string(bk_instances) + " graphs); exhaustive 196 swaps each"};
}

Outcome lower_bound() {
  double worst = 0.0;
  bool above = true;
  for (Index m : {2, 5, 10})
    for (double c : {0.5, 1.0, 10.0}) {
      const LowerBoundInstance inst = cm_lower_bound_instance(m, c);
      const SwapPair sw = inst.canonical_swap();
      const Vector h0 = solve_unconstrained(inst.problem()).scores;
      const Vector h1 = solve_unconstrained(inst.problem_for(inst.part.swapped(sw))).scores;
      const auto k = static_cast<Eigen::Index>(sw.added);
      const double delta = std::abs(h1(k) - h0(k));
      worst = std::max(worst, std::abs(delta - inst.predicted_a));
      above = above && delta >= c / (2.0 * (c + 1.0));
    }
  return {worst <= 1e-9 && above, "max |measured - a| " + num(worst) + ", all >= C/(2(C+1)): " + (above ? "yes" : "no")};
}

Outcome concentration() {
  std::vector<double> pop(1000, 0.0);
  std::fill(pop.begin() + 500, pop.end(), 1.0);
  bool ok = true;
  std::string detail;
  for (double eps : {0.02, 0.05, 0.1}) {
    const ConcentrationResult r = concentration_harness(pop, 500, eps, 100000, 606);
    ok = ok && r.within_bound();
    detail += "eps=" + num(eps) + ": tail " + num(r.empirical_tail) + " <= " + num(r.slack_limit) + "; ";
  }
  return {ok, detail + "1e5 trials each"};
}

LoadedData as_data(const LocalityTask& t) {
  CsvTable table;
  for (Eigen::Index k = 0; k < t.points.cols(); ++k) table.header.push_back("x" + std::to_string(k + 1));
  table.header.push_back("y");
  for (Eigen::Index i = 0; i < t.points.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < t.points.cols(); ++k) row.push_back(t.points(i, k));
    row.push_back(t.targets(i));
    table.rows.push_back(std::move(row));
  }
  return normalize_table(table, 1.0);
}

Outcome bound_coverage() {
  const LoadedData data = as_data(make_locality_task(200, 2, 0.7, 0.2, 4, 707));
  const FullSample& s = data.sample;
  const double c = 1.0, cp = 1.0, sigma = 1.0, r = 1.5, delta = 0.1;
  auto kernel = gaussian_gram(s.points(), sigma);
  const LtrSettings st{kernel, c, cp, sigma, Weighting::Gaussian, Fallback::Zero, delta};
  Index violations = 0, finite = 0;
  for (Index k = 0; k < 500; ++k) {
    const Partition p = sample_partition(s, 100, mix_seed(707, k));
    const RadiusEvaluation ev = evaluate_radius(st, s, p, r);
    if (std::isfinite(ev.objective)) ++finite;
    if (ev.test_mse > ev.objective) ++violations;
  }
  const double rate = static_cast<double>(violations) / 500.0;
  return {rate <= 0.1 && finite == 500,
          "violation rate " + num(rate) + " over 500 partitions (" + std::to_string(finite) + " finite bounds)"};
}

Outcome ltr_output_bound() {
  Rng rng(808);
  double worst = -1e300;
  for (int k = 0; k < 1000; ++k) {
    const Index n = 4 + rng.below(30), d = 1 + rng.below(4);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * rng.uniform(0.2, 3.0);
    const double mb = rng.uniform(0.1, 10.0);
    const Vector y = uniform_vector(rng, n, -mb, mb);
    const FullSample s(x, y, mb);
    const Partition p = sample_partition(n, 1 + rng.below(n - 1), rng.next_u64());
    std::shared_ptr<const GramMatrix> kernel;
    if (k % 2 == 0) {
      kernel = gaussian_gram(x, rng.uniform(0.1, 5.0));
    } else {
      const Matrix lin = x * x.transpose() + rng.uniform(0.0, 2.0) * Matrix::Ones(x.rows(), x.rows());
      kernel = std::make_shared<const GramMatrix>(lin);
    }
    const double c = rng.uniform(0.0, 20.0), cprime = rng.uniform(0.0, 20.0);
    const LocalEstimatorConfig est{rng.uniform(0.0, 4.0), k % 3 == 0 ? Weighting::InverseDistance : Weighting::Gaussian,
                                   rng.uniform(0.3, 3.0), Fallback::Zero};
    const Vector yt = pseudo_targets(s, p, est);
    const Vector h = solve_ltr({kernel, p, y, yt, c, cprime}).scores;
    worst = std::max(worst, h.cwiseAbs().maxCoeff() - kernel->kappa() * mb * std::sqrt(c + cprime));
  }
  return {worst <= 1e-8, "max (|h| - kappa M sqrt(C + C')) " + num(worst) + " over 1000 problems"};
}

ExperimentReport boston_run(const LoadedData& data, Algorithm alg, double c, double cprime) {
  ExperimentConfig cfg;
  cfg.algorithm = alg;
  cfg.partitions = 50;
  cfg.seed = 909;
  cfg.c = c;
  cfg.c_prime = cprime;
  cfg.auto_grid_points = 16;
  return run_experiment(cfg, data);
}

Outcome protocol_reproduction() {
  const char* env = std::getenv("TSR_BOSTON_CSV");
  const std::string path = env ? env : "";
  if (path.empty()) return {false, "TSR_BOSTON_CSV is not set"};
  std::optional<LoadedData> loaded;
  try {
    loaded = load_and_normalize(path);
  } catch (const Error& e) {
    return {false, e.what()};
  }
  const LoadedData& data = *loaded;
  if (data.sample.size() != 506) return {false, "expected 506 rows, got " + std::to_string(data.sample.size())};

  const ExperimentReport ltr = boston_run(data, Algorithm::Ltr, 10.0, 10.0);
  const ExperimentReport krr = boston_run(data, Algorithm::Krr, 10.0, 0.0);
  const Summary a = ltr.aggregate(&PartitionRecord::test_mse), b = krr.aggregate(&PartitionRecord::test_mse);
  const bool complete = a.count == 50 && b.count == 50;
  std::string detail = "C = C' = 10, m = u = 253, 50 partitions, cv sigma: LTR test MSE " + num(a.mean) + " +- " +
                       num(a.std) + " (mean r* " + num(ltr.aggregate_r_star().mean) + ") vs KRR " + num(b.mean) +
                       " +- " + num(b.std);
  // Reported for context: the ordering at larger C.
  for (double c : {100.0, 1000.0}) {
    const double la = boston_run(data, Algorithm::Ltr, c, c / 10.0).aggregate(&PartitionRecord::test_mse).mean;
    const double kb = boston_run(data, Algorithm::Krr, c, 0.0).aggregate(&PartitionRecord::test_mse).mean;
    detail += "; [info] C=" + num(c) + ", C'=" + num(c / 10.0) + ": LTR " + num(la) + " vs KRR " + num(kb);
  }
  return {complete && a.mean <= b.mean, detail};
}

Outcome model_selection() {
  Index hits = 0;
  std::string idx;
  for (Index s = 0; s < 20; ++s) {
    const LoadedData data = as_data(make_locality_task(300, 2, 0.5, 0.1, 4, mix_seed(99, s)));
    const FullSample& sample = data.sample;
    const Partition part = sample_partition(sample, 150, mix_seed(7, s));
    const double c = 10.0, cp = 10.0;
    const double sigma = cross_validate_sigma(sample, part, c, mix_seed(s, 1));
    const LtrSettings st{gaussian_gram(sample.points(), sigma), c, cp, sigma, Weighting::Gaussian, Fallback::Zero, 0.1};
    const std::vector<double> grid = automatic_radius_grid(sample, 16);
    const RadiusSelection sel = select_radius(st, sample, part, grid);
    long i_star = 0, i_test = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (grid[g] == sel.r_star) i_star = static_cast<long>(g);
      if (sel.per_r[g].solved && sel.per_r[g].test_mse < best) {
        best = sel.per_r[g].test_mse;
        i_test = static_cast<long>(g);
      }
    }
    if (std::abs(i_star - i_test) <= 2) ++hits;
    idx += std::to_string(i_star) + "/" + std::to_string(i_test) + " ";
  }
  return {hits >= 14, std::to_string(hits) + "/20 runs within 2 grid steps (r* index / test argmin index: " + idx + ")"};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "closed-form correctness", 10, closed_form_correctness},
      {2, "constrained correctness", 30, constrained_correctness},
      {3, "RKHS equivalence", 10, rkhs_equivalence},
      {4, "stability upper bounds", 120, stability_upper_bounds},
      {5, "lower bound", 5, lower_bound},
      {6, "concentration", 60, concentration},
      {7, "generalization-bound coverage", 300, bound_coverage},
      {8, "LTR output bound", 1e300, ltr_output_bound},
      {9, "protocol reproduction (Boston Housing)", 600, protocol_reproduction},
      {10, "model selection", 300, model_selection},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = out.passed && in_time;
    failures += pass ? 0 : 1;
    std::printf("[%s] criterion %d: %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                secs, in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
