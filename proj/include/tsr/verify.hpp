#pragma once

// Self-check suite behind `tsr verify`: a few property checks per module on
// seeded random instances, with a pass/fail table.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tsr/bounds.hpp"
#include "tsr/constrained.hpp"
#include "tsr/core.hpp"
#include "tsr/experiment.hpp"
#include "tsr/graph.hpp"
#include "tsr/ltr.hpp"
#include "tsr/report.hpp"
#include "tsr/rng.hpp"
#include "tsr/stability.hpp"
#include "tsr/synthetic.hpp"
#include "tsr/unconstrained.hpp"

namespace tsr {

enum class VerifyLevel { Fast, Full };

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::Fast;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  // Multiplies alpha(m, u) wherever the checks feed it into a bound. Any
  // value other than 1 is a deliberate fault the suite must catch.
  double alpha_fault = 1.0;
};

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }

  Json to_json() const {
    Json rows = Json::array();
    for (const auto& c : checks)
      rows.push_back(Json{{"check", c.name}, {"detail", c.detail}, {"module", c.module}, {"passed", c.passed}});
    return Json{{"checks", rows}, {"passed", passed()}};
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "module,check,passed,detail\n";
    for (const auto& c : checks)
      out << c.module << ',' << c.name << ',' << (c.passed ? "true" : "false") << ",\"" << c.detail << "\"\n";
    return out.str();
  }
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

inline Vector random_labels(Rng& rng, Index n, double m_bound) {
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(-m_bound, m_bound);
  return y;
}

inline FullSample sample_with_labels(const Vector& y, double m_bound) {
  return FullSample(Matrix::Zero(y.size(), 1), y, m_bound);
}

}  // namespace detail

inline std::vector<CheckResult> verify_core(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  {
    bool ok = true;
    std::string worst;
    for (Index m = 1; m <= 30; ++m)
      for (Index u = 1; u <= 30; ++u) {
        const double mx = static_cast<double>(std::max(m, u));
        const double oracle = static_cast<double>(m * u) / (static_cast<double>(m + u) - 0.5) *
                              (2.0 * mx / (2.0 * mx - 1.0));
        if (std::abs(alpha(m, u) - oracle) > 1e-12 * oracle) {
          ok = false;
          worst = "m=" + std::to_string(m) + " u=" + std::to_string(u);
        }
      }
    out.push_back({"core", "alpha_closed_form", ok, ok ? "30x30 grid" : worst});
  }
  {
    const Partition p = sample_partition(12, 5, opt.seed);
    bool ok = true;
    for (const SwapPair& s : enumerate_swaps(p)) {
      const Partition q = p.swapped(s);
      ok = ok && q.m() == p.m() && q.u() == p.u() && !q.is_train(s.removed) && q.is_train(s.added);
    }
    out.push_back({"core", "swap_preserves_sizes", ok, "35 swaps"});
  }
  return out;
}

inline std::vector<CheckResult> verify_graph(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  {
    Matrix w = Matrix::Ones(4, 4);
    w.diagonal().setZero();
    const SpectrumSummary s = spectrum(normalized_laplacian(GraphSpec(w)));
    const double err = std::max({std::abs(s.eigenvalues(0)), std::abs(s.eigenvalues(1) - 4.0 / 3.0),
                                 std::abs(s.eigenvalues(3) - 4.0 / 3.0)});
    out.push_back({"graph", "k4_normalized_spectrum", err <= 1e-12, "max error " + detail::fmt(err)});
  }
  {
    double worst = 0.0;
    for (Index k = 0; k < 5; ++k) {
      const Matrix l = laplacian(random_connected_graph(10, 0.3, mix_seed(opt.seed, 100 + k)));
      const Matrix lp = pseudo_inverse(l);
      worst = std::max({worst, (l * lp * l - l).norm(), (lp * l * lp - lp).norm(),
                        (l * lp - (l * lp).transpose()).norm()});
    }
    out.push_back({"graph", "pseudo_inverse_penrose", worst <= 1e-9, "max residual " + detail::fmt(worst)});
  }
  return out;
}

inline std::vector<CheckResult> verify_regressors(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(mix_seed(opt.seed, 200));
  {
    double worst = 0.0;
    bool optimal = true;
    for (Index k = 0; k < 10; ++k) {
      const Index n = 6 + k;
      const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
      const Partition p = sample_partition(n, n / 2, rng.next_u64());
      const UnconstrainedProblem prob = build_cm(g, rng.uniform(0.1, 2.0), detail::random_labels(rng, n, 1.0), p);
      const Vector h = solve_unconstrained(prob).scores;
      worst = std::max(worst, ((prob.q() + prob.c()) * h - prob.c() * prob.y()).norm());
      const double f = prob.objective(h);
      for (int t = 0; t < 20; ++t) {
        Vector d(h.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = rng.uniform(-1e-3, 1e-3);
        optimal = optimal && prob.objective(h + d) >= f - 1e-12;
      }
    }
    out.push_back({"regressors", "closed_form_stationarity", worst <= 1e-9 && optimal,
                   "max residual " + detail::fmt(worst)});
  }
  {
    double worst_feas = 0.0;
    bool optimal = true;
    for (Index k = 0; k < 5; ++k) {
      const Index n = 8 + k;
      const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
      ConstrainedProblem cp{laplacian(g), rng.uniform(0.5, 5.0), sample_partition(n, n / 2, rng.next_u64()),
                            detail::random_labels(rng, n, 1.0), std::nullopt, false};
      const Vector h = solve_constrained(cp).scores;
      worst_feas = std::max(worst_feas, std::abs(h.sum()) / std::max(1e-300, h.norm()));
      const double f = cp.objective(h);
      for (int t = 0; t < 200; ++t) {
        Vector z(h.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.uniform(-1.0, 1.0);
        z.array() -= z.mean();
        optimal = optimal && cp.objective(z) >= f - 1e-10;
      }
    }
    out.push_back({"regressors", "constrained_feasible_optimal", worst_feas <= 1e-10 && optimal,
                   "max |h'u|/|h| " + detail::fmt(worst_feas)});
  }
  {
    double worst = 0.0;
    for (Index k = 0; k < 5; ++k) {
      const Index n = 8 + k;
      const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
      const Matrix l = laplacian(g);
      const Partition p = sample_partition(n, n / 2, rng.next_u64());
      const Vector y = detail::random_labels(rng, n, 1.0);
      const double c = rng.uniform(0.5, 5.0);
      const Vector hc = solve_constrained({l, c, p, y, std::nullopt, false}).scores;
      auto kernel = std::make_shared<const GramMatrix>(pseudo_inverse(l));
      const Vector hl = solve_ltr({kernel, p, y, Vector(), c, 0.0}).scores;
      worst = std::max(worst, (hc - hl).cwiseAbs().maxCoeff());
    }
    out.push_back({"regressors", "rkhs_equivalence", worst <= 1e-6, "max difference " + detail::fmt(worst)});
  }
  {
    double worst = -1.0;
    for (Index k = 0; k < 20; ++k) {
      const Index n = 10;
      Matrix x(10, 2);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
      const double mb = rng.uniform(0.5, 2.0);
      const Vector y = detail::random_labels(rng, n, mb);
      const FullSample s(x, y, mb);
      const Partition p = sample_partition(n, 5, rng.next_u64());
      auto kernel = gaussian_gram(x, rng.uniform(0.5, 2.0));
      const double c = rng.uniform(0.0, 5.0), cp = rng.uniform(0.0, 5.0);
      const Vector yt = pseudo_targets(s, p, {10.0, Weighting::Gaussian, 1.0, Fallback::Zero});
      const Vector h = solve_ltr({kernel, p, y, yt, c, cp}).scores;
      worst = std::max(worst, h.cwiseAbs().maxCoeff() - kernel->kappa() * mb * std::sqrt(c + cp));
    }
    out.push_back({"regressors", "ltr_output_bound", worst <= 1e-8, "max excess " + detail::fmt(worst)});
  }
  return out;
}

inline std::vector<CheckResult> verify_stability(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(mix_seed(opt.seed, 300));
  const Index n = 10;
  {
    double excess = -1e300;
    for (Index k = 0; k < 3; ++k) {
      const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
      const Vector y = detail::random_labels(rng, n, 1.0);
      const FullSample s = detail::sample_with_labels(y, 1.0);
      const Partition p = sample_partition(n, 5, rng.next_u64());
      const double mu = rng.uniform(0.2, 3.0);
      const auto rep = empirical_stability(
          [&](const Partition& q) { return solve_unconstrained(build_cm(g, mu, y, q)); }, s, p, enumerate_swaps(p));
      excess = std::max(excess, rep.max_score_delta - cm_score_bound(1.0));
    }
    out.push_back({"stability", "cm_score_bound", excess <= 1e-9, "max excess " + detail::fmt(excess)});
  }
  {
    double excess = -1e300;
    for (Index k = 0; k < 3; ++k) {
      const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
      const Vector y = detail::random_labels(rng, n, 1.0);
      const FullSample s = detail::sample_with_labels(y, 1.0);
      const Partition p = sample_partition(n, 5, rng.next_u64());
      const double cl = rng.uniform(0.5, 3.0), cu = rng.uniform(0.05, 0.5);
      const auto rep = empirical_stability(
          [&](const Partition& q) { return solve_unconstrained(build_llreg(g.weights(), cl, cu, y, q)); }, s, p,
          enumerate_swaps(p));
      excess = std::max(excess, rep.max_score_delta - llreg_score_bound(1.0, 5, std::min(cl, cu), std::max(cl, cu)));
    }
    out.push_back({"stability", "llreg_score_bound", excess <= 1e-9, "max excess " + detail::fmt(excess)});
  }
  {
    double excess = -1e300;
    Index checked = 0;
    for (Index k = 0; k < 10 && checked < 3; ++k) {
      const GraphSpec g = random_connected_graph(n, 0.7, rng.next_u64());
      const Matrix l = laplacian(g);
      const double lambda2 = spectrum(l).lambda2;
      const double c = 0.5 * 5.0 * lambda2 * rng.uniform(0.2, 0.9);
      if (5.0 * lambda2 / c <= 1.0) continue;
      Vector y = detail::random_labels(rng, n, 1.0);
      y.array() -= y.mean();
      const double mb = y.cwiseAbs().maxCoeff();
      const FullSample s = detail::sample_with_labels(y, mb);
      const Partition p = sample_partition(n, 5, rng.next_u64());
      const auto rep = empirical_stability(
          [&](const Partition& q) { return solve_constrained({l, c, q, y, std::nullopt, false}); }, s, p,
          enumerate_swaps(p));
      excess = std::max(excess, rep.max_score_delta - belkin_score_stability(mb, 5, c, lambda2));
      ++checked;
    }
    out.push_back({"stability", "belkin_score_bound", checked > 0 && excess <= 1e-9,
                   std::to_string(checked) + " graphs, max excess " + detail::fmt(excess)});
  }
  {
    double worst = 0.0;
    bool above = true;
    for (Index m : {2, 5, 10})
      for (double c : {0.5, 1.0, 10.0}) {
        const LowerBoundInstance inst = cm_lower_bound_instance(m, c);
        const SwapPair sw = inst.canonical_swap();
        const Vector h0 = solve_unconstrained(inst.problem()).scores;
        const Vector h1 = solve_unconstrained(inst.problem_for(inst.part.swapped(sw))).scores;
        const double delta = std::abs(h1(static_cast<Eigen::Index>(sw.added)) - h0(static_cast<Eigen::Index>(sw.added)));
        worst = std::max(worst, std::abs(delta - inst.predicted_a));
        above = above && delta >= c / (2.0 * (c + 1.0)) - 1e-12;
      }
    out.push_back({"stability", "cm_lower_bound", worst <= 1e-9 && above, "max error " + detail::fmt(worst)});
  }
  return out;
}

inline std::vector<CheckResult> verify_bounds(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  std::vector<double> pop(1000, 0.0);
  std::fill(pop.begin() + 500, pop.end(), 1.0);
  const Index trials = opt.level == VerifyLevel::Full ? 100000 : 10000;
  ConcentrationOptions co;
  co.jobs = opt.jobs;
  if (opt.alpha_fault != 1.0) co.alpha_override = opt.alpha_fault * alpha(500, 500);
  for (double eps : {0.02, 0.05, 0.1}) {
    const ConcentrationResult r = concentration_harness(pop, 500, eps, trials, mix_seed(opt.seed, 400), co);
    out.push_back({"bounds", "concentration_eps_" + detail::fmt(eps), r.within_bound(),
                   std::to_string(trials) + " trials, tail " + detail::fmt(r.empirical_tail) + " <= " +
                       detail::fmt(r.slack_limit)});
  }
  {
    const double a = opt.alpha_fault * alpha(100, 100);
    const double oracle = 0.1 + 0.05 + (0.1 + 200.0 / 10000.0) * std::sqrt(a * std::log(1.0 / 0.05) / 2.0);
    const double got = generalization_bound(0.1, 0.05, 1.0, 100, 100, 0.05).bound_value;
    out.push_back({"bounds", "generalization_bound_closed_form", std::abs(got - oracle) <= 1e-12,
                   detail::fmt(got) + " vs " + detail::fmt(oracle)});
  }
  return out;
}

inline std::vector<CheckResult> verify_cli(const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  const LocalityTask task = make_locality_task(30, 2, 0.8, 0.05, 3, mix_seed(opt.seed, 500));
  CsvTable table;
  table.header = {"x1", "x2", "y"};
  for (Eigen::Index i = 0; i < task.points.rows(); ++i)
    table.rows.push_back({task.points(i, 0), task.points(i, 1), task.targets(i)});
  const LoadedData data = normalize_table(table, 1.0);
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::Ltr;
  cfg.partitions = 2;
  cfg.seed = opt.seed;
  cfg.sigma = 1.0;
  cfg.radius_grid = {0.5, 1.0, 2.0, 4.0};
  cfg.fallback = Fallback::Zero;
  const std::string a = dump_report(run_experiment(cfg, data));
  const std::string b = dump_report(run_experiment(cfg, data));
  out.push_back({"cli", "report_deterministic", a == b, std::to_string(a.size()) + " bytes"});
  const std::string c = dump_report(report_from_json(Json::parse(a)));
  out.push_back({"cli", "report_round_trip", a == c, "parse and re-dump"});
  return out;
}

inline VerifyReport verify_suite(const VerifyOptions& opt) {
  VerifyReport rep;
  using Suite = std::vector<CheckResult> (*)(const VerifyOptions&);
  const std::pair<const char*, Suite> suites[] = {{"core", verify_core},           {"graph", verify_graph},
                                                  {"regressors", verify_regressors}, {"stability", verify_stability},
                                                  {"bounds", verify_bounds},       {"cli", verify_cli}};
  for (const auto& [name, suite] : suites) {
    try {
      for (auto& c : suite(opt)) rep.checks.push_back(std::move(c));
    } catch (const std::exception& e) {
      rep.checks.push_back({name, "suite_error", false, e.what()});
    }
  }
  return rep;
}

}  // namespace tsr
