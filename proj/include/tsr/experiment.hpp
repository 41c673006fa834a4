#pragma once

// Experiment driver: per-partition fitting of every algorithm together with
// its theoretical stability coefficient and generalization bound, radius
// selection for LTR, and the machine-readable report.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "tsr/bounds.hpp"
#include "tsr/constrained.hpp"
#include "tsr/core.hpp"
#include "tsr/data.hpp"
#include "tsr/error.hpp"
#include "tsr/graph.hpp"
#include "tsr/ltr.hpp"
#include "tsr/rng.hpp"
#include "tsr/stability.hpp"
#include "tsr/unconstrained.hpp"
#include "tsr/version.hpp"

namespace tsr {

enum class Algorithm { Ltr, Krr, Cm, LlReg, Gmf, Laplacian, StabilizedCm, StabilizedLlReg, StabilizedGmf };

constexpr std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ltr: return "ltr";
    case Algorithm::Krr: return "krr";
    case Algorithm::Cm: return "cm";
    case Algorithm::LlReg: return "llreg";
    case Algorithm::Gmf: return "gmf";
    case Algorithm::Laplacian: return "laplacian";
    case Algorithm::StabilizedCm: return "stabilized-cm";
    case Algorithm::StabilizedLlReg: return "stabilized-llreg";
    case Algorithm::StabilizedGmf: return "stabilized-gmf";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : {Algorithm::Ltr, Algorithm::Krr, Algorithm::Cm, Algorithm::LlReg, Algorithm::Gmf,
                      Algorithm::Laplacian, Algorithm::StabilizedCm, Algorithm::StabilizedLlReg,
                      Algorithm::StabilizedGmf})
    if (to_string(a) == s) return a;
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + std::string(s) + "'");
}

inline bool uses_graph(Algorithm a) {
  return a != Algorithm::Ltr && a != Algorithm::Krr;
}

struct ExperimentConfig {
  std::string data_path;
  double target_scale = 1.0;
  double m_fraction = 0.5;
  Index partitions = 1;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::Ltr;
  double c = 1.0;        // LTR/KRR labeled trade-off; Laplacian C
  double c_prime = 1.0;  // LTR unlabeled trade-off
  double mu = 1.0;       // CM
  double c_l = 1.0;      // LL-Reg / GMF
  double c_u = 0.1;
  std::optional<double> sigma;      // empty: cross-validated on the training set
  std::vector<double> radius_grid;  // empty: automatic grid for LTR
  Index auto_grid_points = 12;
  double delta = 0.1;
  Weighting weighting = Weighting::Gaussian;
  Fallback fallback = Fallback::Error;
  std::string graph_path;  // optional edge list for the graph algorithms
  bool center_labels = true;
  unsigned jobs = 1;
  std::string output_path;

  void validate() const {
    detail::require(m_fraction > 0.0 && m_fraction < 1.0, ErrorCode::InvalidConfig,
                    "m_fraction must lie in (0, 1)");
    detail::require(partitions >= 1, ErrorCode::InvalidConfig, "partitions must be >= 1");
    detail::require(!sigma || *sigma > 0.0, ErrorCode::InvalidConfig, "sigma must be positive");
    detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::InvalidConfig, "delta must be in (0, 1]");
    for (std::size_t i = 0; i < radius_grid.size(); ++i) {
      detail::require(radius_grid[i] >= 0.0 && std::isfinite(radius_grid[i]), ErrorCode::InvalidConfig,
                      "radius grid values must be finite and >= 0");
      detail::require(i == 0 || radius_grid[i] > radius_grid[i - 1], ErrorCode::InvalidConfig,
                      "radius grid must be strictly increasing");
    }
    detail::require(c >= 0.0 && c_prime >= 0.0 && mu > 0.0 && c_l > 0.0 && c_u > 0.0,
                    ErrorCode::InvalidConfig, "trade-off parameters out of range");
    detail::require(target_scale != 0.0 && std::isfinite(target_scale), ErrorCode::InvalidConfig,
                    "target scale must be finite and non-zero");
  }
};

inline Index train_size(Index n, double m_fraction) {
  const auto m = static_cast<Index>(std::llround(m_fraction * static_cast<double>(n)));
  return std::clamp<Index>(m, 1, n - 1);
}

/// Seed of partition k, derived from the master seed.
inline std::uint64_t partition_seed(std::uint64_t master, Index k) { return mix_seed(master, k); }

// ---------------------------------------------------------------------------
// Kernel bandwidth by cross-validation

inline double median_pairwise_distance(const Matrix& x, const std::vector<Index>& idx) {
  std::vector<double> d;
  d.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      d.push_back((x.row(static_cast<Eigen::Index>(idx[a])) - x.row(static_cast<Eigen::Index>(idx[b]))).norm());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

inline const std::vector<double>& sigma_grid_factors() {
  static const std::vector<double> f{0.1, 0.3, 1.0, 3.0, 10.0};
  return f;
}

/// 5-fold cross-validation of kernel ridge regression on the training set
/// over {0.1, 0.3, 1, 3, 10} x median pairwise distance. Ties go to the
/// smaller bandwidth.
inline double cross_validate_sigma(const FullSample& sample, const Partition& part, double c,
                                   std::uint64_t seed, Index folds = 5) {
  std::vector<Index> idx = part.train();
  const Index m = idx.size();
  folds = std::clamp<Index>(folds, 2, m);
  Rng rng(seed);
  for (Index i = m; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  const double med = median_pairwise_distance(sample.points(), idx);
  if (m < 2 || c == 0.0) return med;

  const Matrix& x = sample.points();
  const Vector& y = sample.targets();
  double best_sigma = med, best_err = std::numeric_limits<double>::infinity();
  for (double factor : sigma_grid_factors()) {
    const double sigma = factor * med;
    Matrix k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (Index a = 0; a < m; ++a)
      for (Index b = a; b < m; ++b) {
        const double v = gaussian_kernel(
            (x.row(static_cast<Eigen::Index>(idx[a])) - x.row(static_cast<Eigen::Index>(idx[b]))).squaredNorm(),
            sigma);
        k(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
        k(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
      }
    double err = 0.0;
    for (Index f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> tr, va;
      for (Index i = 0; i < m; ++i) (i % folds == f ? va : tr).push_back(static_cast<Eigen::Index>(i));
      const auto nt = static_cast<Eigen::Index>(tr.size());
      Matrix ktt(nt, nt);
      Vector yt(nt);
      for (Eigen::Index a = 0; a < nt; ++a) {
        yt(a) = y(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(tr[static_cast<std::size_t>(a)])]));
        for (Eigen::Index b = 0; b < nt; ++b) ktt(a, b) = k(tr[static_cast<std::size_t>(a)], tr[static_cast<std::size_t>(b)]);
      }
      ktt.diagonal().array() += static_cast<double>(nt) / c;
      const Vector coef = ktt.ldlt().solve(yt);
      for (Eigen::Index v : va) {
        double pred = 0.0;
        for (Eigen::Index a = 0; a < nt; ++a) pred += k(v, tr[static_cast<std::size_t>(a)]) * coef(a);
        err += square_loss(pred, y(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(v)])));
      }
    }
    if (err < best_err) {
      best_err = err;
      best_sigma = sigma;
    }
  }
  return best_sigma;
}

// ---------------------------------------------------------------------------
// Radius selection for LTR

struct LtrSettings {
  std::shared_ptr<const GramMatrix> kernel;
  double c = 1.0;
  double c_prime = 1.0;
  double sigma = 1.0;  // weights of the local estimator (gaussian)
  Weighting weighting = Weighting::Gaussian;
  Fallback fallback = Fallback::Error;
  double delta = 0.1;
};

struct RadiusEvaluation {
  double r = 0.0;
  bool solved = false;  // pseudo-targets available and LTR solved
  Index m_r = 0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();
  double test_mse = std::numeric_limits<double>::quiet_NaN();
  double beta_loc = std::numeric_limits<double>::infinity();
  double beta = std::numeric_limits<double>::infinity();
  double slack = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::infinity();  // train_mse + slack
  std::string note;
};

struct RadiusSelection {
  double r_star = 0.0;
  std::vector<RadiusEvaluation> per_r;
  HypothesisScores h_star;
};

inline double local_beta(const LtrSettings& s, double label_bound, Index m_r, double r) {
  return s.weighting == Weighting::Gaussian ? beta_loc_gaussian(label_bound, m_r, r, s.sigma)
                                            : beta_loc_invdist(label_bound, m_r, r);
}

inline LtrProblem make_ltr_problem(const LtrSettings& s, const FullSample& sample,
                                   const Partition& part, double r) {
  LocalEstimatorConfig est{r, s.weighting, s.sigma, s.fallback};
  Vector y_tilde = s.c_prime > 0.0 ? pseudo_targets(sample, part, est) : Vector();
  return LtrProblem{s.kernel, part, sample.targets(), std::move(y_tilde), s.c, s.c_prime};
}

/// Scores one radius: LTR fit, beta_loc from m(r), beta and slack of the
/// generalization bound.
inline RadiusEvaluation evaluate_radius(const LtrSettings& s, const FullSample& sample,
                                        const Partition& part, double r, HypothesisScores* fit = nullptr) {
  RadiusEvaluation ev;
  ev.r = r;
  ev.m_r = m_of_r(sample, part, r);
  HypothesisScores h;
  try {
    h = solve_ltr(make_ltr_problem(s, sample, part, r));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PseudoTargetUnavailable) throw;
    ev.note = e.what();
    return ev;
  }
  ev.solved = true;
  ev.train_mse = empirical_error(h, sample, part);
  ev.test_mse = test_error(h, sample, part);
  const double mb = sample.label_bound();
  const double kappa = s.kernel->kappa();
  if (ev.m_r >= 1) {
    ev.beta_loc = local_beta(s, mb, ev.m_r, r);
    ev.beta = ltr_stability_bound({part.m(), part.u(), s.c, s.c_prime, kappa, mb, ev.beta_loc});
    const double b = ltr_residual_bound(mb, kappa, s.c, s.c_prime);
    const BoundReport rep = generalization_bound(ev.train_mse, ev.beta, b, part.m(), part.u(), s.delta);
    ev.slack = rep.slack;
    ev.objective = rep.bound_value;
  } else {
    ev.note = "m(r) = 0: no labeled point within r of the origin";
  }
  if (fit) *fit = std::move(h);
  return ev;
}

/// r* = argmin over the grid of training error + slack; ties go to the
/// smaller radius.
inline RadiusSelection select_radius(const LtrSettings& s, const FullSample& sample,
                                     const Partition& part, const std::vector<double>& grid) {
  detail::require(!grid.empty(), ErrorCode::InvalidConfig, "radius grid is empty");
  RadiusSelection sel;
  double best = std::numeric_limits<double>::infinity();
  bool any_solved = false;
  for (double r : grid) {
    HypothesisScores h;
    RadiusEvaluation ev = evaluate_radius(s, sample, part, r, &h);
    any_solved = any_solved || ev.solved;
    if (ev.solved && ev.objective < best) {
      best = ev.objective;
      sel.r_star = r;
      sel.h_star = std::move(h);
    }
    sel.per_r.push_back(std::move(ev));
  }
  detail::require(any_solved, ErrorCode::NoFeasibleRadius,
                  "every radius leaves some test point without labeled neighbours");
  detail::require(std::isfinite(best), ErrorCode::NoFeasibleRadius,
                  "no radius has a finite bound (m(r) = 0 everywhere)");
  return sel;
}

/// 0 .. radius of the ball around the origin containing every point.
inline std::vector<double> automatic_radius_grid(const FullSample& sample, Index points) {
  points = std::max<Index>(points, 2);
  const double rmax = sample.points().rowwise().norm().maxCoeff();
  std::vector<double> grid(points);
  for (Index i = 0; i < points; ++i)
    grid[i] = rmax * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

// ---------------------------------------------------------------------------
// Per-algorithm fitting

/// What each algorithm contributes to the generalization bound.
struct Coefficients {
  std::optional<double> score_bound;  // sup-norm score stability, when derived
  double beta = 0.0;                  // cost stability fed to the bound
  double residual_bound = 0.0;        // B
};

/// Everything that is fixed for one partition before fitting.
struct PartitionContext {
  const FullSample* sample = nullptr;
  const ExperimentConfig* cfg = nullptr;
  double sigma = 1.0;
  std::shared_ptr<const GramMatrix> kernel;  // LTR / KRR
  std::optional<GraphSpec> graph;            // graph algorithms
  double radius = 0.0;                       // LTR radius in use
};

inline LtrSettings ltr_settings(const PartitionContext& ctx, double c_prime) {
  const ExperimentConfig& cfg = *ctx.cfg;
  return LtrSettings{ctx.kernel, cfg.c, c_prime, ctx.sigma, cfg.weighting, cfg.fallback, cfg.delta};
}

inline UnconstrainedProblem build_unconstrained(const PartitionContext& ctx, const Partition& part) {
  const ExperimentConfig& cfg = *ctx.cfg;
  const Vector& y = ctx.sample->targets();
  switch (cfg.algorithm) {
    case Algorithm::Cm:
    case Algorithm::StabilizedCm: return build_cm(*ctx.graph, cfg.mu, y, part);
    case Algorithm::LlReg:
    case Algorithm::StabilizedLlReg: return build_llreg(ctx.graph->weights(), cfg.c_l, cfg.c_u, y, part);
    case Algorithm::Gmf:
    case Algorithm::StabilizedGmf: return build_gmf(*ctx.graph, cfg.c_l, cfg.c_u, y, part);
    default: throw Error(ErrorCode::InvalidConfig, "not an unconstrained algorithm");
  }
}

/// Solver closure: partition -> scores, with every partition-independent
/// choice (sigma, graph, radius) frozen in the context.
inline PartitionSolver make_solver(const PartitionContext& ctx) {
  const ExperimentConfig& cfg = *ctx.cfg;
  switch (cfg.algorithm) {
    case Algorithm::Ltr:
      return [&ctx](const Partition& p) {
        return solve_ltr(make_ltr_problem(ltr_settings(ctx, ctx.cfg->c_prime), *ctx.sample, p, ctx.radius));
      };
    case Algorithm::Krr:
      return [&ctx](const Partition& p) {
        return solve_krr_induction(LtrProblem{ctx.kernel, p, ctx.sample->targets(), Vector(), ctx.cfg->c, 0.0});
      };
    case Algorithm::Cm:
    case Algorithm::LlReg:
    case Algorithm::Gmf:
      return [&ctx](const Partition& p) { return solve_unconstrained(build_unconstrained(ctx, p)); };
    case Algorithm::StabilizedCm:
    case Algorithm::StabilizedLlReg:
    case Algorithm::StabilizedGmf:
      return [&ctx](const Partition& p) { return stabilize(build_unconstrained(ctx, p)); };
    case Algorithm::Laplacian:
      return [&ctx](const Partition& p) {
        ConstrainedProblem cp{laplacian(*ctx.graph), ctx.cfg->c, p, ctx.sample->targets(), std::nullopt,
                              ctx.cfg->center_labels};
        return solve_constrained(cp);
      };
  }
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm");
}

/// Residual bound for the closed-form family: |h_i| <= ||h||_2 <=
/// sqrt(C_max / C_min) ||y||_2 <= sqrt(m C_max / C_min) M.
inline double unconstrained_residual_bound(double label_bound, Index m, double c_min, double c_max) {
  return label_bound * (1.0 + std::sqrt(static_cast<double>(m) * c_max / c_min));
}

inline Coefficients theoretical_coefficients(const PartitionContext& ctx, const Partition& part) {
  const ExperimentConfig& cfg = *ctx.cfg;
  const double mb = ctx.sample->label_bound();
  const Index m = part.m();
  Coefficients out;
  switch (cfg.algorithm) {
    case Algorithm::Ltr:
    case Algorithm::Krr: {
      const double cp = cfg.algorithm == Algorithm::Krr ? 0.0 : cfg.c_prime;
      const double kappa = ctx.kernel->kappa();
      double beta_loc = 0.0;
      if (cp > 0.0) {
        const Index m_r = m_of_r(*ctx.sample, part, ctx.radius);
        beta_loc = m_r >= 1 ? local_beta(ltr_settings(ctx, cp), mb, m_r, ctx.radius)
                            : std::numeric_limits<double>::infinity();
      }
      out.residual_bound = ltr_residual_bound(mb, kappa, cfg.c, cp);
      out.beta = std::isfinite(beta_loc)
                     ? ltr_stability_bound({m, part.u(), cfg.c, cp, kappa, mb, beta_loc})
                     : std::numeric_limits<double>::infinity();
      return out;
    }
    case Algorithm::Cm:
      out.score_bound = cm_score_bound(mb);
      out.residual_bound = unconstrained_residual_bound(mb, m, cfg.mu, cfg.mu);
      break;
    case Algorithm::LlReg:
    case Algorithm::Gmf: {
      const double cmin = std::min(cfg.c_l, cfg.c_u), cmax = std::max(cfg.c_l, cfg.c_u);
      out.score_bound = llreg_score_bound(mb, m, cmin, cmax);
      out.residual_bound = unconstrained_residual_bound(mb, m, cmin, cmax);
      break;
    }
    case Algorithm::StabilizedCm:
    case Algorithm::StabilizedLlReg:
    case Algorithm::StabilizedGmf: {
      const UnconstrainedProblem p = build_unconstrained(ctx, part);
      SpectrumSummary q = spectrum(p.q());
      q.lambda_min = q.lambda2;  // effective smallest eigenvalue on the constraint hyperplane
      const bool cm = cfg.algorithm == Algorithm::StabilizedCm;
      const double cmin = cm ? cfg.mu : std::min(cfg.c_l, cfg.c_u);
      const double cmax = cm ? cfg.mu : std::max(cfg.c_l, cfg.c_u);
      SpectrumSummary cs;
      cs.lambda_min = cmin;
      cs.lambda_max = cmax;
      const double md = static_cast<double>(m);
      out.score_bound = unconstrained_score_bound(q, cs, cs, std::numbers::sqrt2 * mb, std::sqrt(md) * mb,
                                                  std::numbers::sqrt2 * (1.0 / cmin - 1.0 / cmax));
      out.residual_bound = unconstrained_residual_bound(mb, m, cmin, cmax);
      break;
    }
    case Algorithm::Laplacian: {
      const SpectrumSummary s = spectrum(laplacian(*ctx.graph));
      const Index rho = diameter(*ctx.graph);
      const double kappa2 = laplacian_kernel_kappa2(s.lambda2, rho);
      // The algorithm is LTR with kernel L^+ and C' = 0, so |h - y| <= M (1 + kappa sqrt(C)).
      out.residual_bound = ltr_residual_bound(mb, std::sqrt(kappa2), cfg.c, 0.0);
      out.beta = belkin_cost_stability(cfg.c, out.residual_bound, m, s.lambda2, rho);
      try {
        out.score_bound = belkin_sup_norm_bound(mb, m, cfg.c, s.lambda2);
      } catch (const Error&) {
        // m lambda_2 / C <= 1: no score bound.
      }
      return out;
    }
  }
  out.beta = score_to_cost_stability(*out.score_bound, out.residual_bound);
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct PartitionRecord {
  Index index = 0;
  std::uint64_t seed = 0;
  double sigma = 0.0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();
  double test_mse = std::numeric_limits<double>::quiet_NaN();
  double bound_value = std::numeric_limits<double>::quiet_NaN();
  double beta_used = std::numeric_limits<double>::quiet_NaN();
  double residual_bound = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> r_star;
  std::string error;
  std::vector<RadiusEvaluation> sweep;

  bool ok() const { return error.empty(); }
};

struct Summary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  Index count = 0;
};

/// Mean and sample standard deviation (n - 1; 0 for a single value) of the
/// finite values.
inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++s.count;
    }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (double v : values)
    if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
  s.std = s.count > 1 ? std::sqrt(ss / static_cast<double>(s.count - 1)) : 0.0;
  return s;
}

struct ExperimentReport {
  ExperimentConfig config;
  Index sample_size = 0;
  Index m = 0;
  Index u = 0;
  double label_bound = 0.0;
  std::vector<std::string> warnings;
  std::vector<PartitionRecord> records;

  Summary aggregate(double PartitionRecord::*field) const {
    std::vector<double> v;
    for (const auto& r : records)
      if (r.ok()) v.push_back(r.*field);
    return summarize(v);
  }
  Summary aggregate_r_star() const {
    std::vector<double> v;
    for (const auto& r : records)
      if (r.ok() && r.r_star) v.push_back(*r.r_star);
    return summarize(v);
  }
  bool has_sweep() const {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.sweep.empty(); });
  }
};

/// Sigma (fixed or cross-validated) and the kernel or graph for one
/// partition. The radius is left at the first grid value.
inline PartitionContext make_context(const ExperimentConfig& cfg, const FullSample& sample,
                                     const Partition& part, std::uint64_t seed) {
  PartitionContext ctx;
  ctx.sample = &sample;
  ctx.cfg = &cfg;
  ctx.sigma = cfg.sigma ? *cfg.sigma
                        : cross_validate_sigma(sample, part, cfg.c > 0.0 ? cfg.c : 1.0, mix_seed(seed, 1));
  if (uses_graph(cfg.algorithm)) {
    ctx.graph = cfg.graph_path.empty() ? gaussian_affinity(sample.points(), ctx.sigma)
                                       : read_edge_list_file(cfg.graph_path, sample.size());
  } else {
    ctx.kernel = gaussian_gram(sample.points(), ctx.sigma);
  }
  if (!cfg.radius_grid.empty()) ctx.radius = cfg.radius_grid.front();
  return ctx;
}

/// Fits partition k and records errors and the bound. The LTR radius is
/// selected when the grid has more than one value. Solver failures are
/// recorded in the record instead of thrown.
inline PartitionRecord fit_partition(const ExperimentConfig& cfg, const FullSample& sample, Index k) {
  PartitionRecord rec;
  rec.index = k;
  rec.seed = partition_seed(cfg.seed, k);
  try {
    const Partition part = sample_partition(sample, train_size(sample.size(), cfg.m_fraction), rec.seed);
    PartitionContext ctx = make_context(cfg, sample, part, rec.seed);
    rec.sigma = ctx.sigma;
    HypothesisScores h;
    if (cfg.algorithm == Algorithm::Ltr && cfg.c_prime > 0.0) {
      const std::vector<double> grid =
          cfg.radius_grid.empty() ? automatic_radius_grid(sample, cfg.auto_grid_points) : cfg.radius_grid;
      if (grid.size() == 1) {
        ctx.radius = grid.front();
        h = make_solver(ctx)(part);
      } else {
        RadiusSelection sel = select_radius(ltr_settings(ctx, cfg.c_prime), sample, part, grid);
        ctx.radius = sel.r_star;
        rec.r_star = sel.r_star;
        rec.sweep = std::move(sel.per_r);
        h = std::move(sel.h_star);
      }
    } else {
      h = make_solver(ctx)(part);
    }
    rec.train_mse = empirical_error(h, sample, part);
    rec.test_mse = test_error(h, sample, part);
    const Coefficients co = theoretical_coefficients(ctx, part);
    rec.beta_used = co.beta;
    rec.residual_bound = co.residual_bound;
    rec.bound_value = std::isfinite(co.beta)
                          ? generalization_bound(rec.train_mse, co.beta, co.residual_bound, part.m(),
                                                 part.u(), cfg.delta)
                                .bound_value
                          : std::numeric_limits<double>::infinity();
  } catch (const Error& e) {
    rec.error = e.what();
  }
  return rec;
}

/// Runs every partition (concurrently up to cfg.jobs). Records are ordered by
/// partition index and depend only on (config, seed).
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const LoadedData& data) {
  cfg.validate();
  ExperimentReport rep;
  rep.config = cfg;
  rep.sample_size = data.sample.size();
  rep.m = train_size(data.sample.size(), cfg.m_fraction);
  rep.u = rep.sample_size - rep.m;
  rep.label_bound = data.sample.label_bound();
  rep.warnings = data.warnings;
  rep.records.resize(cfg.partitions);

  std::atomic<Index> next{0};
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cfg.partitions)));
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w)
      workers.emplace_back([&] {
        for (Index k = next++; k < cfg.partitions; k = next++)
          rep.records[k] = fit_partition(cfg, data.sample, k);
      });
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Plot data

enum class PlotKind { MseVsR, BoundVsR };

inline PlotKind parse_plot_kind(std::string_view s) {
  if (s == "mse_vs_r") return PlotKind::MseVsR;
  if (s == "bound_vs_r") return PlotKind::BoundVsR;
  throw Error(ErrorCode::InvalidConfig, "unknown plot kind '" + std::string(s) + "'");
}

/// Shortest round-trip decimal form, independent of the C locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct PlotRow {
  double r = 0.0;
  Summary value;
};

/// Per grid radius: mean/std over partitions of the test MSE (mse_vs_r) or
/// of train MSE + scale * slack (bound_vs_r).
inline std::vector<PlotRow> plot_rows(const ExperimentReport& rep, PlotKind kind, double scale = 1.0) {
  detail::require(rep.has_sweep(), ErrorCode::NoSweepData, "report has no radius sweep");
  std::vector<double> radii;
  for (const auto& rec : rep.records)
    if (rec.ok() && !rec.sweep.empty()) {
      for (const auto& ev : rec.sweep) radii.push_back(ev.r);
      break;
    }
  std::vector<PlotRow> rows;
  for (std::size_t g = 0; g < radii.size(); ++g) {
    std::vector<double> vals;
    for (const auto& rec : rep.records) {
      if (!rec.ok() || rec.sweep.size() != radii.size()) continue;
      const RadiusEvaluation& ev = rec.sweep[g];
      vals.push_back(kind == PlotKind::MseVsR ? ev.test_mse
                     : std::isfinite(ev.slack) ? ev.train_mse + scale * ev.slack
                                               : std::numeric_limits<double>::infinity());
    }
    rows.push_back({radii[g], summarize(vals)});
  }
  return rows;
}

inline std::string emit_plot_data(const ExperimentReport& rep, PlotKind kind, double scale = 1.0) {
  std::ostringstream out;
  out << "r,mean,std\n";
  for (const PlotRow& row : plot_rows(rep, kind, scale))
    out << format_double(row.r) << ',' << format_double(row.value.mean) << ','
        << format_double(row.value.std) << '\n';
  return out.str();
}

}  // namespace tsr
