#pragma once

// Theoretical stability coefficients, the empirical swap-based estimator that
// checks them, and the consistency-method instance whose score stability
// does not vanish with the sample size.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tsr/core.hpp"
#include "tsr/error.hpp"
#include "tsr/graph.hpp"
#include "tsr/rng.hpp"
#include "tsr/unconstrained.hpp"

namespace tsr {

struct StabilityInputs {
  Index m = 1;
  Index u = 1;
  double c = 0.0;
  double c_prime = 0.0;
  double kappa = 1.0;
  double label_bound = 1.0;  // M
  double beta_loc = 0.0;
};

/// A = 1 + kappa sqrt(C + C').
inline double ltr_residual_factor(double kappa, double c, double c_prime) {
  return 1.0 + kappa * std::sqrt(c + c_prime);
}

/// Bound on |h(x) - y(x)| for LTR: M (1 + kappa sqrt(C + C')).
inline double ltr_residual_bound(double label_bound, double kappa, double c, double c_prime) {
  return label_bound * ltr_residual_factor(kappa, c, c_prime);
}

/// Cost-stability coefficient of LTR:
///   2 (AM)^2 k^2 [ C/m + C'/u + sqrt((C/m + C'/u)^2 + 2 C' b_loc / (A M k^2 u)) ].
inline double ltr_stability_bound(const StabilityInputs& in) {
  detail::require(in.kappa > 0.0 && in.label_bound > 0.0, ErrorCode::InvalidStabilityInput,
                  "kappa and M must be positive");
  detail::require(in.m >= 1 && in.u >= 1, ErrorCode::InvalidStabilityInput, "m, u must be >= 1");
  detail::require(in.c >= 0.0 && in.c_prime >= 0.0 && in.beta_loc >= 0.0,
                  ErrorCode::InvalidStabilityInput, "C, C', beta_loc must be >= 0");
  const double a = ltr_residual_factor(in.kappa, in.c, in.c_prime);
  const double am = a * in.label_bound;
  const double k2 = in.kappa * in.kappa;
  const double rate = in.c / static_cast<double>(in.m) + in.c_prime / static_cast<double>(in.u);
  const double radical =
      std::sqrt(rate * rate + 2.0 * in.c_prime * in.beta_loc / (am * k2 * static_cast<double>(in.u)));
  return 2.0 * am * am * k2 * (rate + radical);
}

/// ||h* - h'*||_2 bound for two closed-form solutions that differ in one
/// swapped point (first argument: Q, then C and C').
inline double unconstrained_score_bound(const SpectrumSummary& q_spec, const SpectrumSummary& c_spec,
                                        const SpectrumSummary& cp_spec, double delta_y_norm,
                                        double yprime_norm, double cinv_diff_norm) {
  const double lq_min = std::max(0.0, q_spec.lambda_min);
  const double denom_c = lq_min / c_spec.lambda_max + 1.0;
  const double denom_cp = lq_min / cp_spec.lambda_max + 1.0;
  return delta_y_norm / denom_c +
         q_spec.lambda_max * cinv_diff_norm * yprime_norm / (denom_cp * denom_c);
}

/// Consistency method: sqrt(2) M.
inline double cm_score_bound(double label_bound) {
  detail::require(label_bound >= 0.0, ErrorCode::InvalidStabilityInput, "M must be >= 0");
  return std::numbers::sqrt2 * label_bound;
}

/// LL-Reg: sqrt(2) M + 4 sqrt(2m) M (1/C_min - 1/C_max).
inline double llreg_score_bound(double label_bound, Index m, double c_min, double c_max) {
  detail::require(c_min > 0.0 && c_min <= c_max, ErrorCode::InvalidStabilityInput,
                  "need 0 < C_min <= C_max");
  const double md = static_cast<double>(m);
  return std::numbers::sqrt2 * label_bound +
         4.0 * std::sqrt(2.0 * md) * label_bound * (1.0 / c_min - 1.0 / c_max);
}

/// The looser form sqrt(2) M + 4 sqrt(2m) M / C_min.
inline double llreg_score_bound_loose(double label_bound, Index m, double c_min) {
  detail::require(c_min > 0.0, ErrorCode::InvalidStabilityInput, "C_min must be positive");
  return std::numbers::sqrt2 * label_bound +
         4.0 * std::sqrt(2.0 * static_cast<double>(m)) * label_bound / c_min;
}

/// Graph Laplacian regularization with the h^T 1 = 0 constraint:
///   4 sqrt(2) M^2 / (m l2/C - 1) + 4 sqrt(2m) M^2 / (m l2/C - 1)^2.
/// Derived as a sup-norm bound, used as the beta of the generalization bound.
inline double belkin_score_stability(double label_bound, Index m, double c, double lambda2) {
  detail::require(c > 0.0 && label_bound >= 0.0, ErrorCode::InvalidStabilityInput,
                  "need C > 0, M >= 0");
  const double md = static_cast<double>(m);
  const double g = md * lambda2 / c - 1.0;
  detail::require(g > 0.0, ErrorCode::BoundDiverges, "bound requires m*lambda2/C > 1");
  const double m2 = label_bound * label_bound;
  return 4.0 * std::numbers::sqrt2 * m2 / g + 4.0 * std::sqrt(2.0 * md) * m2 / (g * g);
}

/// The sup-norm score bound that the previous coefficient is built from:
///   sqrt(2) M / g + sqrt(2m) M / g^2,  g = m l2/C - 1.
inline double belkin_sup_norm_bound(double label_bound, Index m, double c, double lambda2) {
  detail::require(c > 0.0 && label_bound >= 0.0, ErrorCode::InvalidStabilityInput,
                  "need C > 0, M >= 0");
  const double md = static_cast<double>(m);
  const double g = md * lambda2 / c - 1.0;
  detail::require(g > 0.0, ErrorCode::BoundDiverges, "bound requires m*lambda2/C > 1");
  return std::numbers::sqrt2 * label_bound / g + std::sqrt(2.0 * md) * label_bound / (g * g);
}

/// kappa^2 <= min{1/lambda_2, rho_G} for the kernel L^+.
inline double laplacian_kernel_kappa2(double lambda2, Index rho_g) {
  detail::require(lambda2 > 0.0, ErrorCode::GraphDisconnected, "lambda_2 must be positive");
  detail::require(rho_g >= 1, ErrorCode::InvalidStabilityInput, "diameter must be >= 1");
  return std::min(1.0 / lambda2, static_cast<double>(rho_g));
}

/// Cost stability (4 C M^2 / m) min{1/lambda_2, rho_G}.
inline double belkin_cost_stability(double c, double label_bound, Index m, double lambda2,
                                    Index rho_g) {
  detail::require(m >= 1 && c >= 0.0, ErrorCode::InvalidStabilityInput, "need m >= 1, C >= 0");
  return 4.0 * c * label_bound * label_bound / static_cast<double>(m) *
         laplacian_kernel_kappa2(lambda2, rho_g);
}

/// Weighted-average estimator: 4 a_max M / (a_min m(r)).
inline double beta_loc_bound(double label_bound, Index m_r, double alpha_max, double alpha_min) {
  detail::require(m_r >= 1, ErrorCode::EmptyNeighborhood, "m(r) must be >= 1");
  detail::require(alpha_min > 0.0 && alpha_min <= alpha_max, ErrorCode::InvalidStabilityInput,
                  "need 0 < alpha_min <= alpha_max");
  return 4.0 * alpha_max * label_bound / (alpha_min * static_cast<double>(m_r));
}

/// Gaussian weights: 4 M / (m(r) e^{-2 r^2 / sigma^2}).
inline double beta_loc_gaussian(double label_bound, Index m_r, double r, double sigma) {
  detail::require(sigma > 0.0 && r >= 0.0, ErrorCode::InvalidStabilityInput,
                  "need sigma > 0 and r >= 0");
  detail::require(m_r >= 1, ErrorCode::EmptyNeighborhood, "m(r) must be >= 1");
  // Written with the growing exponential so that large r / sigma gives +inf
  // rather than an underflowed alpha_min of zero.
  return 4.0 * label_bound * std::exp(2.0 * r * r / (sigma * sigma)) / static_cast<double>(m_r);
}

/// Inverse-distance weights: (2r + 1) 2M / m(r).
inline double beta_loc_invdist(double label_bound, Index m_r, double r) {
  detail::require(r >= 0.0, ErrorCode::InvalidStabilityInput, "r must be >= 0");
  detail::require(m_r >= 1, ErrorCode::EmptyNeighborhood, "m(r) must be >= 1");
  return (2.0 * r + 1.0) * 2.0 * label_bound / static_cast<double>(m_r);
}

// ---------------------------------------------------------------------------
// Empirical stability

struct EmpiricalStabilityReport {
  double max_score_delta = 0.0;
  double max_cost_delta = 0.0;
  double max_residual = 0.0;  // max |h(x) - y(x)| seen over all runs
  SwapPair worst_swap{0, 0};
  Index swaps_evaluated = 0;
  bool exhaustive = true;
};

using PartitionSolver = std::function<HypothesisScores(const Partition&)>;

struct SwapSelection {
  std::vector<SwapPair> swaps;
  bool exhaustive = true;
};

/// Every swap when m*u <= cap, else `cap` distinct swaps drawn with `seed`.
inline SwapSelection select_swaps(const Partition& part, std::uint64_t seed, Index cap = 400) {
  auto all = enumerate_swaps(part);
  if (all.size() <= cap) return {std::move(all), true};
  Rng rng(seed);
  for (Index i = 0; i < cap; ++i) {
    const Index j = i + static_cast<Index>(rng.below(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(cap);
  return {std::move(all), false};
}

/// Re-solves after each swap and records the largest sup-norm change in the
/// scores and in the square loss against the true targets.
inline EmpiricalStabilityReport empirical_stability(const PartitionSolver& solver,
                                                    const FullSample& sample, const Partition& part,
                                                    const std::vector<SwapPair>& swaps,
                                                    bool exhaustive = true) {
  const Vector& y = sample.targets();
  const HypothesisScores base = solver(part);
  detail::require(base.size() == sample.size(), ErrorCode::DimensionMismatch,
                  "solver output has the wrong length");
  EmpiricalStabilityReport rep;
  rep.exhaustive = exhaustive;
  rep.max_residual = (base.scores - y).cwiseAbs().maxCoeff();
  if (!swaps.empty()) rep.worst_swap = swaps.front();
  for (const SwapPair& sw : swaps) {
    HypothesisScores other;
    try {
      other = solver(part.swapped(sw));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " [swap removed=" + std::to_string(sw.removed) +
                                " added=" + std::to_string(sw.added) + "]");
    }
    const double score = (other.scores - base.scores).cwiseAbs().maxCoeff();
    double cost = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      cost = std::max(cost, std::abs(square_loss(other.scores(i), y(i)) -
                                     square_loss(base.scores(i), y(i))));
    rep.max_residual = std::max(rep.max_residual, (other.scores - y).cwiseAbs().maxCoeff());
    if (score > rep.max_score_delta) {
      rep.max_score_delta = score;
      rep.worst_swap = sw;
    }
    rep.max_cost_delta = std::max(rep.max_cost_delta, cost);
    ++rep.swaps_evaluated;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lower-bound construction for the consistency method

/// 2m points: the first m labeled with target 0, the rest unlabeled with
/// target 1. Q is block-diagonal with two copies of the m x m matrix that has
/// 1 on the diagonal and -1/(m-1) elsewhere; C = c I.
struct LowerBoundInstance {
  Index m = 2;
  double c = 1.0;
  Matrix q;
  Vector targets;
  Partition part;
  double predicted_a = 0.0;

  UnconstrainedProblem problem_for(const Partition& p) const {
    const auto n = static_cast<Eigen::Index>(2 * m);
    return UnconstrainedProblem(q, c * Matrix::Identity(n, n), detail::labels_on_train(targets, p));
  }
  UnconstrainedProblem problem() const { return problem_for(part); }

  /// Swap that moves the m-th labeled point out of S and the first target-1
  /// point in; y changes only at the added index.
  SwapPair canonical_swap() const { return {m - 1, m}; }
};

/// a = 1/m + ((m-1)/m) C / (C + m/(m-1)), the diagonal entry of N^{-1}.
inline double cm_lower_bound_value(Index m, double c) {
  const double md = static_cast<double>(m);
  return 1.0 / md + ((md - 1.0) / md) * c / (c + md / (md - 1.0));
}

inline LowerBoundInstance cm_lower_bound_instance(Index m, double c) {
  detail::require(m >= 2, ErrorCode::InvalidInstance, "lower-bound instance needs m >= 2");
  detail::require(c > 0.0, ErrorCode::InvalidInstance, "C must be positive");
  const auto me = static_cast<Eigen::Index>(m);
  Matrix block = Matrix::Constant(me, me, -1.0 / static_cast<double>(m - 1));
  block.diagonal().setOnes();
  Matrix q = Matrix::Zero(2 * me, 2 * me);
  q.topLeftCorner(me, me) = block;
  q.bottomRightCorner(me, me) = block;
  Vector targets = Vector::Zero(2 * me);
  targets.tail(me).setOnes();
  std::vector<Index> train(m);
  for (Index i = 0; i < m; ++i) train[i] = i;
  return LowerBoundInstance{m, c, std::move(q), std::move(targets), Partition(2 * m, std::move(train)),
                            cm_lower_bound_value(m, c)};
}

}  // namespace tsr
