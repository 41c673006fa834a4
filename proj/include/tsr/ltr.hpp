#pragma once

// Local transductive regression (LTR): kernel-regularized square loss with
// a labeled term on S and a pseudo-target term on T, plus the local
// weighted-average estimator that produces the pseudo-targets and the
// kernel ridge regression baseline.

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsr/core.hpp"
#include "tsr/error.hpp"
#include "tsr/graph.hpp"

namespace tsr {

/// Symmetric PSD Gram matrix over the full sample, validated once.
class GramMatrix {
 public:
  explicit GramMatrix(Matrix k) : k_(std::move(k)) {
    detail::require(k_.rows() == k_.cols() && k_.rows() > 0, ErrorCode::DimensionMismatch,
                    "Gram matrix must be square and non-empty");
    detail::require(is_symmetric(k_), ErrorCode::NotPSDKernel, "Gram matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k_ + k_.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    const double lmax = es.eigenvalues()(es.eigenvalues().size() - 1);
    detail::require(lmin >= -1e-9 * std::max(1.0, std::abs(lmax)), ErrorCode::NotPSDKernel,
                    "Gram matrix has eigenvalue " + std::to_string(lmin));
    kappa_ = std::sqrt(std::max(0.0, k_.diagonal().maxCoeff()));
  }

  const Matrix& matrix() const { return k_; }
  Index size() const { return static_cast<Index>(k_.rows()); }
  /// sqrt(max_x K(x, x)).
  double kappa() const { return kappa_; }

 private:
  Matrix k_;
  double kappa_ = 0.0;
};

inline double gaussian_kernel(double squared_distance, double sigma) {
  return std::exp(-squared_distance / (2.0 * sigma * sigma));
}

inline std::shared_ptr<const GramMatrix> gaussian_gram(const Matrix& points, double sigma) {
  detail::require(sigma > 0.0, ErrorCode::InvalidConfig, "sigma must be positive");
  const Eigen::Index n = points.rows();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j)
      k(i, j) = k(j, i) = gaussian_kernel((points.row(i) - points.row(j)).squaredNorm(), sigma);
  }
  return std::make_shared<const GramMatrix>(std::move(k));
}

struct LtrProblem {
  std::shared_ptr<const GramMatrix> kernel;
  Partition part;
  Vector labels;    // full length; entries on S are the labels
  Vector y_tilde;   // pseudo-targets aligned with part.test(); may be empty when C' = 0
  double c = 1.0;        // labeled trade-off
  double c_prime = 0.0;  // unlabeled trade-off

  double kappa() const { return kernel->kappa(); }
};

namespace detail {

inline void validate(const LtrProblem& p) {
  require(p.kernel != nullptr, ErrorCode::InvalidProblem, "missing kernel");
  const Index n = p.part.size();
  require(p.kernel->size() == n && static_cast<Index>(p.labels.size()) == n,
          ErrorCode::DimensionMismatch, "kernel, labels and partition sizes disagree");
  require(p.c >= 0.0 && p.c_prime >= 0.0, ErrorCode::InvalidProblem, "C and C' must be >= 0");
  require(p.c_prime == 0.0 || static_cast<Index>(p.y_tilde.size()) == p.part.u(),
          ErrorCode::DimensionMismatch, "need one pseudo-target per test point when C' > 0");
}

}  // namespace detail

/// LTR objective ||f||_K^2 + (C/m) sum_S c + (C'/u) sum_T c~ for f = K alpha.
inline double ltr_objective(const LtrProblem& p, const Vector& alpha) {
  const Matrix& k = p.kernel->matrix();
  const Vector f = k * alpha;
  double fit = 0.0, pseudo = 0.0;
  for (Index i : p.part.train()) fit += square_loss(f(static_cast<Eigen::Index>(i)), p.labels(static_cast<Eigen::Index>(i)));
  for (Index t = 0; t < p.part.u() && p.c_prime > 0.0; ++t)
    pseudo += square_loss(f(static_cast<Eigen::Index>(p.part.test()[t])), p.y_tilde(static_cast<Eigen::Index>(t)));
  return alpha.dot(f) + p.c / static_cast<double>(p.part.m()) * fit +
         p.c_prime / static_cast<double>(p.part.u()) * pseudo;
}

struct LtrSolution {
  HypothesisScores h;
  Vector alpha;  // expansion coefficients over all m+u kernel sections
};

/// Dual solution. With per-point weights w (C/m on S, C'/u on T) and targets
/// z (labels on S, pseudo-targets on T), the minimizer is f = K alpha where
/// (K_AA + diag(1/w_A)) alpha_A = z_A over the points A with w > 0 and alpha
/// is zero elsewhere.
inline LtrSolution solve_ltr_dual(const LtrProblem& p) {
  detail::validate(p);
  const Matrix& k = p.kernel->matrix();
  const Index n = p.part.size();
  const double w_train = p.c / static_cast<double>(p.part.m());
  const double w_test = p.c_prime / static_cast<double>(p.part.u());

  std::vector<Eigen::Index> active;
  std::vector<double> weight, target;
  if (w_train > 0.0)
    for (Index i : p.part.train()) {
      active.push_back(static_cast<Eigen::Index>(i));
      weight.push_back(w_train);
      target.push_back(p.labels(static_cast<Eigen::Index>(i)));
    }
  if (w_test > 0.0)
    for (Index t = 0; t < p.part.u(); ++t) {
      active.push_back(static_cast<Eigen::Index>(p.part.test()[t]));
      weight.push_back(w_test);
      target.push_back(p.y_tilde(static_cast<Eigen::Index>(t)));
    }

  Vector alpha = Vector::Zero(static_cast<Eigen::Index>(n));
  if (active.empty()) return {{Vector::Zero(static_cast<Eigen::Index>(n))}, alpha};

  const auto a = static_cast<Eigen::Index>(active.size());
  Matrix sys(a, a);
  Vector rhs(a);
  for (Eigen::Index r = 0; r < a; ++r) {
    for (Eigen::Index c = 0; c < a; ++c) sys(r, c) = k(active[r], active[c]);
    sys(r, r) += 1.0 / weight[static_cast<std::size_t>(r)];
    rhs(r) = target[static_cast<std::size_t>(r)];
  }
  Eigen::LLT<Matrix> llt(sys);
  detail::require(llt.info() == Eigen::Success, ErrorCode::NotPSDKernel,
                  "dual system is not positive definite");
  Vector coef = llt.solve(rhs);
  coef += llt.solve(rhs - sys * coef);
  for (Eigen::Index r = 0; r < a; ++r) alpha(active[r]) = coef(r);

  Vector h = Vector::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < a; ++r) h += coef(r) * k.col(active[r]);
  return {{std::move(h)}, std::move(alpha)};
}

inline HypothesisScores solve_ltr(const LtrProblem& p) { return solve_ltr_dual(p).h; }

/// Kernel ridge regression trained on S alone, predictions extended to every
/// point through the kernel expansion. Same hypothesis as LTR with C' = 0.
inline HypothesisScores solve_krr_induction(const LtrProblem& p) {
  detail::validate(p);
  detail::require(p.c_prime == 0.0, ErrorCode::InvalidProblem, "induction requires C' = 0");
  const Matrix& k = p.kernel->matrix();
  const auto n = static_cast<Eigen::Index>(p.part.size());
  if (p.c == 0.0) return {Vector::Zero(n)};

  const auto m = static_cast<Eigen::Index>(p.part.m());
  const double ridge = static_cast<double>(m) / p.c;
  Matrix k_ss(m, m), k_xs(n, m);
  Vector y_s(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto sc = static_cast<Eigen::Index>(p.part.train()[static_cast<std::size_t>(c)]);
    y_s(c) = p.labels(sc);
    k_xs.col(c) = k.col(sc);
    for (Eigen::Index r = 0; r < m; ++r)
      k_ss(r, c) = k(static_cast<Eigen::Index>(p.part.train()[static_cast<std::size_t>(r)]), sc);
  }
  k_ss.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(k_ss);
  detail::require(ldlt.info() == Eigen::Success, ErrorCode::NotPSDKernel, "ridge system failed");
  Vector coef = ldlt.solve(y_s);
  coef += ldlt.solve(y_s - k_ss * coef);
  return {k_xs * coef};
}

// ---------------------------------------------------------------------------
// Local weighted-average estimator

enum class Weighting { Gaussian, InverseDistance };
enum class Fallback { Error, Zero };

struct LocalEstimatorConfig {
  double radius = 0.0;
  Weighting weighting = Weighting::Gaussian;
  double sigma = 1.0;  // gaussian only
  Fallback fallback = Fallback::Error;

  void validate() const {
    detail::require(radius >= 0.0 && std::isfinite(radius), ErrorCode::InvalidConfig,
                    "radius must be >= 0");
    detail::require(weighting != Weighting::Gaussian || sigma > 0.0, ErrorCode::InvalidConfig,
                    "sigma must be positive for gaussian weighting");
  }

  /// Weight of a labeled neighbour at Euclidean distance `dist`.
  double weight(double dist) const {
    return weighting == Weighting::Gaussian ? gaussian_kernel(dist * dist, sigma) : 1.0 / (1.0 + dist);
  }
};

/// Pseudo-target for each x' in T: the weighted average of labels of the
/// points of S within Euclidean distance `radius` of x'. The result is
/// aligned with part.test().
inline Vector pseudo_targets(const FullSample& sample, const Partition& part,
                             const LocalEstimatorConfig& cfg) {
  cfg.validate();
  detail::require(part.size() == sample.size(), ErrorCode::DimensionMismatch,
                  "partition/sample size mismatch");
  const Matrix& x = sample.points();
  const Vector& y = sample.targets();
  Vector out(static_cast<Eigen::Index>(part.u()));
  for (Index t = 0; t < part.u(); ++t) {
    const auto xt = static_cast<Eigen::Index>(part.test()[t]);
    double num = 0.0, den = 0.0;
    for (Index s : part.train()) {
      const auto xs = static_cast<Eigen::Index>(s);
      const double dist = (x.row(xs) - x.row(xt)).norm();
      if (dist > cfg.radius) continue;
      const double w = cfg.weight(dist);
      num += w * y(xs);
      den += w;
    }
    if (den > 0.0) {
      out(static_cast<Eigen::Index>(t)) = num / den;
    } else {
      detail::require(cfg.fallback == Fallback::Zero, ErrorCode::PseudoTargetUnavailable,
                      "no labeled point within radius " + std::to_string(cfg.radius) +
                          " of point " + std::to_string(xt));
      out(static_cast<Eigen::Index>(t)) = 0.0;
    }
  }
  return out;
}

}  // namespace tsr
