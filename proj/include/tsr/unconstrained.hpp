#pragma once

// The closed-form family  min_h  h^T Q h + (h - y)^T C (h - y),
// its built-in instantiations (CM, LL-Reg, GMF) and the variant
// constrained to be orthogonal to the bottom eigenvector of Q.

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "tsr/core.hpp"
#include "tsr/error.hpp"
#include "tsr/graph.hpp"

namespace tsr {

class UnconstrainedProblem {
 public:
  UnconstrainedProblem(Matrix q, Matrix c, Vector y)
      : q_(std::move(q)), c_(std::move(c)), y_(std::move(y)) {
    const Eigen::Index n = y_.size();
    detail::require(q_.rows() == n && q_.cols() == n && c_.rows() == n && c_.cols() == n,
                    ErrorCode::DimensionMismatch, "Q, C and y must all have dimension m+u");
    detail::require(is_symmetric(q_, 1e-10) && is_symmetric(c_, 1e-10), ErrorCode::NotSymmetric,
                    "Q and C must be symmetric");
    const SpectrumSummary qs = spectrum(q_);
    detail::require(qs.lambda_min >= -1e-9 * std::max(1.0, std::abs(qs.lambda_max)),
                    ErrorCode::InvalidProblem, "Q is not positive semi-definite");
    const SpectrumSummary cs = spectrum(c_);
    detail::require(cs.lambda_min > 0.0, ErrorCode::InvalidProblem,
                    "C must be positive definite");
  }

  const Matrix& q() const { return q_; }
  const Matrix& c() const { return c_; }
  const Vector& y() const { return y_; }
  Index size() const { return static_cast<Index>(y_.size()); }

  double objective(const Vector& h) const {
    const Vector r = h - y_;
    return h.dot(q_ * h) + r.dot(c_ * r);
  }

 private:
  Matrix q_;
  Matrix c_;
  Vector y_;
};

namespace detail {

/// y with true labels on S and 0 on T.
inline Vector labels_on_train(const Vector& labels, const Partition& part) {
  require(static_cast<Index>(labels.size()) == part.size(), ErrorCode::DimensionMismatch,
          "label vector must cover the full sample");
  Vector y = Vector::Zero(labels.size());
  for (Index i : part.train()) y(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(i));
  return y;
}

inline Matrix split_diagonal(const Partition& part, double on_train, double on_test) {
  Vector d(static_cast<Eigen::Index>(part.size()));
  for (Index i = 0; i < part.size(); ++i)
    d(static_cast<Eigen::Index>(i)) = part.is_train(i) ? on_train : on_test;
  return d.asDiagonal();
}

/// Minimizes h^T H h - 2 g^T h subject to u^T h = 0 through the augmented
/// system [[H, u], [u^T, 0]] [h; t] = [g; 0].
inline Vector solve_kkt(const Matrix& h_mat, const Vector& g, const Vector& u) {
  const Eigen::Index n = g.size();
  Matrix kkt = Matrix::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = h_mat;
  kkt.topRightCorner(n, 1) = u;
  kkt.bottomLeftCorner(1, n) = u.transpose();
  Vector rhs = Vector::Zero(n + 1);
  rhs.head(n) = g;

  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(1e-12);
  require(lu.isInvertible(), ErrorCode::SingularSystem, "KKT system is singular");
  Vector sol = lu.solve(rhs);
  sol += lu.solve(rhs - kkt * sol);  // one refinement step
  require(sol.allFinite(), ErrorCode::SingularSystem, "KKT solve produced non-finite values");
  Vector h = sol.head(n);
  // Remove the rounding-level component along u.
  h -= (u.dot(h) / u.squaredNorm()) * u;
  return h;
}

}  // namespace detail

/// h = (C^{-1} Q + I)^{-1} y, computed as the SPD solve (Q + C) h = C y.
inline HypothesisScores solve_unconstrained(const UnconstrainedProblem& p) {
  const Matrix a = p.q() + p.c();
  const Vector b = p.c() * p.y();
  Eigen::LDLT<Matrix> ldlt(a);
  detail::require(ldlt.info() == Eigen::Success, ErrorCode::SingularSystem,
                  "(Q + C) factorization failed");
  Vector h = ldlt.solve(b);
  h += ldlt.solve(b - a * h);
  detail::require(h.allFinite(), ErrorCode::SingularSystem, "closed-form solve is singular");
  return {std::move(h)};
}

/// Consistency method: Q = normalized Laplacian, C = mu I.
inline UnconstrainedProblem build_cm(const GraphSpec& g, double mu, const Vector& labels,
                                     const Partition& part) {
  detail::require(mu > 0.0, ErrorCode::InvalidProblem, "mu must be positive");
  const Index n = g.size();
  detail::require(part.size() == n, ErrorCode::DimensionMismatch, "graph/partition size mismatch");
  return UnconstrainedProblem(normalized_laplacian(g),
                              mu * Matrix::Identity(static_cast<Eigen::Index>(n),
                                                    static_cast<Eigen::Index>(n)),
                              detail::labels_on_train(labels, part));
}

/// Local-learning regularization: A = row_normalize(A_raw), Q = (I-A)^T (I-A),
/// C = diag(C_l on S, C_u on T).
inline UnconstrainedProblem build_llreg(const Matrix& a_raw, double c_l, double c_u,
                                        const Vector& labels, const Partition& part) {
  detail::require(c_l > 0.0 && c_u > 0.0, ErrorCode::InvalidProblem, "C_l, C_u must be positive");
  detail::require(a_raw.rows() == a_raw.cols() && static_cast<Index>(a_raw.rows()) == part.size(),
                  ErrorCode::DimensionMismatch, "A must be (m+u)x(m+u)");
  detail::require((a_raw.array() >= 0.0).all(), ErrorCode::InvalidProblem, "A must be non-negative");
  const Matrix a = row_normalize(a_raw);
  const Matrix i_minus_a = Matrix::Identity(a.rows(), a.cols()) - a;
  Matrix q = i_minus_a.transpose() * i_minus_a;
  q = 0.5 * (q + q.transpose());
  return UnconstrainedProblem(std::move(q), detail::split_diagonal(part, c_l, c_u),
                              detail::labels_on_train(labels, part));
}

/// Gaussian mean fields: Q = D - W, C = diag(C_l on S, C_u on T).
inline UnconstrainedProblem build_gmf(const GraphSpec& g, double c_l, double c_u,
                                      const Vector& labels, const Partition& part) {
  detail::require(c_l > 0.0 && c_u > 0.0, ErrorCode::InvalidProblem, "C_l, C_u must be positive");
  detail::require(part.size() == g.size(), ErrorCode::DimensionMismatch,
                  "graph/partition size mismatch");
  return UnconstrainedProblem(laplacian(g), detail::split_diagonal(part, c_l, c_u),
                              detail::labels_on_train(labels, part));
}

/// Solves the same objective restricted to h^T v = 0, v the eigenvector of
/// the smallest eigenvalue of Q. Over that hyperplane the smallest eigenvalue
/// of Q seen by the solution is lambda_2(Q).
inline HypothesisScores stabilize(const UnconstrainedProblem& p) {
  const SpectrumSummary s = spectrum(p.q());
  return {detail::solve_kkt(p.q() + p.c(), p.c() * p.y(), s.eigenvector_min)};
}

}  // namespace tsr
