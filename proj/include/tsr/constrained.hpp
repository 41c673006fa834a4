#pragma once

// Constrained graph regularization:
//   min_h  h^T L h + (C/m) (h_S - y_S)^T (h_S - y_S)   s.t.  h^T u = 0.

#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "tsr/core.hpp"
#include "tsr/error.hpp"
#include "tsr/graph.hpp"
#include "tsr/unconstrained.hpp"

namespace tsr {

struct ConstrainedProblem {
  Matrix laplacian;       // symmetric PSD
  double tradeoff = 1.0;  // C
  Partition part;
  Vector labels;                   // full length; only entries on S are read
  std::optional<Vector> u_vec;     // all-ones when empty
  bool center_labels = false;

  Vector constraint() const {
    return u_vec ? *u_vec : Vector::Ones(static_cast<Eigen::Index>(part.size()));
  }

  /// y_S: labels on S, zeros on T.
  Vector y_s() const { return detail::labels_on_train(labels, part); }

  double objective(const Vector& h) const {
    const double w = tradeoff / static_cast<double>(part.m());
    double fit = 0.0;
    for (Index i : part.train()) {
      const auto k = static_cast<Eigen::Index>(i);
      fit += (h(k) - labels(k)) * (h(k) - labels(k));
    }
    return h.dot(laplacian * h) + w * fit;
  }
};

namespace detail {

/// Checks that null(L) lies inside span(u), i.e. the hyperplane u-perp is
/// contained in range(L).
inline void require_hyperplane_in_range(const Matrix& l, const Vector& u) {
  const SpectrumSummary s = spectrum(l);
  const double tol = std::max(zero_eigenvalue_tolerance(s.eigenvalues), 1e-12);
  const Vector unit = u.normalized();
  for (Eigen::Index k = 0; k < s.eigenvalues.size(); ++k) {
    if (std::abs(s.eigenvalues(k)) > tol) continue;
    const Vector v = s.eigenvectors.col(k);
    require((v - v.dot(unit) * unit).norm() <= 1e-6, ErrorCode::ConstraintSpansNullSpace,
            "null space of L is not spanned by the constraint vector (disconnected graph?)");
  }
}

}  // namespace detail

inline HypothesisScores solve_constrained(const ConstrainedProblem& p) {
  const Index n = p.part.size();
  const auto ne = static_cast<Eigen::Index>(n);
  detail::require(p.laplacian.rows() == ne && p.laplacian.cols() == ne &&
                      p.labels.size() == ne,
                  ErrorCode::DimensionMismatch, "problem dimensions disagree");
  detail::require(p.tradeoff > 0.0, ErrorCode::InvalidProblem, "C must be positive");
  const Vector u = p.constraint();
  detail::require(u.size() == ne, ErrorCode::DimensionMismatch, "constraint vector length");
  detail::require(u.squaredNorm() > 0.0, ErrorCode::ZeroConstraintVector, "constraint vector is zero");
  detail::require_hyperplane_in_range(p.laplacian, u);

  Vector y_s = p.y_s();
  double offset = 0.0;
  if (p.center_labels) {
    double sum = 0.0;
    for (Index i : p.part.train()) sum += y_s(static_cast<Eigen::Index>(i));
    offset = sum / static_cast<double>(p.part.m());
    for (Index i : p.part.train()) y_s(static_cast<Eigen::Index>(i)) -= offset;
  }

  const double w = p.tradeoff / static_cast<double>(p.part.m());
  Matrix h_mat = p.laplacian;
  for (Index i : p.part.train()) h_mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += w;
  Vector h = detail::solve_kkt(h_mat, w * y_s, u);
  if (offset != 0.0) h.array() += offset;
  return {std::move(h)};
}

/// Checks that h^T L h is the squared RKHS norm of h under the kernel L^+:
/// L^+ L h = h and h^T L h = h^T L L^+ L h.
inline bool laplacian_kernel_check(const Matrix& l, const Vector& h) {
  detail::require(l.rows() == h.size() && l.cols() == h.size(), ErrorCode::DimensionMismatch,
                  "L and h dimensions disagree");
  const Matrix lp = pseudo_inverse(l);
  const Vector lh = l * h;
  const Vector projected = lp * lh;
  const double scale = std::max(1.0, h.norm());
  detail::require((projected - h).norm() <= 1e-8 * scale, ErrorCode::NotInRange,
                  "h is not in range(L)");
  const double direct = h.dot(lh);
  const double via_kernel = lh.dot(lp * lh);
  return (projected - h).norm() <= 1e-8 * scale &&
         std::abs(direct - via_kernel) <= 1e-8 * std::max(1.0, std::abs(direct));
}

}  // namespace tsr
