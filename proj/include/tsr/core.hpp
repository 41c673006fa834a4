#pragma once

// The transductive setting: a fixed full sample, its random train/test
// partitions, the square loss and the error functionals built on it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsr/error.hpp"
#include "tsr/rng.hpp"

namespace tsr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = std::size_t;

/// The full sample X: m+u points (rows of `points`), their targets and a
/// bound M on |y|.
class FullSample {
 public:
  FullSample(Matrix points, Vector targets, double label_bound)
      : points_(std::move(points)), targets_(std::move(targets)), label_bound_(label_bound) {
    detail::require(points_.rows() == targets_.size(), ErrorCode::DimensionMismatch,
                    "points and targets differ in length");
    detail::require(targets_.size() >= 2, ErrorCode::InvalidSample,
                    "a full sample needs at least two points");
    detail::require(label_bound_ > 0.0 && std::isfinite(label_bound_), ErrorCode::InvalidSample,
                    "label bound must be positive and finite");
    detail::require(targets_.allFinite() && points_.allFinite(), ErrorCode::InvalidSample,
                    "non-finite entry in sample");
    detail::require(targets_.cwiseAbs().maxCoeff() <= label_bound_, ErrorCode::InvalidSample,
                    "a target exceeds the label bound");
  }

  /// Builds a sample whose label bound is max |y|, or 1 when all targets are 0.
  static FullSample with_tight_bound(Matrix points, Vector targets) {
    const double m = targets.size() > 0 ? targets.cwiseAbs().maxCoeff() : 0.0;
    return FullSample(std::move(points), std::move(targets), m > 0.0 ? m : 1.0);
  }

  Index size() const { return static_cast<Index>(targets_.size()); }
  Index dim() const { return static_cast<Index>(points_.cols()); }
  const Matrix& points() const { return points_; }
  const Vector& targets() const { return targets_; }
  double label_bound() const { return label_bound_; }

 private:
  Matrix points_;
  Vector targets_;
  double label_bound_;
};

struct SwapPair {
  Index removed;  // leaves S
  Index added;    // joins S

  friend bool operator==(const SwapPair&, const SwapPair&) = default;
};

/// An (S, T) split of {0, ..., n-1}. Both index sets are kept sorted.
class Partition {
 public:
  Partition(Index n, std::vector<Index> train, std::uint64_t seed = 0) : n_(n), seed_(seed) {
    std::sort(train.begin(), train.end());
    detail::require(!train.empty() && train.size() < n, ErrorCode::InvalidPartitionSize,
                    "need 1 <= m <= n-1");
    in_train_.assign(n, false);
    for (Index i : train) {
      detail::require(i < n, ErrorCode::InvalidPartitionSize, "index out of range");
      detail::require(!in_train_[i], ErrorCode::InvalidPartitionSize, "duplicate index");
      in_train_[i] = true;
    }
    train_ = std::move(train);
    test_.reserve(n - train_.size());
    for (Index i = 0; i < n; ++i)
      if (!in_train_[i]) test_.push_back(i);
  }

  Index size() const { return n_; }
  Index m() const { return train_.size(); }
  Index u() const { return test_.size(); }
  const std::vector<Index>& train() const { return train_; }
  const std::vector<Index>& test() const { return test_; }
  std::uint64_t seed() const { return seed_; }
  bool is_train(Index i) const { return in_train_[i]; }

  /// S' = S \ {removed} ∪ {added}.
  Partition swapped(const SwapPair& swap) const {
    detail::require(swap.removed < n_ && in_train_[swap.removed], ErrorCode::InvalidPartitionSize,
                    "swap removes a point outside S");
    detail::require(swap.added < n_ && !in_train_[swap.added], ErrorCode::InvalidPartitionSize,
                    "swap adds a point outside T");
    std::vector<Index> next = train_;
    *std::find(next.begin(), next.end(), swap.removed) = swap.added;
    return Partition(n_, std::move(next), seed_);
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.n_ == b.n_ && a.train_ == b.train_;
  }

 private:
  Index n_;
  std::uint64_t seed_;
  std::vector<Index> train_;
  std::vector<Index> test_;
  std::vector<bool> in_train_;
};

/// Prediction vector h over all m+u points.
struct HypothesisScores {
  Vector scores;

  Index size() const { return static_cast<Index>(scores.size()); }
  double operator[](Index i) const { return scores(static_cast<Eigen::Index>(i)); }
};

/// Draws S uniformly among the m-subsets of {0..n-1} with a partial
/// Fisher-Yates shuffle; T is the complement.
inline Partition sample_partition(Index n, Index m, std::uint64_t seed) {
  detail::require(n >= 2 && m >= 1 && m + 1 <= n, ErrorCode::InvalidPartitionSize,
                  "need 1 <= m <= n-1, got m=" + std::to_string(m) + " n=" + std::to_string(n));
  Rng rng(seed);
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = 0; i < m; ++i) {
    const Index j = i + static_cast<Index>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(m);
  return Partition(n, std::move(perm), seed);
}

inline Partition sample_partition(const FullSample& sample, Index m, std::uint64_t seed) {
  return sample_partition(sample.size(), m, seed);
}

/// c(h, x) = (h(x) - y(x))^2
inline double square_loss(double prediction, double target) {
  const double r = prediction - target;
  return r * r;
}

namespace detail {

inline void check_dims(const HypothesisScores& h, const FullSample& sample, const Partition& part) {
  require(h.size() == sample.size() && part.size() == sample.size(), ErrorCode::DimensionMismatch,
          "hypothesis, sample and partition sizes disagree");
}

inline double mean_loss(const HypothesisScores& h, const Vector& y, const std::vector<Index>& idx) {
  double acc = 0.0;
  for (Index i : idx) acc += square_loss(h[i], y(static_cast<Eigen::Index>(i)));
  return acc / static_cast<double>(idx.size());
}

}  // namespace detail

/// Training error: mean square loss over S.
inline double empirical_error(const HypothesisScores& h, const FullSample& sample,
                              const Partition& part) {
  detail::check_dims(h, sample, part);
  return detail::mean_loss(h, sample.targets(), part.train());
}

/// Test error: mean square loss over T.
inline double test_error(const HypothesisScores& h, const FullSample& sample,
                         const Partition& part) {
  detail::check_dims(h, sample, part);
  return detail::mean_loss(h, sample.targets(), part.test());
}

/// Mean square loss over the whole sample X.
inline double full_sample_error(const HypothesisScores& h, const FullSample& sample) {
  detail::require(h.size() == sample.size(), ErrorCode::DimensionMismatch, "size mismatch");
  return (h.scores - sample.targets()).squaredNorm() / static_cast<double>(sample.size());
}

/// A beta-score-stable algorithm is 2*B*beta cost-stable when residuals are
/// bounded by B.
inline double score_to_cost_stability(double beta_score, double residual_bound) {
  detail::require(beta_score >= 0.0 && residual_bound > 0.0, ErrorCode::InvalidStabilityInput,
                  "need beta_score >= 0 and B > 0");
  return 2.0 * residual_bound * beta_score;
}

/// All m*u pairs (i in S, j in T), S-major.
inline std::vector<SwapPair> enumerate_swaps(const Partition& part) {
  std::vector<SwapPair> out;
  out.reserve(part.m() * part.u());
  for (Index i : part.train())
    for (Index j : part.test()) out.push_back({i, j});
  return out;
}

}  // namespace tsr
