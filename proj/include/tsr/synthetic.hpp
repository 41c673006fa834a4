#pragma once

// Seeded synthetic instances: random graphs and smooth regression tasks
// with a known locality scale.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tsr/core.hpp"
#include "tsr/graph.hpp"
#include "tsr/rng.hpp"

namespace tsr {

/// Random weighted graph on n nodes: each pair gets an edge with probability
/// `edge_prob`, weights uniform in [0.1, 1]. A random spanning path is added
/// so the graph is always connected.
inline GraphSpec random_connected_graph(Index n, double edge_prob, std::uint64_t seed) {
  Rng rng(seed);
  const auto ne = static_cast<Eigen::Index>(n);
  Matrix w = Matrix::Zero(ne, ne);
  for (Eigen::Index i = 0; i < ne; ++i)
    for (Eigen::Index j = i + 1; j < ne; ++j)
      if (rng.uniform() < edge_prob) w(i, j) = w(j, i) = rng.uniform(0.1, 1.0);
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (Index k = 0; k + 1 < n; ++k) {
    const auto a = static_cast<Eigen::Index>(perm[k]), b = static_cast<Eigen::Index>(perm[k + 1]);
    if (w(a, b) == 0.0) w(a, b) = w(b, a) = rng.uniform(0.1, 1.0);
  }
  return GraphSpec(std::move(w));
}

/// Random graph that may be disconnected (no spanning path).
inline GraphSpec random_graph(Index n, double edge_prob, std::uint64_t seed) {
  Rng rng(seed);
  const auto ne = static_cast<Eigen::Index>(n);
  Matrix w = Matrix::Zero(ne, ne);
  for (Eigen::Index i = 0; i < ne; ++i)
    for (Eigen::Index j = i + 1; j < ne; ++j)
      if (rng.uniform() < edge_prob) w(i, j) = w(j, i) = rng.uniform(0.1, 1.0);
  return GraphSpec(std::move(w));
}

struct LocalityTask {
  Matrix points;
  Vector targets;  // noisy observations
  Vector clean;    // noise-free function values
};

/// Points drawn from N(0, I_d); the target is a sum of `bumps` Gaussian
/// bumps of width `length_scale` with random centres and signed amplitudes,
/// plus N(0, noise^2) noise. Features are left in generator units; callers
/// standardize them like any other data set.
inline LocalityTask make_locality_task(Index n, Index d, double length_scale, double noise,
                                       Index bumps, std::uint64_t seed) {
  Rng rng(seed);
  const auto ne = static_cast<Eigen::Index>(n), de = static_cast<Eigen::Index>(d);
  LocalityTask task{Matrix(ne, de), Vector(ne), Vector(ne)};
  for (Eigen::Index i = 0; i < ne; ++i)
    for (Eigen::Index k = 0; k < de; ++k) task.points(i, k) = rng.normal();
  Matrix centres(static_cast<Eigen::Index>(bumps), de);
  Vector amp(static_cast<Eigen::Index>(bumps));
  for (Eigen::Index b = 0; b < centres.rows(); ++b) {
    for (Eigen::Index k = 0; k < de; ++k) centres(b, k) = rng.normal();
    amp(b) = rng.uniform(-1.0, 1.0);
  }
  for (Eigen::Index i = 0; i < ne; ++i) {
    double f = 0.0;
    for (Eigen::Index b = 0; b < centres.rows(); ++b)
      f += amp(b) * std::exp(-(task.points.row(i) - centres.row(b)).squaredNorm() /
                             (2.0 * length_scale * length_scale));
    task.clean(i) = f;
    task.targets(i) = f + noise * rng.normal();
  }
  return task;
}

}  // namespace tsr
