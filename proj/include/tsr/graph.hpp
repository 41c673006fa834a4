#pragma once

// Dense graph and linear-algebra substrate: Laplacians, spectra,
// pseudo-inverse, hyperplane projectors, connectivity and hop diameter.

#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <locale>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tsr/core.hpp"
#include "tsr/error.hpp"

namespace tsr {

/// Symmetric non-negative weight matrix with zero diagonal.
class GraphSpec {
 public:
  explicit GraphSpec(Matrix weights) : weights_(std::move(weights)) {
    detail::require(weights_.rows() == weights_.cols(), ErrorCode::DimensionMismatch,
                    "weight matrix must be square");
    const Eigen::Index n = weights_.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::require(weights_(i, i) == 0.0, ErrorCode::InvalidProblem,
                      "weight matrix must have a zero diagonal");
      for (Eigen::Index j = 0; j < n; ++j) {
        detail::require(std::isfinite(weights_(i, j)) && weights_(i, j) >= 0.0,
                        ErrorCode::InvalidProblem, "weights must be finite and non-negative");
        detail::require(weights_(i, j) == weights_(j, i), ErrorCode::NotSymmetric,
                        "weight matrix must be symmetric");
      }
    }
  }

  Index size() const { return static_cast<Index>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  Vector degrees() const { return weights_.rowwise().sum(); }

 private:
  Matrix weights_;
};

struct SpectrumSummary {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double lambda2 = 0.0;  // second entry of the ascending list
  Vector eigenvector_min;
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // columns match `eigenvalues`
};

/// L = D - W.
inline Matrix laplacian(const GraphSpec& g) {
  Matrix l = -g.weights();
  l.diagonal() = g.degrees();
  return l;
}

/// Q = I - D^{-1/2} W D^{-1/2}.
inline Matrix normalized_laplacian(const GraphSpec& g) {
  const Vector d = g.degrees();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    detail::require(d(i) > 0.0, ErrorCode::ZeroDegreeVertex,
                    "vertex " + std::to_string(i) + " has zero degree");
  const Vector inv_sqrt = d.cwiseSqrt().cwiseInverse();
  Matrix q = -(inv_sqrt.asDiagonal() * g.weights() * inv_sqrt.asDiagonal());
  q.diagonal().array() += 1.0;
  return q;
}

inline bool is_symmetric(const Matrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
inline SpectrumSummary spectrum(const Matrix& mat) {
  detail::require(mat.rows() > 0 && is_symmetric(mat), ErrorCode::NotSymmetric,
                  "spectrum needs a non-empty symmetric matrix");
  // Solve on the exact symmetric part so the stored lower triangle does not
  // bias the result when the input is only symmetric within tolerance.
  const Matrix sym = 0.5 * (mat + mat.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  detail::require(es.info() == Eigen::Success, ErrorCode::SingularSystem,
                  "eigensolver did not converge");
  SpectrumSummary s;
  s.eigenvalues = es.eigenvalues();
  s.eigenvectors = es.eigenvectors();
  s.lambda_min = s.eigenvalues(0);
  s.lambda_max = s.eigenvalues(s.eigenvalues.size() - 1);
  s.lambda2 = s.eigenvalues.size() > 1 ? s.eigenvalues(1) : s.eigenvalues(0);
  s.eigenvector_min = s.eigenvectors.col(0).normalized();
  return s;
}

/// Magnitude below which an eigenvalue counts as zero.
inline double zero_eigenvalue_tolerance(const Vector& eigenvalues) {
  const double scale = eigenvalues.size() > 0 ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * scale;
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its spectrum.
/// Eigenvalues within 1e-9 * max|lambda| of zero are treated as zero, which
/// also clamps the small negative values floating-point Laplacians produce.
inline Matrix pseudo_inverse(const Matrix& mat) {
  if (mat.size() > 0 && mat.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(mat.rows(), mat.cols());
  const SpectrumSummary s = spectrum(mat);
  const double tol = zero_eigenvalue_tolerance(s.eigenvalues);
  Vector inv(s.eigenvalues.size());
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    inv(i) = std::abs(s.eigenvalues(i)) <= tol ? 0.0 : 1.0 / s.eigenvalues(i);
  return s.eigenvectors * inv.asDiagonal() * s.eigenvectors.transpose();
}

/// Orthogonal projector onto the hyperplane {h : h^T u = 0}.
inline Matrix projector_orthogonal_to(const Vector& u) {
  const double nrm2 = u.squaredNorm();
  detail::require(nrm2 > 0.0, ErrorCode::ZeroConstraintVector, "constraint vector is zero");
  Matrix p = -(u * u.transpose()) / nrm2;
  p.diagonal().array() += 1.0;
  return p;
}

namespace detail {

/// Hop distances from `src` along positive-weight edges; -1 when unreachable.
inline std::vector<long> bfs_hops(const Matrix& w, Index src) {
  const Index n = static_cast<Index>(w.rows());
  std::vector<long> dist(n, -1);
  std::deque<Index> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const Index v = queue.front();
    queue.pop_front();
    for (Index j = 0; j < n; ++j) {
      if (dist[j] < 0 && w(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) > 0.0) {
        dist[j] = dist[v] + 1;
        queue.push_back(j);
      }
    }
  }
  return dist;
}

}  // namespace detail

inline bool is_connected(const GraphSpec& g) {
  if (g.size() <= 1) return true;
  const auto dist = detail::bfs_hops(g.weights(), 0);
  return std::all_of(dist.begin(), dist.end(), [](long d) { return d >= 0; });
}

/// Largest hop distance between two vertices.
inline Index diameter(const GraphSpec& g) {
  long best = 0;
  for (Index s = 0; s < g.size(); ++s) {
    const auto dist = detail::bfs_hops(g.weights(), s);
    for (long d : dist) {
      detail::require(d >= 0, ErrorCode::GraphDisconnected, "diameter of a disconnected graph");
      best = std::max(best, d);
    }
  }
  return static_cast<Index>(best);
}

/// Scales each row to sum to one.
inline Matrix row_normalize(const Matrix& mat) {
  Matrix out = mat;
  for (Eigen::Index i = 0; i < mat.rows(); ++i) {
    const double s = mat.row(i).sum();
    detail::require(s > 0.0, ErrorCode::ZeroRowSum, "row " + std::to_string(i) + " sums to zero");
    out.row(i) /= s;
  }
  return out;
}

/// Dense Gaussian affinity exp(-|xi - xj|^2 / (2 sigma^2)) with zero diagonal.
inline GraphSpec gaussian_affinity(const Matrix& points, double sigma) {
  detail::require(sigma > 0.0, ErrorCode::InvalidConfig, "sigma must be positive");
  const Eigen::Index n = points.rows();
  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (points.row(i) - points.row(j)).squaredNorm();
      w(i, j) = w(j, i) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return GraphSpec(std::move(w));
}

/// Reads an undirected edge list: one `i j w` triple per line, 1-based
/// indices, each edge once. Blank lines and lines starting with '#' are
/// skipped. When `node_count` is 0 it is inferred from the largest index.
inline GraphSpec read_edge_list(std::istream& in, Index node_count = 0) {
  struct Edge {
    Index i, j;
    double w;
  };
  std::vector<Edge> edges;
  Index max_index = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    long i = 0, j = 0;
    double w = 0.0;
    std::string rest;
    if (!(fields >> i >> j >> w) || (fields >> rest) || i < 1 || j < 1 || i == j || !(w >= 0.0) ||
        !std::isfinite(w))
      throw Error(ErrorCode::ParseError, "edge list line " + std::to_string(line_no) +
                                             ": expected `i j w` with distinct 1-based i, j and w >= 0");
    edges.push_back({static_cast<Index>(i - 1), static_cast<Index>(j - 1), w});
    max_index = std::max({max_index, static_cast<Index>(i), static_cast<Index>(j)});
  }
  const Index n = node_count == 0 ? max_index : node_count;
  detail::require(max_index <= n, ErrorCode::ParseError, "edge index exceeds node count");
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const Edge& e : edges) {
    auto a = static_cast<Eigen::Index>(e.i), b = static_cast<Eigen::Index>(e.j);
    detail::require(w(a, b) == 0.0, ErrorCode::ParseError,
                    "edge (" + std::to_string(e.i + 1) + ", " + std::to_string(e.j + 1) +
                        ") listed twice");
    w(a, b) = w(b, a) = e.w;
  }
  return GraphSpec(std::move(w));
}

inline GraphSpec read_edge_list_file(const std::string& path, Index node_count = 0) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::IoError, "cannot open graph file " + path);
  return read_edge_list(in, node_count);
}

}  // namespace tsr
