#pragma once

// Concentration for sampling without replacement and the stability-based
// transductive generalization bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "tsr/core.hpp"
#include "tsr/error.hpp"
#include "tsr/rng.hpp"

namespace tsr {

/// alpha(m, u) = m u / (m + u - 1/2) * 1 / (1 - 1/(2 max{m, u})).
inline double alpha(Index m, Index u) {
  detail::require(m >= 1 && u >= 1, ErrorCode::InvalidPartitionSize, "alpha needs m, u >= 1");
  const double md = static_cast<double>(m), ud = static_cast<double>(u);
  const double mx = static_cast<double>(std::max(m, u));
  return md * ud / (md + ud - 0.5) / (1.0 - 1.0 / (2.0 * mx));
}

struct BoundReport {
  double r_hat = 0.0;
  double beta = 0.0;
  double residual_bound = 0.0;  // B
  Index m = 1;
  Index u = 1;
  double delta = 1.0;
  double alpha_mu = 0.0;
  double slack = 0.0;  // bound_value - r_hat
  double bound_value = 0.0;
};

/// R(h) <= R^(h) + beta + (2 beta + B^2 (m+u)/(m u)) sqrt(alpha(m,u) ln(1/delta) / 2)
/// with probability at least 1 - delta.
inline BoundReport generalization_bound(double r_hat, double beta, double residual_bound, Index m,
                                        Index u, double delta) {
  detail::require(delta > 0.0 && delta <= 1.0, ErrorCode::InvalidConfidence, "delta must be in (0, 1]");
  detail::require(beta >= 0.0 && residual_bound >= 0.0, ErrorCode::InvalidStabilityInput,
                  "beta and B must be >= 0");
  BoundReport rep;
  rep.r_hat = r_hat;
  rep.beta = beta;
  rep.residual_bound = residual_bound;
  rep.m = m;
  rep.u = u;
  rep.delta = delta;
  rep.alpha_mu = alpha(m, u);
  const double md = static_cast<double>(m), ud = static_cast<double>(u);
  const double coef = 2.0 * beta + residual_bound * residual_bound * (md + ud) / (md * ud);
  rep.slack = beta + coef * std::sqrt(rep.alpha_mu * std::log(1.0 / delta) / 2.0);
  rep.bound_value = r_hat + rep.slack;
  return rep;
}

// ---------------------------------------------------------------------------
// Monte-Carlo check of the tail inequality

struct ConcentrationResult {
  double empirical_tail = 0.0;  // fraction of trials with phi - E[phi] >= eps
  double bound = 1.0;           // exp(-2 eps^2 / (alpha c^2))
  double slack_limit = 1.0;     // bound + 3 sqrt(bound (1 - bound) / trials)
  double expectation = 0.0;     // E[phi] used for the deviation
  double mean_phi = 0.0;        // Monte-Carlo average of phi
  Index trials = 0;
  bool within_bound() const { return empirical_tail <= slack_limit; }
};

using SymmetricStatistic = std::function<double(std::span<const double>)>;

struct ConcentrationOptions {
  unsigned jobs = 1;
  // Replaces alpha(m, u) in the bound; only used to check that the harness
  // notices a wrong constant.
  std::optional<double> alpha_override;
};

inline double sample_mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

namespace detail {

/// Runs trials [begin, end) and returns {exceedances, sum of phi}. Each
/// trial draws m of the population without replacement using its own seed.
inline std::pair<Index, double> run_trials(std::span<const double> population, Index m, double eps,
                                           double expectation, const SymmetricStatistic& phi,
                                           std::uint64_t seed, Index begin, Index end) {
  const Index n = population.size();
  std::vector<double> pool(population.begin(), population.end());
  Index hits = 0;
  double sum = 0.0;
  const double tol = 1e-12 * (1.0 + std::abs(eps));
  std::vector<Index> picks(m);
  for (Index t = begin; t < end; ++t) {
    Rng rng(mix_seed(seed, t));
    for (Index i = 0; i < m; ++i) {
      picks[i] = i + static_cast<Index>(rng.below(n - i));
      std::swap(pool[i], pool[picks[i]]);
    }
    const double value = phi(std::span<const double>(pool.data(), m));
    sum += value;
    if (value - expectation >= eps - tol) ++hits;
    // Undo the swaps so each trial starts from the original order and the
    // result does not depend on how trials are split across workers.
    for (Index i = m; i-- > 0;) std::swap(pool[i], pool[picks[i]]);
  }
  return {hits, sum};
}

}  // namespace detail

/// General form: phi symmetric with bounded differences c and known (or
/// separately estimated) expectation.
inline ConcentrationResult concentration_harness(std::span<const double> population, Index m,
                                                 double eps, Index trials, std::uint64_t seed,
                                                 const SymmetricStatistic& phi, double c,
                                                 std::optional<double> expectation,
                                                 const ConcentrationOptions& opts = {}) {
  const Index n = population.size();
  detail::require(m >= 1 && m + 1 <= n, ErrorCode::InvalidPartitionSize,
                  "need 1 <= m < population size");
  detail::require(trials >= 1, ErrorCode::InvalidConfig, "need at least one trial");
  detail::require(eps >= 0.0 && c >= 0.0, ErrorCode::InvalidConfig, "need eps >= 0 and c >= 0");

  ConcentrationResult res;
  res.trials = trials;
  if (expectation) {
    res.expectation = *expectation;
  } else {
    // Separate high-trial pass on an independent seed stream.
    const Index pass = std::max<Index>(10 * trials, 10000);
    res.expectation = detail::run_trials(population, m, 0.0, 0.0, phi, mix_seed(seed, ~0ULL), 0, pass)
                          .second / static_cast<double>(pass);
  }

  const unsigned jobs = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(trials)));
  std::vector<std::pair<Index, double>> parts(jobs);
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      const Index begin = trials * w / jobs, end = trials * (w + 1) / jobs;
      workers.emplace_back([&, w, begin, end] {
        parts[w] = detail::run_trials(population, m, eps, res.expectation, phi, seed, begin, end);
      });
    }
  }
  Index hits = 0;
  double sum = 0.0;
  for (const auto& [h, s] : parts) {
    hits += h;
    sum += s;
  }
  res.empirical_tail = static_cast<double>(hits) / static_cast<double>(trials);
  res.mean_phi = sum / static_cast<double>(trials);

  const double a = opts.alpha_override.value_or(alpha(m, n - m));
  if (eps == 0.0)
    res.bound = 1.0;
  else if (c == 0.0)
    res.bound = 0.0;
  else
    res.bound = std::exp(-2.0 * eps * eps / (a * c * c));
  res.slack_limit =
      res.bound + 3.0 * std::sqrt(res.bound * (1.0 - res.bound) / static_cast<double>(trials));
  return res;
}

/// phi = sample mean, c = (max - min)/m, E[phi] = population mean.
inline ConcentrationResult concentration_harness(std::span<const double> population, Index m,
                                                 double eps, Index trials, std::uint64_t seed,
                                                 const ConcentrationOptions& opts = {}) {
  detail::require(!population.empty(), ErrorCode::InvalidPartitionSize, "empty population");
  const auto [lo, hi] = std::minmax_element(population.begin(), population.end());
  const double c = (*hi - *lo) / static_cast<double>(m);
  return concentration_harness(population, m, eps, trials, seed, sample_mean, c,
                               sample_mean(population), opts);
}

}  // namespace tsr
