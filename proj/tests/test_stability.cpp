#include <gtest/gtest.h>

#include "tsr/constrained.hpp"
#include "tsr/rng.hpp"
#include "tsr/stability.hpp"
#include "tsr/synthetic.hpp"

using namespace tsr;

namespace {

Vector uniform_vector(Rng& rng, Index n, double lo, double hi) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

FullSample labels_only(const Vector& y, double bound) {
  return FullSample(Matrix::Zero(y.size(), 1), y, bound);
}

}  // namespace

TEST(LtrStability, Examples) {
  StabilityInputs in{10, 10, 1.0, 0.0, 1.0, 1.0, 0.0};
  EXPECT_NEAR(ltr_stability_bound(in), 1.6, 1e-12);
  in.c_prime = 1.0;
  in.beta_loc = 0.1;
  EXPECT_NEAR(ltr_stability_bound(in), 4.8928, 1e-3);
  // Independent evaluation of the same expression.
  const double a = 1.0 + std::sqrt(2.0);
  const double expected = 2.0 * a * a * (0.2 + std::sqrt(0.04 + 0.2 / (a * 10.0)));
  EXPECT_NEAR(ltr_stability_bound(in), expected, 1e-12);
}

TEST(LtrStability, ReducesToInductiveForm) {
  for (double c : {0.1, 1.0, 7.0})
    for (Index m : {3, 20}) {
      const StabilityInputs in{m, 5, c, 0.0, 0.7, 2.0, 0.0};
      const double am = ltr_residual_bound(2.0, 0.7, c, 0.0);
      EXPECT_NEAR(ltr_stability_bound(in), 4.0 * c * am * am * 0.49 / static_cast<double>(m), 1e-12);
    }
}

TEST(LtrStability, Errors) {
  EXPECT_THROW(ltr_stability_bound({10, 10, 1, 0, 0.0, 1, 0}), Error);
  EXPECT_THROW(ltr_stability_bound({10, 10, 1, 0, 1, 0.0, 0}), Error);
  try {
    ltr_stability_bound({10, 10, -1, 0, 1, 1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidStabilityInput);
  }
}

TEST(LtrStability, Monotone) {
  const StabilityInputs base{10, 12, 1.0, 0.5, 1.0, 1.0, 0.2};
  const double b0 = ltr_stability_bound(base);
  for (double f : {1.5, 3.0}) {
    StabilityInputs in = base;
    in.c *= f;
    EXPECT_GE(ltr_stability_bound(in), b0);
    in = base;
    in.c_prime *= f;
    EXPECT_GE(ltr_stability_bound(in), b0);
    in = base;
    in.beta_loc *= f;
    EXPECT_GE(ltr_stability_bound(in), b0);
    in = base;
    in.kappa *= f;
    EXPECT_GE(ltr_stability_bound(in), b0);
    in = base;
    in.label_bound *= f;
    EXPECT_GE(ltr_stability_bound(in), b0);
    in = base;
    in.m = static_cast<Index>(static_cast<double>(in.m) * f);
    EXPECT_LE(ltr_stability_bound(in), b0);
    in = base;
    in.u = static_cast<Index>(static_cast<double>(in.u) * f);
    EXPECT_LE(ltr_stability_bound(in), b0);
  }
}

TEST(ClosedFormBounds, Examples) {
  EXPECT_NEAR(cm_score_bound(1.0), 1.41421356, 1e-8);
  EXPECT_EQ(cm_score_bound(0.0), 0.0);
  EXPECT_NEAR(cm_score_bound(2.0), 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(llreg_score_bound(1.0, 2, 1.0, 1.0), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(llreg_score_bound(1.0, 2, 1.0, 2.0), std::sqrt(2.0) + 4.0, 1e-12);
  EXPECT_NEAR(llreg_score_bound(2.0, 2, 1.0, 2.0), 2.0 * llreg_score_bound(1.0, 2, 1.0, 2.0), 1e-12);
  EXPECT_NEAR(llreg_score_bound_loose(1.0, 2, 1.0), std::sqrt(2.0) + 8.0, 1e-12);
  EXPECT_THROW(llreg_score_bound(1.0, 2, 0.0, 1.0), Error);
  EXPECT_THROW(llreg_score_bound(1.0, 2, 2.0, 1.0), Error);
}

TEST(ClosedFormBounds, UnconstrainedScoreBoundExamples) {
  SpectrumSummary q, c;
  q.lambda_min = 0.0;
  q.lambda_max = 2.0;
  c.lambda_min = c.lambda_max = 1.0;
  EXPECT_DOUBLE_EQ(unconstrained_score_bound(q, c, c, 0.7, 3.0, 0.0), 0.7);
  EXPECT_DOUBLE_EQ(unconstrained_score_bound(q, c, c, std::sqrt(2.0) * 1.5, 3.0, 0.0), cm_score_bound(1.5));
}

TEST(ClosedFormBounds, UnconstrainedScoreBoundHoldsForSolvePairs) {
  // Perturb y at one coordinate and C at the same coordinate, solve twice.
  Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    Matrix b(6, 6);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    const Matrix q = b * b.transpose() * rng.uniform(0.01, 1.0);
    const Vector c1 = uniform_vector(rng, 6, 0.1, 3.0);
    Vector c2 = c1;
    const auto k = static_cast<Eigen::Index>(rng.below(6));
    c2(k) = rng.uniform(0.1, 3.0);
    const Vector y1 = uniform_vector(rng, 6, -1.0, 1.0);
    Vector y2 = y1;
    y2(k) = rng.uniform(-1.0, 1.0);
    const Matrix cm1 = c1.asDiagonal(), cm2 = c2.asDiagonal();
    const Vector h1 = solve_unconstrained({q, cm1, y1}).scores;
    const Vector h2 = solve_unconstrained({q, cm2, y2}).scores;
    const double diff = std::abs(1.0 / c2(k) - 1.0 / c1(k));
    const double bound =
        unconstrained_score_bound(spectrum(q), spectrum(cm1), spectrum(cm2), (y2 - y1).norm(), y2.norm(), diff);
    EXPECT_LE((h1 - h2).norm(), bound + 1e-10);
  }
}

TEST(BelkinBounds, Examples) {
  EXPECT_NEAR(belkin_score_stability(1.0, 100, 1.0, 0.5),
              4.0 * std::sqrt(2.0) / 49.0 + 4.0 * std::sqrt(200.0) / 2401.0, 1e-14);
  EXPECT_NEAR(belkin_score_stability(1.0, 100, 1.0, 0.5), 0.13900, 1e-4);
  EXPECT_LT(belkin_score_stability(1.0, 100, 1.0, 1e9), 1e-9);
  try {
    belkin_score_stability(1.0, 2, 1.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundDiverges);
  }
  EXPECT_NEAR(belkin_cost_stability(1.0, 1.0, 100, 0.5, 3), 0.08, 1e-15);
  EXPECT_NEAR(belkin_cost_stability(1.0, 1.0, 100, 1e6, 1), 0.04 * 1e-6, 1e-20);
  EXPECT_NEAR(belkin_cost_stability(1.0, 1.0, 100, 10.0, 1), 0.004, 1e-15);
  EXPECT_NEAR(belkin_cost_stability(2.0, 1.5, 200, 0.5, 3), 0.5 * belkin_cost_stability(2.0, 1.5, 100, 0.5, 3),
              1e-15);
  try {
    belkin_cost_stability(1.0, 1.0, 10, 0.0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GraphDisconnected);
  }
}

TEST(BetaLoc, Examples) {
  EXPECT_DOUBLE_EQ(beta_loc_bound(1.0, 5, 2.0, 2.0), 0.8);
  EXPECT_NEAR(beta_loc_bound(1.0, 10, std::exp(2.0), 1.0), 2.9556, 1e-4);
  EXPECT_NEAR(beta_loc_gaussian(1.0, 10, 1.3, 1.3), 4.0 * std::exp(2.0) / 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(beta_loc_gaussian(3.0, 6, 0.0, 1.0), 2.0);
  EXPECT_TRUE(std::isinf(beta_loc_gaussian(1.0, 10, 100.0, 1.0)));
  EXPECT_DOUBLE_EQ(beta_loc_invdist(1.0, 4, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(beta_loc_invdist(1.0, 4, 0.0), 0.5);
  try {
    beta_loc_bound(1.0, 0, 1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyNeighborhood);
  }
  EXPECT_THROW(beta_loc_invdist(1.0, 0, 1.0), Error);
  EXPECT_THROW(beta_loc_bound(1.0, 3, 1.0, 2.0), Error);
}

TEST(EmpiricalStability, ConstantSolver) {
  Rng rng(42);
  const FullSample s = labels_only(uniform_vector(rng, 8, -1.0, 1.0), 1.0);
  const Partition p = sample_partition(8, 4, 1);
  const auto rep = empirical_stability([](const Partition&) { return HypothesisScores{Vector::Ones(8)}; }, s, p,
                                       enumerate_swaps(p));
  EXPECT_EQ(rep.max_score_delta, 0.0);
  EXPECT_EQ(rep.max_cost_delta, 0.0);
  EXPECT_EQ(rep.swaps_evaluated, 16u);
  EXPECT_TRUE(rep.exhaustive);
}

TEST(EmpiricalStability, SolverErrorNamesSwap) {
  const FullSample s = labels_only(Vector::Zero(4), 1.0);
  const Partition p(4, {0, 1});
  int calls = 0;
  try {
    empirical_stability(
        [&](const Partition&) -> HypothesisScores {
          if (calls++ > 0) throw Error(ErrorCode::SingularSystem, "boom");
          return {Vector::Zero(4)};
        },
        s, p, enumerate_swaps(p));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularSystem);
    EXPECT_NE(std::string(e.what()).find("swap"), std::string::npos);
  }
}

TEST(EmpiricalStability, SelectSwaps) {
  const Partition small = sample_partition(20, 10, 3);
  const SwapSelection all = select_swaps(small, 1);
  EXPECT_TRUE(all.exhaustive);
  EXPECT_EQ(all.swaps.size(), 100u);
  const Partition big = sample_partition(60, 30, 3);
  const SwapSelection some = select_swaps(big, 1);
  EXPECT_FALSE(some.exhaustive);
  EXPECT_EQ(some.swaps.size(), 400u);
  for (std::size_t a = 0; a < some.swaps.size(); ++a) {
    EXPECT_TRUE(big.is_train(some.swaps[a].removed));
    EXPECT_FALSE(big.is_train(some.swaps[a].added));
  }
  const SwapSelection again = select_swaps(big, 1);
  EXPECT_TRUE(std::equal(some.swaps.begin(), some.swaps.end(), again.swaps.begin()));
}

// Exhaustive swap enumeration on instances with at most 14 points.
TEST(EmpiricalStability, TheoreticalBoundsHold) {
  Rng rng(43);
  for (int k = 0; k < 6; ++k) {
    const Index n = 10 + rng.below(5);
    const GraphSpec g = random_connected_graph(n, 0.35, rng.next_u64());
    const double mb = rng.uniform(0.5, 2.0);
    const Vector y = uniform_vector(rng, n, -mb, mb);
    const FullSample s = labels_only(y, mb);
    const Index m = 2 + rng.below(n - 3);
    const Partition p = sample_partition(n, m, rng.next_u64());
    const auto swaps = enumerate_swaps(p);

    const double mu = rng.uniform(0.1, 5.0);
    const auto cm = empirical_stability(
        [&](const Partition& q) { return solve_unconstrained(build_cm(g, mu, y, q)); }, s, p, swaps);
    EXPECT_LE(cm.max_score_delta, cm_score_bound(mb) + 1e-9);
    EXPECT_LE(cm.max_cost_delta, 2.0 * cm.max_residual * cm.max_score_delta + 1e-9);

    const double cl = rng.uniform(1.0, 5.0), cu = rng.uniform(0.05, 1.0);
    const auto ll = empirical_stability(
        [&](const Partition& q) { return solve_unconstrained(build_llreg(g.weights(), cl, cu, y, q)); }, s, p,
        swaps);
    EXPECT_LE(ll.max_score_delta, llreg_score_bound(mb, m, cu, cl) + 1e-9);
    EXPECT_LE(ll.max_cost_delta, 2.0 * ll.max_residual * ll.max_score_delta + 1e-9);

    const auto gmf = empirical_stability(
        [&](const Partition& q) { return solve_unconstrained(build_gmf(g, cl, cu, y, q)); }, s, p, swaps);
    EXPECT_LE(gmf.max_score_delta, llreg_score_bound(mb, m, cu, cl) + 1e-9);
  }
}

TEST(EmpiricalStability, BelkinBoundHolds) {
  Rng rng(44);
  int checked = 0;
  for (int k = 0; k < 30 && checked < 4; ++k) {
    const Index n = 12;
    const GraphSpec g = random_connected_graph(n, 0.7, rng.next_u64());
    const Matrix l = laplacian(g);
    const double lambda2 = spectrum(l).lambda2;
    const Index m = 6;
    const double c = rng.uniform(0.05, 0.9) * static_cast<double>(m) * lambda2;
    Vector y = uniform_vector(rng, n, -1.0, 1.0);
    y.array() -= y.mean();
    const double mb = y.cwiseAbs().maxCoeff();
    const Partition p = sample_partition(n, m, rng.next_u64());
    const auto rep = empirical_stability(
        [&](const Partition& q) { return solve_constrained({l, c, q, y, std::nullopt}); }, labels_only(y, mb), p,
        enumerate_swaps(p));
    EXPECT_LE(rep.max_score_delta, belkin_score_stability(mb, m, c, lambda2) + 1e-9);
    ++checked;
  }
  EXPECT_EQ(checked, 4);
}

TEST(EmpiricalStability, StabilizedCmWithinLambda2Bound) {
  Rng rng(45);
  for (int k = 0; k < 6; ++k) {
    const Index n = 10;
    const GraphSpec g = random_connected_graph(n, 0.4, rng.next_u64());
    const Vector y = uniform_vector(rng, n, -1.0, 1.0);
    const double mb = y.cwiseAbs().maxCoeff();
    const Partition p = sample_partition(n, 5, rng.next_u64());
    const double mu = rng.uniform(0.05, 2.0);
    const auto rep = empirical_stability(
        [&](const Partition& q) { return stabilize(build_cm(g, mu, y, q)); }, labels_only(y, mb), p,
        enumerate_swaps(p));
    SpectrumSummary qs = spectrum(normalized_laplacian(g));
    qs.lambda_min = qs.lambda2;
    SpectrumSummary cs;
    cs.lambda_min = cs.lambda_max = mu;
    EXPECT_LE(rep.max_score_delta, unconstrained_score_bound(qs, cs, cs, std::sqrt(2.0) * mb, 0.0, 0.0) + 1e-9);
  }
}

TEST(EmpiricalStability, StabilizeReducesSwapSensitivity) {
  Rng rng(46);
  const Index n = 10;
  const GraphSpec g = random_connected_graph(n, 0.4, 17);
  const Vector y = uniform_vector(rng, n, 0.5, 1.0);
  const Partition p = sample_partition(n, 5, 3);
  const double mu = 0.01;
  const FullSample s = labels_only(y, 1.0);
  const auto plain = empirical_stability(
      [&](const Partition& q) { return solve_unconstrained(build_cm(g, mu, y, q)); }, s, p, enumerate_swaps(p));
  const auto stab = empirical_stability(
      [&](const Partition& q) { return stabilize(build_cm(g, mu, y, q)); }, s, p, enumerate_swaps(p));
  EXPECT_LT(stab.max_score_delta, plain.max_score_delta);
}

TEST(LowerBound, Examples) {
  EXPECT_NEAR(cm_lower_bound_value(2, 1.0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(cm_lower_bound_value(2, 1e12), 1.0, 1e-9);
  const LowerBoundInstance inst = cm_lower_bound_instance(2, 1.0);
  EXPECT_EQ(inst.q.rows(), 4);
  EXPECT_EQ(inst.part.m(), 2u);
  EXPECT_TRUE(inst.q.topRightCorner(2, 2).isZero());
  EXPECT_THROW(cm_lower_bound_instance(1, 1.0), Error);
  try {
    cm_lower_bound_instance(1, 1.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidInstance);
  }
}

TEST(LowerBound, MeasuredChangeMatchesPrediction) {
  for (Index m : {2, 3, 6, 11})
    for (double c : {0.1, 1.0, 4.0, 50.0}) {
      const LowerBoundInstance inst = cm_lower_bound_instance(m, c);
      EXPECT_GE(inst.predicted_a, c / (2.0 * (c + 1.0)));
      const SwapPair sw = inst.canonical_swap();
      const Vector h0 = solve_unconstrained(inst.problem()).scores;
      const Vector h1 = solve_unconstrained(inst.problem_for(inst.part.swapped(sw))).scores;
      const double delta = std::abs(h1(static_cast<Eigen::Index>(sw.added)) - h0(static_cast<Eigen::Index>(sw.added)));
      EXPECT_NEAR(delta, inst.predicted_a, 1e-9) << "m=" << m << " C=" << c;
      EXPECT_GE((h1 - h0).cwiseAbs().maxCoeff(), c / (2.0 * (c + 1.0)) - 1e-9);
    }
}
