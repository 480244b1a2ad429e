#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "resrl/bench.hpp"
#include "resrl/theory.hpp"
#include "test_support.hpp"

using resrl::BoundCheckOptions;
using resrl::OrthonormalBasis;

TEST(Factorization, HandExample) {
  const Eigen::Vector2d d1(1, -1), d2(3, 1);
  const Eigen::Vector3d x1(2, 0, 1), x2(1, 1, 1);
  const Eigen::MatrixXd g1 = d1 * x1.transpose();
  const Eigen::MatrixXd g2 = d2 * x2.transpose();
  double entrywise = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) entrywise += g1(i, j) * g2(i, j);
  }
  EXPECT_DOUBLE_EQ(entrywise, 6.0);
  EXPECT_DOUBLE_EQ(d1.dot(d2) * x1.dot(x2), 6.0);
}

TEST(Factorization, OrthogonalSignalsAnnihilate) {
  const Eigen::Vector2d d1(1, 1), d2(1, -1);
  const Eigen::Vector3d x1(0.3, -2, 5), x2(1, 4, 1);
  const double lhs = (d1 * x1.transpose()).cwiseProduct(d2 * x2.transpose()).sum();
  EXPECT_NEAR(lhs, 0.0, 1e-12);
  EXPECT_NEAR(d1.dot(d2) * x1.dot(x2), 0.0, 1e-12);
}

TEST(Factorization, RandomTrials) {
  const auto r = resrl::check_gradient_factorization(1000, 128, 64, 1);
  EXPECT_EQ(r.trials, 1000u);
  EXPECT_LT(r.max_rel_err, 1e-10);
  EXPECT_EQ(r.violations, 0u);
}

TEST(Factorization, ModelDeltaMatchesFiniteDifference) {
  resrl::Rng rng(3);
  const auto model = resrl::LinearHeadModel::random(5, 4, rng);
  const Eigen::VectorXd x = resrl::test::gaussian(4, 1, rng);
  const Eigen::MatrixXd g = model.head_gradient(x, 2);
  const double h = 1e-6;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      Eigen::MatrixXd wp = model.head, wm = model.head;
      wp(i, j) += h;
      wm(i, j) -= h;
      const double fd = -(resrl::LinearHeadModel(wp).log_prob(x, 2) -
                          resrl::LinearHeadModel(wm).log_prob(x, 2)) / (2 * h);
      EXPECT_NEAR(g(i, j), fd, 1e-8);
    }
  }
}

TEST(ScaledBound, RandomTrials) {
  const auto r = resrl::check_scaled_bound(1000, 2);
  EXPECT_LT(r.max_rel_err, 1e-10);
  EXPECT_EQ(r.violations, 0u);
}

TEST(AlignmentBound, EqualityWhenColinear) {
  const OrthonormalBasis<double> s(Eigen::MatrixXd(Eigen::Vector2d(1, 0)));
  const Eigen::Vector2d xp(2, 0), x(1, 1);
  const double lhs = std::pow(x.dot(xp), 2);
  const double rhs = xp.squaredNorm() * (x.squaredNorm() - 2 * resrl::complement_energy(x, s));
  EXPECT_DOUBLE_EQ(lhs, 4.0);
  EXPECT_DOUBLE_EQ(rhs, 4.0);
}

TEST(AlignmentBound, ComplementVectorGivesZero) {
  const OrthonormalBasis<double> s(Eigen::MatrixXd(Eigen::Vector3d(1, 0, 0)));
  const Eigen::Vector3d x(0, 2, -1), xp(3, 0, 0);
  EXPECT_EQ(x.dot(xp), 0.0);
  EXPECT_NEAR(x.squaredNorm() - 3 * resrl::complement_energy(x, s), 0.0, 1e-12);
}

TEST(AlignmentBound, RandomTrialsHold) {
  BoundCheckOptions opts;
  opts.seed = 4;
  const auto r = resrl::check_alignment_bound(opts);
  EXPECT_EQ(r.trials, 10000u);
  EXPECT_EQ(r.violations, 0u);
}

TEST(AlignmentBound, FaultyProjectorIsCaught) {
  BoundCheckOptions opts;
  opts.trials = 2000;
  opts.projector_fault = true;
  EXPECT_GT(resrl::check_alignment_bound(opts).violations, 0u);
}

TEST(ProxyBound, RandomTrialsHold) {
  BoundCheckOptions opts;
  opts.seed = 5;
  const auto r = resrl::check_proxy_theorem(opts);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.sweeps, 10000u);
  EXPECT_EQ(r.monotonicity_violations, 0u);
}

TEST(ProxyBound, FixedShape) {
  BoundCheckOptions opts;
  opts.trials = 500;
  opts.dim = 16;
  opts.rank = 3;
  const auto r = resrl::check_proxy_theorem(opts);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.monotonicity_violations, 0u);
  opts.rank = 16;
  EXPECT_THROW(resrl::check_proxy_theorem(opts), std::invalid_argument);
}

TEST(ProxyBound, LimitingCases) {
  resrl::Rng rng(6);
  const auto s = resrl::random_subspace(6, 2, rng);
  // x+ in S: the complement term vanishes.
  const Eigen::VectorXd xp = s.columns() * Eigen::Vector2d(1.5, -0.5);
  EXPECT_NEAR(resrl::complement_energy(xp, s), 0.0, 1e-15);
  // x- in the complement: the subspace term vanishes.
  Eigen::VectorXd xn = resrl::test::gaussian(6, 1, rng);
  xn -= s.project(xn);
  EXPECT_NEAR(xn.squaredNorm() - 6 * resrl::complement_energy(xn, s), 0.0, 1e-12);
}

TEST(Determinism, SameSeedSameCounts) {
  BoundCheckOptions opts;
  opts.trials = 300;
  opts.seed = 11;
  const auto a = resrl::check_gradient_factorization(200, 32, 16, 9);
  const auto b = resrl::check_gradient_factorization(200, 32, 16, 9);
  EXPECT_EQ(a.max_rel_err, b.max_rel_err);
  opts.projector_fault = true;
  EXPECT_EQ(resrl::check_alignment_bound(opts).violations, resrl::check_alignment_bound(opts).violations);
}

TEST(LldBridge, SecondOrderRemainder) {
  resrl::Rng rng(7);
  const auto f = resrl::LldFixture::random(12, 8, 5, rng);
  const auto r = resrl::check_lld_bridge(f, {1e-2, 1e-3, 1e-4});
  EXPECT_GE(r.slope, 1.8);
  EXPECT_LE(r.slope, 2.2);
}

TEST(LldBridge, AlignedNegativeLowersTarget) {
  resrl::Rng rng(8);
  const auto f = resrl::LldFixture::aligned(12, 8, rng);
  const auto r = resrl::check_lld_bridge(f, {1e-2, 1e-3, 1e-4});
  for (double a : r.actual) EXPECT_LT(a, 0.0);
  for (double p : r.predicted) EXPECT_LT(p, 0.0);
}

TEST(LldBridge, OrthogonalNegativesPredictZero) {
  resrl::Rng rng(9);
  const auto f = resrl::LldFixture::orthogonal(12, 8, 4, rng);
  const auto r = resrl::check_lld_bridge(f, {1e-2, 1e-3, 1e-4});
  for (std::size_t i = 0; i < r.etas.size(); ++i) {
    EXPECT_NEAR(r.predicted[i], 0.0, 1e-14);
    EXPECT_LT(std::abs(r.actual[i]), 50.0 * r.etas[i] * r.etas[i]);
  }
}

TEST(LldBridge, DegenerateFixtureThrows) {
  resrl::Rng rng(10);
  auto f = resrl::LldFixture::random(6, 4, 2, rng);
  for (auto& n : f.negatives) n.advantage = 0.0;
  EXPECT_THROW(resrl::check_lld_bridge(f, {1e-2, 1e-3}), std::invalid_argument);
  f.negatives.clear();
  EXPECT_THROW(resrl::check_lld_bridge(f, {1e-2, 1e-3}), std::invalid_argument);
}

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(*resrl::spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
  EXPECT_DOUBLE_EQ(*resrl::spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
  EXPECT_FALSE(resrl::spearman({1, 1, 1}, {1, 2, 3}).has_value());
  // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  EXPECT_NEAR(*resrl::spearman({5, 5, 7}, {1, 2, 3}), std::sqrt(3.0) / 2.0, 1e-15);
}

namespace {

struct Clusters {
  resrl::LinearHeadModel model;
  OrthonormalBasis<double> s;
  std::vector<resrl::HeadToken> positives;
  std::vector<resrl::HeadToken> negatives;
};

Clusters two_clusters(resrl::Rng& rng) {
  const Eigen::Index d = 12, k = 3, v = 10;
  Clusters c{resrl::LinearHeadModel::random(v, d, rng, 0.3), resrl::random_subspace(d, k, rng), {}, {}};
  for (int i = 0; i < 8; ++i) {
    c.positives.push_back({c.s.columns() * resrl::test::gaussian(k, 1, rng), static_cast<Eigen::Index>(rng.below(v)), 1.0});
  }
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd x = resrl::test::gaussian(d, 1, rng);
    x = i % 2 == 0 ? Eigen::VectorXd(c.s.project(x)) : Eigen::VectorXd(x - c.s.project(x));
    c.negatives.push_back({x, static_cast<Eigen::Index>(rng.below(v)), -1.0});
  }
  return c;
}

}  // namespace

TEST(ProxyCorrelation, SeparatedClustersAreNegative) {
  resrl::Rng rng(12);
  const auto c = two_clusters(rng);
  const auto r = resrl::proxy_interference_correlation(c.model, c.positives, c.negatives, c.s, 200, 1);
  ASSERT_TRUE(r.spearman.has_value());
  EXPECT_LT(*r.spearman, 0.0);
  ASSERT_TRUE(r.ci_high.has_value());
  EXPECT_LE(*r.ci_low, *r.spearman);
  EXPECT_GE(*r.ci_high, *r.spearman);
}

TEST(ProxyCorrelation, IdenticalNegativesAreUndefined) {
  resrl::Rng rng(13);
  auto c = two_clusters(rng);
  for (auto& n : c.negatives) n = c.negatives.front();
  const auto r = resrl::proxy_interference_correlation(c.model, c.positives, c.negatives, c.s);
  EXPECT_FALSE(r.spearman.has_value());
  EXPECT_FALSE(r.ci_low.has_value());
}

TEST(Bench, ParseSizes) {
  const auto s = resrl::parse_bench_sizes("64,128,16,4;32,32,8,2,64");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].vocab_star, 0);
  EXPECT_EQ(s[1].vocab_star, 64);
  EXPECT_THROW(resrl::parse_bench_sizes("1,2,3"), std::invalid_argument);
  EXPECT_THROW(resrl::parse_bench_sizes("1,2,x,4"), std::invalid_argument);
  EXPECT_THROW(resrl::parse_bench_sizes("0,2,3,4"), std::invalid_argument);
}

TEST(Bench, DefaultGridHasEnoughRows) {
  std::size_t rows = 0;
  for (const auto& s : resrl::default_bench_grid()) rows += s.vocab_star > 0 ? 2 : 1;
  EXPECT_GE(rows, 9u);
}

TEST(Bench, SingleSizeHasNoFit) {
  resrl::BenchOptions opts;
  opts.repeats = 1;
  opts.min_sample_seconds = 0.0;
  const auto rows = resrl::bench_overhead({{32, 32, 8, 2, 0}}, opts);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GT(rows[0].seconds, 0.0);
  const auto summary = resrl::summarize_bench(rows);
  EXPECT_TRUE(summary.doublings.empty());
  std::ostringstream os;
  resrl::write_bench_csv(os, rows, summary);
  EXPECT_EQ(os.str().find("fit"), std::string::npos);
}

TEST(Bench, SummaryPairsDoublings) {
  std::vector<resrl::BenchRow> rows = {
      {"resrl", {100, 10, 8, 2, 16}, 1.0},
      {"lld", {100, 10, 8, 2, 16}, 4.0},
      {"resrl", {200, 10, 8, 2, 0}, 2.0},
      {"resrl", {100, 10, 8, 4, 0}, 1.9},
  };
  const auto s = resrl::summarize_bench(rows);
  ASSERT_EQ(s.doublings.size(), 2u);
  EXPECT_EQ(s.doublings[0].variable, "M");
  EXPECT_DOUBLE_EQ(s.doublings[0].ratio, 2.0);
  EXPECT_EQ(s.doublings[1].variable, "k");
  ASSERT_EQ(s.vocab.size(), 1u);
  EXPECT_DOUBLE_EQ(s.vocab[0].vocab_per_rank, 8.0);
  EXPECT_DOUBLE_EQ(s.vocab[0].ratio, 4.0);
  EXPECT_FALSE(s.vocab_slope.has_value());
}
