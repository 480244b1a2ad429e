// Brute-force numerical checks of the head-gradient interference results on
// small linear-head models.

#ifndef RESRL_THEORY_HPP_
#define RESRL_THEORY_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "resrl/linalg.hpp"
#include "resrl/random.hpp"

namespace resrl {

/// Cross-entropy over logits z = W x.
struct LinearHeadModel {
  Eigen::MatrixXd head;  // |V| x d

  explicit LinearHeadModel(Eigen::MatrixXd w);
  static LinearHeadModel random(Eigen::Index vocab, Eigen::Index dim, Rng& rng, double scale = 1.0);

  Eigen::Index vocab() const { return head.rows(); }
  Eigen::Index dim() const { return head.cols(); }

  double log_prob(const Eigen::VectorXd& x, Eigen::Index target) const;
  /// delta = dl/dz = softmax(Wx) - e_target.
  Eigen::VectorXd delta(const Eigen::VectorXd& x, Eigen::Index target) const;
  /// Explicit outer product delta x^T.
  Eigen::MatrixXd head_gradient(const Eigen::VectorXd& x, Eigen::Index target) const;
};

/// Trial shape. dim == 0 draws d uniformly from [2, 64] per trial; rank == 0
/// draws k uniformly from [1, d - 1].
struct BoundCheckOptions {
  std::size_t trials = 10000;
  Eigen::Index dim = 0;
  Eigen::Index rank = 0;
  std::uint64_t seed = 0;
  /// Negative control: compute e(x) with the broken projector x - 0.5 P x.
  bool projector_fault = false;
};

struct FactorizationCheck {
  std::size_t trials = 0;
  double max_rel_err = 0.0;
  std::size_t violations = 0;  // rel err above 1e-10
};

/// <delta1 x1^T, delta2 x2^T>_F versus <delta1, delta2><x1, x2> for model
/// deltas on random heads, |V| in [2, max_vocab], d in [2, max_dim]. Errors
/// are relative to ||delta1|| ||delta2|| ||x1|| ||x2||.
FactorizationCheck check_gradient_factorization(std::size_t trials, Eigen::Index max_vocab,
                                                Eigen::Index max_dim, std::uint64_t seed);

/// Same with random advantage weights: |<A1 g1, A2 g2>| against
/// |A1 A2| |<delta1, delta2>| |<x1, x2>|. Roughly one trial in ten uses A1 = 0.
FactorizationCheck check_scaled_bound(std::size_t trials, std::uint64_t seed);

/// e(x) = ||(I - P_S) x||^2 / d.
double complement_energy(const Eigen::VectorXd& x, const OrthonormalBasis<double>& s,
                         bool projector_fault = false);

/// Random k-dimensional subspace of R^d.
OrthonormalBasis<double> random_subspace(Eigen::Index d, Eigen::Index k, Rng& rng);

struct BoundCheck {
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::size_t monotonicity_violations = 0;
  std::size_t sweeps = 0;
};

/// <x, x+>^2 <= ||x+||^2 (||x||^2 - d e(x)) + 1e-9 for x+ in S.
BoundCheck check_alignment_bound(const BoundCheckOptions& opts);

/// |<x-, x+>| <= ||P x+|| sqrt(||x-||^2 - d e(x-)) + ||x-|| sqrt(d e(x+)) + 1e-9,
/// plus one sweep per trial rotating x- from S into its complement at fixed
/// norm, checking that the subspace term never increases.
BoundCheck check_proxy_theorem(const BoundCheckOptions& opts);

struct HeadToken {
  Eigen::VectorXd x;
  Eigen::Index target = 0;
  double advantage = 0.0;
};

/// One positive target and the negative tokens sharing its head.
struct LldFixture {
  LinearHeadModel model;
  HeadToken positive;
  std::vector<HeadToken> negatives;

  static LldFixture random(Eigen::Index vocab, Eigen::Index dim, std::size_t negatives, Rng& rng);
  /// Single negative equal to the positive token (x- = x+, y- = y+).
  static LldFixture aligned(Eigen::Index vocab, Eigen::Index dim, Rng& rng);
  /// Negatives orthogonal to x+, so the first-order prediction is zero.
  static LldFixture orthogonal(Eigen::Index vocab, Eigen::Index dim, std::size_t negatives, Rng& rng);
};

struct LldBridge {
  std::vector<double> etas;
  std::vector<double> predicted;  // -eta sum <grad l+, g->
  std::vector<double> actual;     // log pi(c | W') - log pi(c | W)
  std::vector<double> abs_error;
  /// Least-squares slope of log |error| against log eta.
  double slope = 0.0;
};

/// Applies W <- W + eta sum g- with g- = -A- grad l- at each eta. Throws
/// std::invalid_argument without negatives or when every error vanishes.
LldBridge check_lld_bridge(const LldFixture& fixture, const std::vector<double>& etas);

struct ProxyCorrelation {
  std::size_t tokens = 0;
  /// Empty when either ranking is constant.
  std::optional<double> spearman;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::vector<double> energies;
  std::vector<double> interference;
};

/// Spearman correlation between e(x-) and the exact mean over positives of
/// |<grad l-, grad l+>|, with a percentile bootstrap 95% interval.
ProxyCorrelation proxy_interference_correlation(const LinearHeadModel& model,
                                                const std::vector<HeadToken>& positives,
                                                const std::vector<HeadToken>& negatives,
                                                const OrthonormalBasis<double>& s,
                                                std::size_t bootstrap = 1000,
                                                std::uint64_t seed = 0);

/// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Slope of the least-squares line through (x, y).
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace resrl

#endif  // RESRL_THEORY_HPP_
