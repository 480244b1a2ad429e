// Per-group positive subspace: boundary-aware sampling of positive tokens,
// LayerNorm + centring, and rank-k basis extraction.

#ifndef RESRL_SUBSPACE_HPP_
#define RESRL_SUBSPACE_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "resrl/gating_config.hpp"
#include "resrl/group.hpp"
#include "resrl/linalg.hpp"

namespace resrl {

struct TokenIndex {
  int traj = 0;
  int pos = 0;

  friend bool operator==(const TokenIndex&, const TokenIndex&) = default;
  friend auto operator<=>(const TokenIndex&, const TokenIndex&) = default;
};

struct SamplePlan {
  std::size_t head_keep = 0;
  std::size_t tail_keep = 0;
  std::uint64_t seed = 0;

  /// head/tail = boundary_fraction * m_max each, seed derived from
  /// (prompt_id, step).
  static SamplePlan for_group(std::size_t m_max, double boundary_fraction,
                              std::string_view prompt_id, std::uint64_t step);
};

/// Caps the positive token list at m_max. Each trajectory keeps its first
/// head_keep and last tail_keep tokens (scaled down evenly if these alone
/// exceed m_max); the remainder is a seeded uniform draw without replacement
/// from the middle tokens. Output preserves input order.
std::vector<TokenIndex> boundary_aware_sample(const std::vector<TokenIndex>& tokens,
                                              std::size_t m_max, const SamplePlan& plan);

struct PositiveSubspace {
  Eigen::VectorXd centroid;
  OrthonormalBasis<double> basis{0};
  Eigen::VectorXd singular_values;
  std::size_t sample_count = 0;
  std::size_t requested_rank = 0;
  bool degenerate = true;
  /// Mean residual energy of the sampled positives: the measured coverage
  /// error (sum of discarded sigma_j^2) / (M d).
  double positive_tail_energy = 0.0;

  Eigen::Index dim() const { return centroid.size(); }
};

/// LN(h) (or h when LayerNorm is disabled) minus the centroid.
Eigen::VectorXd center_representation(const Eigen::VectorXd& hidden,
                                      const Eigen::VectorXd& centroid,
                                      const GatingConfig& cfg);

/// Valid tokens of the given trajectories, in (traj, pos) order.
std::vector<TokenIndex> valid_tokens(const PromptGroup& group, const std::vector<int>& trajs);

/// Builds the positive subspace from the sampled positive tokens. Throws
/// std::invalid_argument when there is no valid positive token; callers take
/// the plain-advantage fallback in that case.
PositiveSubspace build_subspace(const PromptGroup& group, const std::vector<int>& positives,
                                const GatingConfig& cfg, const SamplePlan& plan,
                                const SvdOptions& svd = {});

}  // namespace resrl

#endif  // RESRL_SUBSPACE_HPP_
