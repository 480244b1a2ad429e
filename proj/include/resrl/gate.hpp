// Group-relative quantile gating: negative-token residual energies become
// token-wise NSR weights in [xi, 1].

#ifndef RESRL_GATE_HPP_
#define RESRL_GATE_HPP_

#include <span>
#include <vector>

#include "resrl/gating_config.hpp"
#include "resrl/group.hpp"
#include "resrl/subspace.hpp"

namespace resrl {

struct TokenResidual {
  int traj = 0;
  int pos = 0;
  double residual = 0.0;
  bool tail = false;
};

struct GatedToken {
  int traj = 0;
  int pos = 0;
  double residual = 0.0;
  /// Clamped normalised score in [0, 1].
  double score = 0.0;
  double weight = 1.0;
};

struct GateResult {
  std::vector<GatedToken> tokens;
  double q_low = 0.0;
  double q_high = 0.0;
  /// Share of gated tokens with score 0 (at or below q_low).
  double floor_fraction = 0.0;
  /// Share of gated tokens with score 1.
  double ceiling_fraction = 0.0;
  /// True when q_high == q_low: every score collapses to 0 and every weight to xi.
  bool degenerate_spread = false;
  /// True when weights were forced to 1 because no usable subspace existed.
  bool fallback = false;

  /// Per-trajectory weight table shaped like the group; ungated tokens get 1.
  std::vector<std::vector<double>> weight_table(const PromptGroup& group) const;
};

/// R = ||(I - P_S)(LN(h) - mu+)||^2 / d for every valid token of the given
/// negative trajectories.
std::vector<TokenResidual> residual_energies(const PromptGroup& group,
                                             const std::vector<int>& negatives,
                                             const PositiveSubspace& subspace,
                                             const GatingConfig& cfg);

/// Quantile min-max gating. Throws std::invalid_argument on an empty set.
GateResult gate_weights(std::span<const TokenResidual> residuals, const GatingConfig& cfg);

/// All-ones weights for the valid negative tokens; used when the positive
/// subspace is degenerate.
GateResult fallback_gate(const PromptGroup& group, const std::vector<int>& negatives);

}  // namespace resrl

#endif  // RESRL_GATE_HPP_
