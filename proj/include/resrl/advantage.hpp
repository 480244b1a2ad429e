// Token-wise advantage reshaping for the GRPO / PSR / NSR / ResRL modes and
// the clipped surrogate objective.

#ifndef RESRL_ADVANTAGE_HPP_
#define RESRL_ADVANTAGE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resrl/gate.hpp"
#include "resrl/gating_config.hpp"
#include "resrl/group.hpp"

namespace resrl {

enum class Mode { kGrpo, kPsr, kNsr, kResrl };

std::string_view to_string(Mode mode);
/// Accepts "grpo", "psr", "nsr", "resrl" (case-insensitive).
Mode parse_mode(std::string_view name);

/// Per-trajectory, per-position table; invalid tokens hold 0.
using TokenTable = std::vector<std::vector<double>>;

struct TokenCoefficients {
  Mode mode = Mode::kGrpo;
  TokenTable values;
  std::optional<GateResult> gate;
};

/// ResRL: lambda_pos * A for A > 0, omega * A otherwise (plain A when the
/// group has no positives). GRPO: A. PSR: A * 1[A > 0]. NSR: the
/// lambda_pos-anchored variant, lambda_pos * A for positives and A for
/// negatives. Throws when mode is ResRL, positives exist and gate is null.
TokenCoefficients reshape_advantages(const PromptGroup& group, const GateResult* gate,
                                     const GatingConfig& cfg, Mode mode);

struct LossReport {
  /// (1/G) sum_i (1/T_i) sum_t min(rho A~, clip(rho) A~), T_i = valid tokens.
  double surrogate = 0.0;
  /// kl_coeff times the same token mean of the k3 estimator against the
  /// reference policy; 0 when kl_coeff is 0.
  double kl_term = 0.0;
  /// surrogate - kl_term, the quantity gradient ascent maximises.
  double objective = 0.0;
  TokenTable ratios;
  /// d objective / d cur_logprob for each token.
  TokenTable logprob_grad;
  double clipped_fraction = 0.0;
};

LossReport surrogate_loss(const PromptGroup& group, const TokenCoefficients& coeffs,
                          const GatingConfig& cfg);

/// Linear discount of positive rewards: 1 up to l0, falling to floor at l_max
/// and clamped there. Non-positive rewards pass through.
double length_scaled_reward(double raw_reward, double length, double l0, double l_max,
                            double floor);

}  // namespace resrl

#endif  // RESRL_ADVANTAGE_HPP_
