// Per-group reweighting driver: sign split, positive subspace, residual
// gating and coefficient reshaping in one call.

#ifndef RESRL_PIPELINE_HPP_
#define RESRL_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "resrl/advantage.hpp"
#include "resrl/gate.hpp"
#include "resrl/subspace.hpp"

namespace resrl {

struct GroupReweighting {
  SignSplit split;
  std::optional<PositiveSubspace> subspace;
  /// Residuals of the valid negative tokens (empty without a subspace).
  std::vector<TokenResidual> residuals;
  std::optional<GateResult> gate;
  TokenCoefficients coefficients;
};

/// Runs the reweighting for one group whose advantages are populated. The
/// gate is computed whenever the group has positives and valid negative
/// tokens, for every mode, so its diagnostics are comparable across modes;
/// only ResRL uses its weights. `step` seeds the positive-token sampler.
GroupReweighting reweight_group(const PromptGroup& group, const GatingConfig& cfg, Mode mode,
                                std::uint64_t step = 0, const SvdOptions& svd = {});

}  // namespace resrl

#endif  // RESRL_PIPELINE_HPP_
