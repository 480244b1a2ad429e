#include "resrl/pipeline.hpp"

namespace resrl {

GroupReweighting reweight_group(const PromptGroup& group, const GatingConfig& cfg, Mode mode,
                                std::uint64_t step, const SvdOptions& svd) {
  GroupReweighting out;
  out.split = split_by_sign(group);

  if (!out.split.positives.empty() && !valid_tokens(group, out.split.positives).empty()) {
    const SamplePlan plan =
        SamplePlan::for_group(cfg.m_max, cfg.boundary_fraction, group.prompt_id, step);
    out.subspace = build_subspace(group, out.split.positives, cfg, plan, svd);
    if (out.subspace->degenerate) {
      out.gate = fallback_gate(group, out.split.negatives);
    } else {
      out.residuals = residual_energies(group, out.split.negatives, *out.subspace, cfg);
      if (!out.residuals.empty()) out.gate = gate_weights(out.residuals, cfg);
    }
  }
  if (!out.split.positives.empty() && !out.gate) {
    // Positives exist but no valid negative token: nothing to gate.
    out.gate = fallback_gate(group, out.split.negatives);
  }
  out.coefficients = reshape_advantages(group, out.gate ? &*out.gate : nullptr, cfg, mode);
  return out;
}

}  // namespace resrl
