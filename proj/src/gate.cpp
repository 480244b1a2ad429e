#include "resrl/gate.hpp"

#include <algorithm>
#include <stdexcept>

#include "resrl/linalg.hpp"

namespace resrl {

std::vector<std::vector<double>> GateResult::weight_table(const PromptGroup& group) const {
  std::vector<std::vector<double>> table;
  table.reserve(group.size());
  for (const auto& traj : group.trajectories) table.emplace_back(traj.length(), 1.0);
  for (const auto& tok : tokens) {
    table.at(static_cast<std::size_t>(tok.traj)).at(static_cast<std::size_t>(tok.pos)) = tok.weight;
  }
  return table;
}

std::vector<TokenResidual> residual_energies(const PromptGroup& group,
                                             const std::vector<int>& negatives,
                                             const PositiveSubspace& subspace,
                                             const GatingConfig& cfg) {
  if (subspace.dim() != group.hidden_dim()) {
    throw std::invalid_argument("residual_energies: hidden dim mismatch");
  }
  std::vector<TokenResidual> out;
  for (int i : negatives) {
    for (const auto& tok : group.trajectories.at(static_cast<std::size_t>(i)).tokens) {
      if (!tok.valid) continue;
      const Eigen::VectorXd x = center_representation(tok.hidden, subspace.centroid, cfg);
      out.push_back({tok.traj, tok.position, residual_energy(x, subspace.basis), tok.truncation_tail});
    }
  }
  return out;
}

GateResult gate_weights(std::span<const TokenResidual> residuals, const GatingConfig& cfg) {
  if (residuals.empty()) throw std::invalid_argument("gate_weights: empty residual set");
  std::vector<double> pool;
  pool.reserve(residuals.size());
  for (const auto& r : residuals) pool.push_back(r.residual);

  GateResult out;
  out.q_low = empirical_quantile(std::span<const double>(pool), cfg.alpha);
  out.q_high = empirical_quantile(std::span<const double>(pool), cfg.beta);
  out.degenerate_spread = out.q_high == out.q_low;
  const double spread = (out.q_high - out.q_low) + cfg.eps;

  std::size_t floors = 0;
  std::size_t ceilings = 0;
  out.tokens.reserve(residuals.size());
  for (const auto& r : residuals) {
    const double z = std::clamp((r.residual - out.q_low) / spread, 0.0, 1.0);
    floors += z == 0.0 ? 1 : 0;
    ceilings += z == 1.0 ? 1 : 0;
    double w = cfg.xi + (1.0 - cfg.xi) * z;
    if (cfg.truncation_guard && r.tail) w = 1.0;
    out.tokens.push_back({r.traj, r.pos, r.residual, z, w});
  }
  const auto n = static_cast<double>(residuals.size());
  out.floor_fraction = static_cast<double>(floors) / n;
  out.ceiling_fraction = static_cast<double>(ceilings) / n;
  return out;
}

GateResult fallback_gate(const PromptGroup& group, const std::vector<int>& negatives) {
  GateResult out;
  out.fallback = true;
  for (const auto& idx : valid_tokens(group, negatives)) {
    out.tokens.push_back({idx.traj, idx.pos, 0.0, 0.0, 1.0});
  }
  return out;
}

}  // namespace resrl
