#include "resrl/group.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace resrl {

std::size_t Trajectory::valid_count() const {
  std::size_t n = 0;
  for (const auto& tok : tokens) n += tok.valid ? 1 : 0;
  return n;
}

Eigen::Index PromptGroup::hidden_dim() const {
  for (const auto& traj : trajectories) {
    if (!traj.tokens.empty()) return traj.tokens.front().hidden.size();
  }
  return 0;
}

void PromptGroup::validate() const {
  const Eigen::Index d = hidden_dim();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    if (!std::isfinite(traj.reward)) {
      throw std::invalid_argument("group " + prompt_id + ": trajectory " + std::to_string(i) +
                                  " has a non-finite reward");
    }
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
      const auto& tok = traj.tokens[t];
      if (tok.traj != static_cast<int>(i) || tok.position != static_cast<int>(t)) {
        throw std::invalid_argument("group " + prompt_id + ": token (" + std::to_string(tok.traj) +
                                    "," + std::to_string(tok.position) + ") is out of place");
      }
      if (tok.hidden.size() != d) {
        throw std::invalid_argument("group " + prompt_id + ": hidden dim " +
                                    std::to_string(tok.hidden.size()) + " at (" +
                                    std::to_string(i) + "," + std::to_string(t) +
                                    ") differs from " + std::to_string(d));
      }
      if (!tok.hidden.allFinite()) {
        throw std::invalid_argument("group " + prompt_id + ": non-finite hidden state at (" +
                                    std::to_string(i) + "," + std::to_string(t) + ")");
      }
    }
  }
  if (!advantages.empty() && advantages.size() != trajectories.size()) {
    throw std::invalid_argument("group " + prompt_id + ": advantage count mismatch");
  }
}

PromptGroup normalize_advantages(PromptGroup group, double std_floor) {
  const std::size_t g = group.size();
  if (g < 2) throw std::invalid_argument("normalize_advantages: need at least 2 trajectories");
  if (!(std_floor > 0.0)) throw std::invalid_argument("normalize_advantages: std_floor must be > 0");
  double mean = 0.0;
  for (const auto& traj : group.trajectories) mean += traj.reward;
  mean /= static_cast<double>(g);
  double var = 0.0;
  bool all_equal = true;
  for (const auto& traj : group.trajectories) {
    var += (traj.reward - mean) * (traj.reward - mean);
    all_equal = all_equal && traj.reward == group.trajectories.front().reward;
  }
  const double sd = std::max(std::sqrt(var / static_cast<double>(g)), std_floor);
  group.advantages.assign(g, 0.0);
  if (all_equal) return group;
  for (std::size_t i = 0; i < g; ++i) {
    group.advantages[i] = (group.trajectories[i].reward - mean) / sd;
  }
  return group;
}

SignSplit split_by_sign(const PromptGroup& group) {
  if (!group.has_advantages()) throw std::invalid_argument("split_by_sign: advantages missing");
  SignSplit split;
  for (std::size_t i = 0; i < group.advantages.size(); ++i) {
    (group.advantages[i] > 0.0 ? split.positives : split.negatives).push_back(static_cast<int>(i));
  }
  return split;
}

}  // namespace resrl
