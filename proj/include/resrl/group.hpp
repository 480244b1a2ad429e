// Prompt-group data model: trajectories of tokens with hidden states, masks,
// rewards and group-normalised advantages.

#ifndef RESRL_GROUP_HPP_
#define RESRL_GROUP_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace resrl {

struct TokenRecord {
  int traj = 0;
  int position = 0;
  /// Hidden state h_{i,t} fed to the subspace pipeline.
  Eigen::VectorXd hidden;
  bool valid = true;
  /// Marks tokens in the cut-off tail of a length-capped response.
  bool truncation_tail = false;
  double old_logprob = 0.0;
  double cur_logprob = 0.0;
  /// Reference-policy log-prob; only needed when a KL penalty is active.
  std::optional<double> ref_logprob;
};

struct Trajectory {
  std::vector<TokenRecord> tokens;
  double reward = 0.0;

  std::size_t length() const { return tokens.size(); }
  std::size_t valid_count() const;
};

struct PromptGroup {
  std::string prompt_id;
  std::vector<Trajectory> trajectories;
  /// One advantage per trajectory; empty until normalize_advantages runs.
  std::vector<double> advantages;

  std::size_t size() const { return trajectories.size(); }
  /// Hidden dim shared by all tokens; 0 for a group without tokens.
  Eigen::Index hidden_dim() const;
  bool has_advantages() const { return advantages.size() == trajectories.size(); }

  /// Checks token indices, hidden-dim consistency and finiteness. Throws
  /// std::invalid_argument with a description of the first violation.
  void validate() const;
};

/// A_i = (r_i - mean(r)) / max(popstd(r), std_floor). Requires G >= 2.
PromptGroup normalize_advantages(PromptGroup group, double std_floor = 1e-6);

struct SignSplit {
  std::vector<int> positives;  ///< A_i > 0
  std::vector<int> negatives;  ///< A_i <= 0
};

SignSplit split_by_sign(const PromptGroup& group);

}  // namespace resrl

#endif  // RESRL_GROUP_HPP_
