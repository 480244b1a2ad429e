// Sampling a group of responses from the tiny policy and packaging them as a
// PromptGroup for the reweighting pipeline.

#ifndef RESRL_TOY_ROLLOUT_HPP_
#define RESRL_TOY_ROLLOUT_HPP_

#include <cstdint>
#include <vector>

#include "resrl/group.hpp"
#include "resrl/random.hpp"
#include "resrl/toy/policy.hpp"
#include "resrl/toy/task.hpp"

namespace resrl::toy {

struct RolloutOptions {
  int group_size = 4;
  /// <= 0 samples greedily.
  double temperature = 0.6;
  int max_len = 6;
  HiddenLayer layer = HiddenLayer::kPenultimate;
  /// Tokens at positions >= floor(tail_start * max_len) of a truncated
  /// response are flagged as truncation tail.
  double tail_start = 0.85;
};

struct Sample {
  std::vector<int> prompt;
  std::vector<int> response;
  std::vector<double> logprobs;
  bool truncated = false;
  double raw_reward = 0.0;

  std::vector<int> sequence() const;
};

/// Draws one token; greedy picks the first maximum.
int sample_token(const Eigen::VectorXd& logits, double temperature, Rng& rng);

Sample sample_response(const TinyPolicy& policy, const SumChainTask& task, std::size_t prompt,
                       const RolloutOptions& opts, Rng& rng);

/// Builds the group for already drawn samples: hidden states from the chosen
/// layer, old = current log-probs, rewards as given.
PromptGroup make_group(const TinyPolicy& policy, const std::string& prompt_id,
                       const std::vector<Sample>& samples, const std::vector<double>& rewards,
                       const RolloutOptions& opts);

/// G samples of one prompt with rewards from the verifier.
PromptGroup rollout_group(const TinyPolicy& policy, const SumChainTask& task, std::size_t prompt,
                          const RolloutOptions& opts, std::uint64_t seed);

}  // namespace resrl::toy

#endif  // RESRL_TOY_ROLLOUT_HPP_
