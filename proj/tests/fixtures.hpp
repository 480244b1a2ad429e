// Synthetic prompt groups for unit and integration tests.

#ifndef RESRL_TESTS_FIXTURES_HPP_
#define RESRL_TESTS_FIXTURES_HPP_

#include <string>
#include <vector>

#include "resrl/group.hpp"
#include "resrl/random.hpp"

namespace resrl::test {

/// Group with the given rewards; each trajectory has `tokens` tokens whose
/// hidden states are deterministic but distinct.
inline PromptGroup group_with_rewards(const std::vector<double>& rewards, int tokens,
                                      int dim = 4) {
  PromptGroup g;
  g.prompt_id = "fixture";
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Trajectory traj;
    traj.reward = rewards[i];
    for (int t = 0; t < tokens; ++t) {
      TokenRecord tok;
      tok.traj = static_cast<int>(i);
      tok.position = t;
      tok.hidden = Eigen::VectorXd::LinSpaced(dim, 0.0, 1.0 + static_cast<double>(i + t));
      traj.tokens.push_back(std::move(tok));
    }
    g.trajectories.push_back(std::move(traj));
  }
  return g;
}

inline PromptGroup random_group(const std::vector<double>& rewards, int tokens, int dim, Rng& rng) {
  PromptGroup g;
  g.prompt_id = "rand-" + std::to_string(rng() % 100000);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Trajectory traj;
    traj.reward = rewards[i];
    for (int t = 0; t < tokens; ++t) {
      TokenRecord tok;
      tok.traj = static_cast<int>(i);
      tok.position = t;
      tok.hidden.resize(dim);
      for (int j = 0; j < dim; ++j) tok.hidden(j) = rng.normal();
      tok.old_logprob = -rng.uniform() * 3.0;
      tok.cur_logprob = tok.old_logprob;
      traj.tokens.push_back(std::move(tok));
    }
    g.trajectories.push_back(std::move(traj));
  }
  return g;
}

}  // namespace resrl::test

#endif  // RESRL_TESTS_FIXTURES_HPP_
