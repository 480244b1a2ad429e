#include "resrl/toy/rollout.hpp"

#include <cmath>
#include <stdexcept>

namespace resrl::toy {

std::vector<int> Sample::sequence() const {
  std::vector<int> s = prompt;
  s.insert(s.end(), response.begin(), response.end());
  return s;
}

int sample_token(const Eigen::VectorXd& logits, double temperature, Rng& rng) {
  if (temperature <= 0) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const Eigen::VectorXd p = TinyPolicy::probabilities(logits, temperature);
  double u = rng.uniform();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    u -= p(i);
    if (u < 0) return static_cast<int>(i);
  }
  // Round-off left u marginally positive; take the last token with mass.
  for (Eigen::Index i = p.size() - 1; i > 0; --i) {
    if (p(i) > 0) return static_cast<int>(i);
  }
  return 0;
}

Sample sample_response(const TinyPolicy& policy, const SumChainTask& task, std::size_t prompt,
                       const RolloutOptions& opts, Rng& rng) {
  if (opts.max_len < 1) throw std::invalid_argument("rollout: max_len must be >= 1");
  Sample s;
  s.prompt = task.prompt_tokens(prompt);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(policy.shape().recurrent);
  Eigen::VectorXd next_r, f, z;
  for (int tok : s.prompt) {
    policy.step(tok, r, next_r, f, z);
    r = next_r;
  }
  for (int t = 0; t < opts.max_len; ++t) {
    const int tok = sample_token(z, opts.temperature, rng);
    s.response.push_back(tok);
    s.logprobs.push_back(TinyPolicy::log_prob(z, tok, opts.temperature));
    if (tok == task.eos()) break;
    policy.step(tok, r, next_r, f, z);
    r = next_r;
  }
  s.truncated = s.response.back() != task.eos();
  s.raw_reward = task.reward(prompt, s.response);
  return s;
}

PromptGroup make_group(const TinyPolicy& policy, const std::string& prompt_id,
                       const std::vector<Sample>& samples, const std::vector<double>& rewards,
                       const RolloutOptions& opts) {
  PromptGroup g;
  g.prompt_id = prompt_id;
  const auto tail_from = static_cast<std::size_t>(std::floor(opts.tail_start * opts.max_len));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const Trace trace = policy.forward(s.sequence());
    Trajectory traj;
    traj.reward = rewards.at(i);
    for (std::size_t t = 0; t < s.response.size(); ++t) {
      const auto col = static_cast<Eigen::Index>(s.prompt.size() + t - 1);
      TokenRecord tok;
      tok.traj = static_cast<int>(i);
      tok.position = static_cast<int>(t);
      tok.hidden = opts.layer == HiddenLayer::kPenultimate ? Eigen::VectorXd(trace.r.col(col))
                                                           : Eigen::VectorXd(trace.f.col(col));
      tok.truncation_tail = s.truncated && t >= tail_from;
      tok.old_logprob = s.logprobs[t];
      tok.cur_logprob = s.logprobs[t];
      traj.tokens.push_back(std::move(tok));
    }
    g.trajectories.push_back(std::move(traj));
  }
  return g;
}

PromptGroup rollout_group(const TinyPolicy& policy, const SumChainTask& task, std::size_t prompt,
                          const RolloutOptions& opts, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Sample> samples;
  std::vector<double> rewards;
  for (int i = 0; i < opts.group_size; ++i) {
    samples.push_back(sample_response(policy, task, prompt, opts, rng));
    rewards.push_back(samples.back().raw_reward);
  }
  return make_group(policy, task.prompt_id(prompt), samples, rewards, opts);
}

}  // namespace resrl::toy
