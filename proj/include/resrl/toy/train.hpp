// Toy RLVR loop: supervised warm start, then per step rollouts, group
// advantages, reweighting, surrogate gradient and one momentum step.

#ifndef RESRL_TOY_TRAIN_HPP_
#define RESRL_TOY_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "resrl/advantage.hpp"
#include "resrl/gating_config.hpp"
#include "resrl/toy/policy.hpp"
#include "resrl/toy/rollout.hpp"
#include "resrl/toy/task.hpp"

namespace resrl::toy {

struct ToyConfig {
  // task
  int modulus = 29;
  int depth = 2;
  int max_len = 6;
  // policy
  int embed_dim = 16;
  int recurrent_dim = 64;
  int hidden_dim = 32;
  HiddenLayer layer = HiddenLayer::kPenultimate;
  // rollout
  int group_size = 4;
  double temperature = 0.6;
  int prompts_per_step = 8;
  // optimiser
  double lr = 1e-2;
  double momentum = 0.9;
  // supervised warm start on canonical completions
  int warmup_steps = 1500;
  int warmup_batch = 16;
  double warmup_lr = 0.05;
  // run
  int steps = 200;
  std::uint64_t seed = 0;
  Mode mode = Mode::kResrl;
  GatingConfig gating = default_gating();
  bool length_scaling = false;
  double length_l0_fraction = 0.85;
  double length_floor = 0.7;
  // evaluation
  int eval_every = 1;
  int eval_prompts = 128;
  int eval_samples = 8;
  int probe_size = 64;
  // snapshots; 0 disables
  int save_every = 0;

  static GatingConfig default_gating();
  PolicyShape policy_shape() const;
  RolloutOptions rollout_options() const;
  void validate() const;
};

/// 1 - C(n - c, k) / C(n, k) as a product. Throws on invalid counts.
double pass_at_k(int n, int c, int k);

/// Sum of log pi(token) over the completion at the given temperature.
double completion_logprob(const TinyPolicy& policy, const std::vector<int>& prompt,
                          const std::vector<int>& completion, double temperature);

struct ProbeSet {
  std::vector<std::size_t> prompts;
  std::vector<std::vector<int>> completions;
  std::vector<double> init_logprob;
};

/// For each prompt, the most likely verified-correct completion under
/// `policy` among all digit scratchpads of length 0..min(depth, max_len - 2)
/// followed by the answer and EOS.
ProbeSet build_probe_set(const TinyPolicy& policy, const SumChainTask& task,
                         const std::vector<std::size_t>& prompts, int max_len, double temperature);

/// Mean of log pi(c) - log pi_init(c) over the probe set.
double probe_delta(const TinyPolicy& policy, const ProbeSet& probes, const SumChainTask& task,
                   double temperature);

/// One group of a frozen minibatch: the drawn samples, the group with its
/// advantages and the coefficients computed at rollout time.
struct BatchGroup {
  std::vector<Sample> samples;
  PromptGroup group;
  TokenCoefficients coefficients;
};

/// Mean over groups of the surrogate objective with current log-probs taken
/// from `policy`; adds its parameter gradient to *grad when non-null.
double minibatch_objective(const TinyPolicy& policy, const std::vector<BatchGroup>& batch,
                           const GatingConfig& cfg, double temperature, Eigen::VectorXd* grad);

struct RunMetrics {
  int step = 0;
  Mode mode = Mode::kResrl;
  std::optional<double> avg_at_1;
  std::vector<std::pair<int, double>> pass_at_k;
  double lld_delta = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double kl_to_init = 0.0;
  double mean_response_length = 0.0;
  double floor_fraction = 0.0;
  double ceiling_fraction = 0.0;
  double reward_mean = 0.0;
  double objective = 0.0;

  /// One JSONL record; eval fields are omitted on steps without evaluation.
  std::string to_json() const;
};

/// Fixed prompt partition for a seed: probe prompts are held out of
/// training; eval prompts are drawn from the training pool.
struct PromptSplit {
  std::vector<std::size_t> probe;
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

PromptSplit split_prompts(const SumChainTask& task, const ToyConfig& cfg);

/// Deterministic supervised warm start on canonical completions of the
/// training pool.
TinyPolicy warm_start(const ToyConfig& cfg, const SumChainTask& task, const PromptSplit& split);

class ToyRun {
 public:
  explicit ToyRun(const ToyConfig& cfg);
  /// Starts from a given initial policy instead of the warm start.
  ToyRun(const ToyConfig& cfg, TinyPolicy init);

  /// Runs one training step and returns its metrics. Throws
  /// std::runtime_error on a non-finite objective or gradient.
  RunMetrics step();

  int steps_done() const { return step_; }
  const TinyPolicy& policy() const { return policy_; }
  const TinyPolicy& initial_policy() const { return init_; }
  const SumChainTask& task() const { return task_; }
  const PromptSplit& split() const { return split_; }
  const ProbeSet& probes() const { return probes_; }
  const ToyConfig& config() const { return cfg_; }

  /// Rollouts and reweighting for one step without updating the policy.
  std::vector<BatchGroup> sample_batch(int step);

 private:
  void evaluate(RunMetrics& m) const;

  ToyConfig cfg_;
  SumChainTask task_;
  PromptSplit split_;
  TinyPolicy init_;
  TinyPolicy policy_;
  ProbeSet probes_;
  Eigen::VectorXd velocity_;
  Rng prompt_rng_;
  int step_ = 0;
};

struct TrainOutcome {
  std::vector<RunMetrics> metrics;
  bool diverged = false;
  std::string error;
};

/// Runs cfg.steps steps. on_metrics sees every record; with save_every > 0,
/// on_snapshot is called every save_every steps and after the last one. A divergence stops the
/// run and is reported in the outcome.
TrainOutcome train(const ToyConfig& cfg, const std::function<void(const RunMetrics&)>& on_metrics = {},
                   const std::function<void(const ToyRun&)>& on_snapshot = {});

}  // namespace resrl::toy

#endif  // RESRL_TOY_TRAIN_HPP_
