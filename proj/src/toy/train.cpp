#include "resrl/toy/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "resrl/json_writer.hpp"
#include "resrl/pipeline.hpp"

namespace resrl::toy {

namespace {

// Stream identifiers for mix_seed; each purpose draws from its own stream so
// evaluation never perturbs training randomness.
enum : std::uint64_t { kInitStream = 1, kSplitStream = 2, kPromptStream = 3, kEvalStream = 4, kRolloutStream = 5 };

double entropy_of(const Eigen::VectorXd& logits, double temperature) {
  const Eigen::VectorXd p = TinyPolicy::probabilities(logits, temperature);
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  }
  return h;
}

}  // namespace

GatingConfig ToyConfig::default_gating() {
  GatingConfig g;
  g.rank = 4;
  return g;
}

PolicyShape ToyConfig::policy_shape() const {
  return {modulus + 3, embed_dim, recurrent_dim, hidden_dim};
}

RolloutOptions ToyConfig::rollout_options() const {
  RolloutOptions o;
  o.group_size = group_size;
  o.temperature = temperature;
  o.max_len = max_len;
  o.layer = layer;
  o.tail_start = length_l0_fraction;
  return o;
}

void ToyConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("toy config: ") + what);
  };
  need(modulus >= 2, "modulus must be >= 2");
  need(depth >= 1, "depth must be >= 1");
  need(max_len >= depth + 1, "max_len must be >= depth + 1");
  need(embed_dim >= 1 && recurrent_dim >= 2 && hidden_dim >= 2, "policy dims too small");
  need(group_size >= 2, "group_size must be >= 2");
  need(temperature >= 0, "temperature must be >= 0");
  need(prompts_per_step >= 1, "prompts_per_step must be >= 1");
  need(lr > 0 && std::isfinite(lr), "lr must be positive");
  need(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  need(warmup_steps >= 0 && warmup_batch >= 1 && warmup_lr > 0, "invalid warm-up settings");
  need(steps >= 0, "steps must be >= 0");
  need(length_l0_fraction > 0 && length_l0_fraction <= 1, "length_l0_fraction must lie in (0, 1]");
  need(length_floor > 0 && length_floor <= 1, "length_floor must lie in (0, 1]");
  need(eval_every >= 0, "eval_every must be >= 0");
  need(eval_prompts >= 1 && eval_samples >= 1, "eval sizes must be >= 1");
  need(probe_size >= 1, "probe_size must be >= 1");
  need(save_every >= 0, "save_every must be >= 0");
  gating.validate();
  std::size_t prompts = 1;
  for (int i = 0; i < depth; ++i) prompts *= static_cast<std::size_t>(modulus);
  need(prompts > static_cast<std::size_t>(probe_size), "probe_size leaves no training prompts");
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    throw std::invalid_argument("pass_at_k: need 0 <= c <= n and 1 <= k <= n");
  }
  if (n - c < k) return 1.0;
  // C(n - c, k) / C(n, k) = prod_{i = n - c + 1}^{n} (1 - k / i)
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

double completion_logprob(const TinyPolicy& policy, const std::vector<int>& prompt,
                          const std::vector<int>& completion, double temperature) {
  std::vector<int> seq = prompt;
  seq.insert(seq.end(), completion.begin(), completion.end());
  const Trace trace = policy.forward(seq);
  double total = 0.0;
  for (std::size_t t = 0; t < completion.size(); ++t) {
    const auto col = static_cast<Eigen::Index>(prompt.size() + t - 1);
    total += TinyPolicy::log_prob(trace.logits.col(col), completion[t], temperature);
  }
  return total;
}

ProbeSet build_probe_set(const TinyPolicy& policy, const SumChainTask& task,
                         const std::vector<std::size_t>& prompts, int max_len, double temperature) {
  const int scratch_max = std::min(task.depth(), max_len - 2);
  if (scratch_max < 0) throw std::invalid_argument("build_probe_set: max_len too short for an answer");
  ProbeSet out;
  const int recurrent = policy.shape().recurrent;
  for (std::size_t prompt : prompts) {
    const int answer = task.answer(prompt);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(recurrent), nr, f, z;
    for (int tok : task.prompt_tokens(prompt)) {
      policy.step(tok, r, nr, f, z);
      r = nr;
    }
    double best = -INFINITY;
    std::vector<int> best_seq;
    std::vector<int> scratch;
    // Depth-first over scratchpads; each node scores "scratch answer EOS".
    std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double)> visit =
        [&](const Eigen::VectorXd& state, const Eigen::VectorXd& logits, double lp) {
          Eigen::VectorXd r2, f2, z2;
          policy.step(answer, state, r2, f2, z2);
          const double total = lp + TinyPolicy::log_prob(logits, answer, temperature) +
                               TinyPolicy::log_prob(z2, task.eos(), temperature);
          if (total > best) {
            best = total;
            best_seq = scratch;
            best_seq.push_back(answer);
            best_seq.push_back(task.eos());
          }
          if (static_cast<int>(scratch.size()) == scratch_max) return;
          for (int d = 0; d < task.modulus(); ++d) {
            Eigen::VectorXd r3, f3, z3;
            policy.step(d, state, r3, f3, z3);
            scratch.push_back(d);
            visit(r3, z3, lp + TinyPolicy::log_prob(logits, d, temperature));
            scratch.pop_back();
          }
        };
    visit(r, z, 0.0);
    if (task.reward(prompt, best_seq) != 1.0) throw std::logic_error("build_probe_set: unverified completion");
    out.prompts.push_back(prompt);
    out.completions.push_back(best_seq);
    out.init_logprob.push_back(best);
  }
  return out;
}

double probe_delta(const TinyPolicy& policy, const ProbeSet& probes, const SumChainTask& task,
                   double temperature) {
  if (probes.prompts.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probes.prompts.size(); ++i) {
    total += completion_logprob(policy, task.prompt_tokens(probes.prompts[i]), probes.completions[i], temperature) -
             probes.init_logprob[i];
  }
  return total / static_cast<double>(probes.prompts.size());
}

double minibatch_objective(const TinyPolicy& policy, const std::vector<BatchGroup>& batch,
                           const GatingConfig& cfg, double temperature, Eigen::VectorXd* grad) {
  if (batch.empty()) throw std::invalid_argument("minibatch_objective: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& bg : batch) {
    PromptGroup g = bg.group;
    std::vector<Trace> traces;
    for (std::size_t i = 0; i < bg.samples.size(); ++i) {
      const Sample& s = bg.samples[i];
      traces.push_back(policy.forward(s.sequence()));
      for (std::size_t t = 0; t < s.response.size(); ++t) {
        const auto col = static_cast<Eigen::Index>(s.prompt.size() + t - 1);
        g.trajectories[i].tokens[t].cur_logprob =
            TinyPolicy::log_prob(traces.back().logits.col(col), s.response[t], temperature);
      }
    }
    const LossReport rep = surrogate_loss(g, bg.coefficients, cfg);
    total += scale * rep.objective;
    if (grad == nullptr) continue;
    for (std::size_t i = 0; i < bg.samples.size(); ++i) {
      const Sample& s = bg.samples[i];
      const Trace& tr = traces[i];
      Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(tr.logits.rows(), tr.logits.cols());
      bool any = false;
      for (std::size_t t = 0; t < s.response.size(); ++t) {
        const double coef = scale * rep.logprob_grad[i][t];
        if (coef == 0.0) continue;
        const auto col = static_cast<Eigen::Index>(s.prompt.size() + t - 1);
        TinyPolicy::add_logprob_grad(dlogits, col, tr.logits.col(col), s.response[t], temperature, coef);
        any = true;
      }
      if (any) policy.backward(tr, dlogits, *grad);
    }
  }
  return total;
}

std::string RunMetrics::to_json() const {
  JsonObject o;
  o.add("schema", 1);
  o.add("step", step);
  o.add("mode", to_string(mode));
  if (avg_at_1) {
    o.add("avg_at_1", *avg_at_1);
    JsonObject pk;
    for (const auto& [k, v] : pass_at_k) pk.add(std::to_string(k), v);
    o.add_raw("pass_at_k", pk.str());
  }
  o.add("lld_delta", lld_delta);
  o.add("entropy", entropy);
  o.add("grad_norm", grad_norm);
  o.add("kl_to_init", kl_to_init);
  o.add("mean_response_length", mean_response_length);
  o.add("floor_fraction", floor_fraction);
  o.add("ceiling_fraction", ceiling_fraction);
  o.add("reward_mean", reward_mean);
  o.add("objective", objective);
  return o.str();
}

PromptSplit split_prompts(const SumChainTask& task, const ToyConfig& cfg) {
  std::vector<std::size_t> perm(task.prompt_count());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(cfg.seed, kSplitStream));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  PromptSplit s;
  const auto probe = static_cast<std::size_t>(cfg.probe_size);
  s.probe.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(probe));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(probe), perm.end());
  const std::size_t eval = std::min(s.train.size(), static_cast<std::size_t>(cfg.eval_prompts));
  s.eval.assign(s.train.begin(), s.train.begin() + static_cast<std::ptrdiff_t>(eval));
  return s;
}

TinyPolicy warm_start(const ToyConfig& cfg, const SumChainTask& task, const PromptSplit& split) {
  Rng rng(mix_seed(cfg.seed, kInitStream));
  TinyPolicy policy = TinyPolicy::random(cfg.policy_shape(), rng);
  // Warm start covers every prompt, probes included, so the initial policy
  // assigns them non-trivial likelihood.
  std::vector<std::size_t> pool = split.train;
  pool.insert(pool.end(), split.probe.begin(), split.probe.end());
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(policy.param_count());
  Eigen::VectorXd grad(policy.param_count());
  for (int step = 0; step < cfg.warmup_steps; ++step) {
    grad.setZero();
    double tokens = 0.0;
    std::vector<std::pair<Trace, std::size_t>> traces;
    for (int b = 0; b < cfg.warmup_batch; ++b) {
      const std::size_t prompt = pool[rng.below(pool.size())];
      std::vector<int> seq = task.prompt_tokens(prompt);
      const std::size_t plen = seq.size();
      for (int tok : task.canonical_response(prompt)) seq.push_back(tok);
      traces.emplace_back(policy.forward(seq), plen);
      tokens += static_cast<double>(seq.size() - plen);
    }
    for (const auto& [tr, plen] : traces) {
      Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(tr.logits.rows(), tr.logits.cols());
      for (std::size_t t = plen; t < tr.tokens.size(); ++t) {
        const auto col = static_cast<Eigen::Index>(t - 1);
        TinyPolicy::add_logprob_grad(dlogits, col, tr.logits.col(col), tr.tokens[t], 1.0, 1.0 / tokens);
      }
      policy.backward(tr, dlogits, grad);
    }
    velocity = cfg.momentum * velocity + grad;
    policy.params() += cfg.warmup_lr * velocity;
  }
  return policy;
}

ToyRun::ToyRun(const ToyConfig& cfg)
    : ToyRun(cfg, [&] {
        cfg.validate();
        const SumChainTask task(cfg.modulus, cfg.depth);
        return warm_start(cfg, task, split_prompts(task, cfg));
      }()) {}

ToyRun::ToyRun(const ToyConfig& cfg, TinyPolicy init)
    : cfg_(cfg),
      task_(cfg.modulus, cfg.depth),
      split_(split_prompts(task_, cfg)),
      init_(init),
      policy_(std::move(init)),
      prompt_rng_(mix_seed(cfg.seed, kPromptStream)) {
  cfg_.validate();
  if (policy_.shape().vocab != task_.vocab_size()) throw std::invalid_argument("ToyRun: policy vocab mismatch");
  probes_ = build_probe_set(init_, task_, split_.probe, cfg_.max_len, cfg_.temperature);
  velocity_ = Eigen::VectorXd::Zero(policy_.param_count());
}

std::vector<BatchGroup> ToyRun::sample_batch(int step) {
  const RolloutOptions opts = cfg_.rollout_options();
  const double l0 = cfg_.length_l0_fraction * cfg_.max_len;
  std::vector<BatchGroup> batch;
  for (int slot = 0; slot < cfg_.prompts_per_step; ++slot) {
    const std::size_t prompt = split_.train[prompt_rng_.below(split_.train.size())];
    Rng rng(mix_seed(mix_seed(cfg_.seed, kRolloutStream),
                     static_cast<std::uint64_t>(step) * 65536 + static_cast<std::uint64_t>(slot)));
    BatchGroup bg;
    std::vector<double> rewards;
    for (int i = 0; i < cfg_.group_size; ++i) {
      bg.samples.push_back(sample_response(policy_, task_, prompt, opts, rng));
      const Sample& s = bg.samples.back();
      double r = s.raw_reward;
      if (cfg_.length_scaling && l0 < cfg_.max_len) {
        r = length_scaled_reward(r, static_cast<double>(s.response.size()), l0, cfg_.max_len, cfg_.length_floor);
      }
      rewards.push_back(r);
    }
    PromptGroup g = make_group(policy_, task_.prompt_id(prompt), bg.samples, rewards, opts);
    if (cfg_.gating.kl_coeff > 0) {
      for (std::size_t i = 0; i < bg.samples.size(); ++i) {
        const Sample& s = bg.samples[i];
        const Trace tr = init_.forward(s.sequence());
        for (std::size_t t = 0; t < s.response.size(); ++t) {
          const auto col = static_cast<Eigen::Index>(s.prompt.size() + t - 1);
          g.trajectories[i].tokens[t].ref_logprob = TinyPolicy::log_prob(tr.logits.col(col), s.response[t], cfg_.temperature);
        }
      }
    }
    bg.group = normalize_advantages(std::move(g), cfg_.gating.std_floor);
    bg.coefficients = reweight_group(bg.group, cfg_.gating, cfg_.mode, static_cast<std::uint64_t>(step)).coefficients;
    batch.push_back(std::move(bg));
  }
  return batch;
}

void ToyRun::evaluate(RunMetrics& m) const {
  Rng rng(mix_seed(mix_seed(cfg_.seed, kEvalStream), static_cast<std::uint64_t>(m.step)));
  const RolloutOptions opts = cfg_.rollout_options();
  std::vector<int> ks;
  for (int k = 1; k <= cfg_.eval_samples; k *= 2) ks.push_back(k);
  if (ks.back() != cfg_.eval_samples) ks.push_back(cfg_.eval_samples);
  std::vector<double> pass(ks.size(), 0.0);
  double avg = 0.0;
  for (std::size_t prompt : split_.eval) {
    int correct = 0;
    for (int i = 0; i < cfg_.eval_samples; ++i) {
      if (sample_response(policy_, task_, prompt, opts, rng).raw_reward > 0) ++correct;
    }
    avg += static_cast<double>(correct) / cfg_.eval_samples;
    for (std::size_t j = 0; j < ks.size(); ++j) pass[j] += pass_at_k(cfg_.eval_samples, correct, ks[j]);
  }
  const double n = static_cast<double>(split_.eval.size());
  m.avg_at_1 = avg / n;
  for (std::size_t j = 0; j < ks.size(); ++j) m.pass_at_k.emplace_back(ks[j], pass[j] / n);
}

RunMetrics ToyRun::step() {
  const int step = step_ + 1;
  std::vector<BatchGroup> batch = sample_batch(step);

  RunMetrics m;
  m.step = step;
  m.mode = cfg_.mode;
  double tokens = 0.0, entropy = 0.0, kl = 0.0, reward = 0.0, length = 0.0;
  int gated = 0;
  for (const auto& bg : batch) {
    for (const auto& s : bg.samples) {
      const Trace cur = policy_.forward(s.sequence());
      const Trace ref = init_.forward(s.sequence());
      for (std::size_t t = 0; t < s.response.size(); ++t) {
        const auto col = static_cast<Eigen::Index>(s.prompt.size() + t - 1);
        entropy += entropy_of(cur.logits.col(col), cfg_.temperature);
        const double log_ratio = TinyPolicy::log_prob(ref.logits.col(col), s.response[t], cfg_.temperature) -
                                 TinyPolicy::log_prob(cur.logits.col(col), s.response[t], cfg_.temperature);
        kl += std::exp(log_ratio) - 1.0 - log_ratio;
        tokens += 1.0;
      }
      length += static_cast<double>(s.response.size());
    }
    for (const auto& t : bg.group.trajectories) reward += t.reward;
    const auto& gate = bg.coefficients.gate;
    if (gate && !gate->fallback) {
      m.floor_fraction += gate->floor_fraction;
      m.ceiling_fraction += gate->ceiling_fraction;
      ++gated;
    }
  }
  const double samples = static_cast<double>(batch.size()) * cfg_.group_size;
  m.entropy = entropy / tokens;
  m.kl_to_init = kl / tokens;
  m.reward_mean = reward / samples;
  m.mean_response_length = length / samples;
  if (gated > 0) {
    m.floor_fraction /= gated;
    m.ceiling_fraction /= gated;
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(policy_.param_count());
  m.objective = minibatch_objective(policy_, batch, cfg_.gating, cfg_.temperature, &grad);
  m.grad_norm = grad.norm();
  if (!std::isfinite(m.objective) || !std::isfinite(m.grad_norm)) {
    throw std::runtime_error("non-finite objective or gradient at step " + std::to_string(step));
  }
  velocity_ = cfg_.momentum * velocity_ + grad;
  policy_.params() += cfg_.lr * velocity_;
  step_ = step;

  m.lld_delta = probe_delta(policy_, probes_, task_, cfg_.temperature);
  if (cfg_.eval_every > 0 && (step % cfg_.eval_every == 0 || step == cfg_.steps)) evaluate(m);
  return m;
}

TrainOutcome train(const ToyConfig& cfg, const std::function<void(const RunMetrics&)>& on_metrics,
                   const std::function<void(const ToyRun&)>& on_snapshot) {
  ToyRun run(cfg);
  TrainOutcome out;
  for (int s = 0; s < cfg.steps; ++s) {
    try {
      out.metrics.push_back(run.step());
    } catch (const std::runtime_error& e) {
      out.diverged = true;
      out.error = e.what();
      break;
    }
    if (on_metrics) on_metrics(out.metrics.back());
    if (on_snapshot && cfg.save_every > 0 &&
        (run.steps_done() % cfg.save_every == 0 || run.steps_done() == cfg.steps)) {
      on_snapshot(run);
    }
  }
  return out;
}

}  // namespace resrl::toy
