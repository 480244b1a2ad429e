#include "resrl/advantage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace resrl {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kGrpo: return "grpo";
    case Mode::kPsr: return "psr";
    case Mode::kNsr: return "nsr";
    case Mode::kResrl: return "resrl";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "grpo") return Mode::kGrpo;
  if (lower == "psr") return Mode::kPsr;
  if (lower == "nsr") return Mode::kNsr;
  if (lower == "resrl") return Mode::kResrl;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

TokenCoefficients reshape_advantages(const PromptGroup& group, const GateResult* gate,
                                     const GatingConfig& cfg, Mode mode) {
  if (!group.has_advantages()) throw std::invalid_argument("reshape_advantages: advantages missing");
  const bool any_positive =
      std::any_of(group.advantages.begin(), group.advantages.end(), [](double a) { return a > 0.0; });
  if (mode == Mode::kResrl && any_positive && gate == nullptr) {
    throw std::invalid_argument("reshape_advantages: ResRL mode needs a gate when positives exist");
  }

  TokenCoefficients out;
  out.mode = mode;
  if (gate != nullptr) out.gate = *gate;
  TokenTable weights;
  if (mode == Mode::kResrl && any_positive) weights = gate->weight_table(group);

  out.values.resize(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& traj = group.trajectories[i];
    const double a = group.advantages[i];
    auto& row = out.values[i];
    row.assign(traj.length(), 0.0);
    for (std::size_t t = 0; t < traj.length(); ++t) {
      if (!traj.tokens[t].valid) continue;
      double v = a;
      switch (mode) {
        case Mode::kGrpo:
          break;
        case Mode::kPsr:
          v = a > 0.0 ? a : 0.0;
          break;
        case Mode::kNsr:
          v = a > 0.0 ? cfg.lambda_pos * a : a;
          break;
        case Mode::kResrl:
          if (any_positive) v = a > 0.0 ? cfg.lambda_pos * a : weights[i][t] * a;
          break;
      }
      row[t] = v;
    }
  }
  return out;
}

LossReport surrogate_loss(const PromptGroup& group, const TokenCoefficients& coeffs,
                          const GatingConfig& cfg) {
  if (coeffs.values.size() != group.size()) {
    throw std::invalid_argument("surrogate_loss: coefficient table does not match group");
  }
  const std::size_t g = group.size();
  LossReport rep;
  rep.ratios.resize(g);
  rep.logprob_grad.resize(g);
  double surrogate = 0.0;
  double kl = 0.0;
  std::size_t clipped = 0;
  std::size_t counted = 0;
  const double lo = 1.0 - cfg.clip_eps;
  const double hi = 1.0 + cfg.clip_eps;
  const bool use_kl = cfg.kl_coeff != 0.0;

  for (std::size_t i = 0; i < g; ++i) {
    const auto& traj = group.trajectories[i];
    rep.ratios[i].assign(traj.length(), 1.0);
    rep.logprob_grad[i].assign(traj.length(), 0.0);
    const std::size_t n_valid = traj.valid_count();
    if (n_valid == 0) continue;
    if (coeffs.values[i].size() != traj.length()) {
      throw std::invalid_argument("surrogate_loss: coefficient row length mismatch");
    }
    const double scale = 1.0 / (static_cast<double>(g) * static_cast<double>(n_valid));
    double traj_sum = 0.0;
    double traj_kl = 0.0;
    for (std::size_t t = 0; t < traj.length(); ++t) {
      const auto& tok = traj.tokens[t];
      if (!tok.valid) continue;
      const double rho = std::exp(tok.cur_logprob - tok.old_logprob);
      if (!std::isfinite(rho)) {
        throw std::domain_error("surrogate_loss: non-finite ratio at (" + std::to_string(i) + "," +
                                std::to_string(t) + ")");
      }
      const double a = coeffs.values[i][t];
      const double unclipped = rho * a;
      const double clipped_val = std::clamp(rho, lo, hi) * a;
      rep.ratios[i][t] = rho;
      ++counted;
      double grad = 0.0;
      if (clipped_val < unclipped) {
        ++clipped;
        traj_sum += clipped_val;
      } else {
        traj_sum += unclipped;
        grad = unclipped;
      }
      if (use_kl) {
        if (!tok.ref_logprob) throw std::invalid_argument("surrogate_loss: KL needs reference log-probs");
        const double log_r = *tok.ref_logprob - tok.cur_logprob;
        const double r = std::exp(log_r);
        traj_kl += r - 1.0 - log_r;
        grad -= cfg.kl_coeff * (1.0 - r);
      }
      rep.logprob_grad[i][t] = grad * scale;
    }
    surrogate += traj_sum * scale;
    kl += traj_kl * scale;
  }
  rep.surrogate = surrogate;
  rep.kl_term = cfg.kl_coeff * kl;
  rep.objective = rep.surrogate - rep.kl_term;
  rep.clipped_fraction = counted == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(counted);
  return rep;
}

double length_scaled_reward(double raw_reward, double length, double l0, double l_max,
                            double floor) {
  if (!(l0 < l_max)) throw std::invalid_argument("length_scaled_reward: need l0 < l_max");
  if (!(floor > 0.0 && floor <= 1.0)) throw std::invalid_argument("length_scaled_reward: floor must lie in (0, 1]");
  if (raw_reward <= 0.0 || length <= l0) return raw_reward;
  if (length >= l_max) return raw_reward * floor;
  const double scale = 1.0 - (1.0 - floor) * (length - l0) / (l_max - l0);
  return raw_reward * scale;
}

}  // namespace resrl
