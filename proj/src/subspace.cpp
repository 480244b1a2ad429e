#include "resrl/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "resrl/random.hpp"

namespace resrl {

SamplePlan SamplePlan::for_group(std::size_t m_max, double boundary_fraction,
                                 std::string_view prompt_id, std::uint64_t step) {
  const auto keep = static_cast<std::size_t>(
      std::floor(boundary_fraction * static_cast<double>(m_max)));
  SamplePlan plan;
  plan.head_keep = keep;
  plan.tail_keep = keep;
  plan.seed = mix_seed(fnv1a(prompt_id), step);
  return plan;
}

std::vector<TokenIndex> boundary_aware_sample(const std::vector<TokenIndex>& tokens,
                                              std::size_t m_max, const SamplePlan& plan) {
  if (m_max < 1) throw std::invalid_argument("boundary_aware_sample: m_max must be >= 1");
  if (tokens.size() <= m_max) return tokens;

  // Input slots per trajectory, in input order.
  std::map<int, std::vector<std::size_t>> by_traj;
  for (std::size_t s = 0; s < tokens.size(); ++s) by_traj[tokens[s].traj].push_back(s);

  std::size_t head = plan.head_keep;
  std::size_t tail = plan.tail_keep;
  auto reserved_count = [&](std::size_t h, std::size_t t) {
    std::size_t n = 0;
    for (const auto& [traj, slots] : by_traj) n += std::min(slots.size(), h + t);
    return n;
  };
  while (reserved_count(head, tail) > m_max) {
    if (head >= tail && head > 0) {
      --head;
    } else {
      --tail;
    }
  }

  std::vector<char> keep(tokens.size(), 0);
  std::vector<std::size_t> middle;
  for (const auto& [traj, slots] : by_traj) {
    const std::size_t n = slots.size();
    for (std::size_t j = 0; j < n; ++j) {
      if (j < head || j + tail >= n) {
        keep[slots[j]] = 1;
      } else {
        middle.push_back(slots[j]);
      }
    }
  }
  std::sort(middle.begin(), middle.end());
  const std::size_t remaining = m_max - reserved_count(head, tail);

  // Partial Fisher-Yates over the middle slots.
  Rng rng(plan.seed);
  for (std::size_t j = 0; j < remaining; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(rng.below(middle.size() - j));
    std::swap(middle[j], middle[pick]);
    keep[middle[j]] = 1;
  }

  std::vector<TokenIndex> out;
  out.reserve(m_max);
  for (std::size_t s = 0; s < tokens.size(); ++s) {
    if (keep[s]) out.push_back(tokens[s]);
  }
  return out;
}

Eigen::VectorXd center_representation(const Eigen::VectorXd& hidden,
                                      const Eigen::VectorXd& centroid,
                                      const GatingConfig& cfg) {
  if (hidden.size() != centroid.size()) {
    throw std::invalid_argument("center_representation: hidden dim mismatch");
  }
  if (cfg.layernorm_enabled) return layer_norm(hidden, cfg.layernorm_eps) - centroid;
  return hidden - centroid;
}

std::vector<TokenIndex> valid_tokens(const PromptGroup& group, const std::vector<int>& trajs) {
  std::vector<TokenIndex> out;
  for (int i : trajs) {
    const auto& traj = group.trajectories.at(static_cast<std::size_t>(i));
    for (const auto& tok : traj.tokens) {
      if (tok.valid) out.push_back({tok.traj, tok.position});
    }
  }
  return out;
}

PositiveSubspace build_subspace(const PromptGroup& group, const std::vector<int>& positives,
                                const GatingConfig& cfg, const SamplePlan& plan,
                                const SvdOptions& svd) {
  if (positives.empty()) throw std::invalid_argument("build_subspace: no positive trajectories");
  const std::vector<TokenIndex> candidates = valid_tokens(group, positives);
  if (candidates.empty()) throw std::invalid_argument("build_subspace: no valid positive tokens");
  const std::vector<TokenIndex> sample = boundary_aware_sample(candidates, cfg.m_max, plan);

  const Eigen::Index d = group.hidden_dim();
  const auto m = static_cast<Eigen::Index>(sample.size());
  Eigen::MatrixXd x(m, d);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& idx = sample[static_cast<std::size_t>(r)];
    const Eigen::VectorXd& h =
        group.trajectories[static_cast<std::size_t>(idx.traj)].tokens[static_cast<std::size_t>(idx.pos)].hidden;
    if (h.size() != d) throw std::invalid_argument("build_subspace: hidden dim mismatch");
    if (cfg.layernorm_enabled) {
      x.row(r) = layer_norm(h, cfg.layernorm_eps).transpose();
    } else {
      x.row(r) = h.transpose();
    }
  }
  const double raw_scale = x.norm();

  PositiveSubspace sub;
  sub.centroid = x.colwise().mean().transpose();
  x.rowwise() -= sub.centroid.transpose();
  // Identical rows leave only round-off after centring; that is rank zero.
  if (x.norm() <= 1e-12 * raw_scale) x.setZero();
  sub.sample_count = sample.size();
  sub.requested_rank = cfg.rank;

  SvdOptions opts = svd;
  opts.tol = cfg.svd_tol;
  auto result = truncated_svd(x, static_cast<Eigen::Index>(cfg.rank), opts);
  sub.basis = std::move(result.basis);
  sub.singular_values = std::move(result.singular_values);
  sub.degenerate = sub.basis.empty();

  const Eigen::MatrixXd& v = sub.basis.columns();
  const double tail = sub.degenerate ? x.squaredNorm()
                                     : (x - (x * v) * v.transpose()).squaredNorm();
  sub.positive_tail_energy = tail / (static_cast<double>(m) * static_cast<double>(d));
  return sub;
}

}  // namespace resrl
