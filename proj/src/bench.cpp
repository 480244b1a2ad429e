#include "resrl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "resrl/gate.hpp"
#include "resrl/json_writer.hpp"
#include "resrl/random.hpp"
#include "resrl/subspace.hpp"
#include "resrl/theory.hpp"

namespace resrl {

namespace {

void check_size(const BenchSize& s) {
  if (s.positives < 1 || s.negatives < 1 || s.dim < 2 || s.rank < 1 || s.vocab_star < 0) {
    throw std::invalid_argument("bench: sizes need M, T >= 1, d >= 2, k >= 1, V* >= 0");
  }
}

Trajectory random_trajectory(int index, long length, long dim, Rng& rng) {
  Trajectory traj;
  traj.tokens.reserve(static_cast<std::size_t>(length));
  for (long t = 0; t < length; ++t) {
    TokenRecord tok;
    tok.traj = index;
    tok.position = static_cast<int>(t);
    tok.hidden.resize(dim);
    for (long j = 0; j < dim; ++j) tok.hidden(j) = rng.normal();
    traj.tokens.push_back(std::move(tok));
  }
  return traj;
}

using Clock = std::chrono::steady_clock;

// A timed unit of work. The inner count is calibrated so one sample spans at
// least min_sample_seconds and short paths are not dominated by jitter.
struct Job {
  std::string method;
  BenchSize size;
  std::function<void()> run;
  int inner = 1;
  std::vector<double> samples;
};

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void calibrate(Job& job, const BenchOptions& opts) {
  for (int i = 0; i < std::max(1, opts.warmup); ++i) {
    const auto start = Clock::now();
    job.run();
    const double once = std::max(elapsed(start), 1e-9);
    job.inner = std::max(1, static_cast<int>(std::ceil(opts.min_sample_seconds / once)));
  }
}

void sample(Job& job) {
  const auto start = Clock::now();
  for (int j = 0; j < job.inner; ++j) job.run();
  job.samples.push_back(elapsed(start) / job.inner);
}

// Keeps results observable so the optimiser cannot drop the work.
volatile double g_sink = 0.0;

std::function<void()> residual_path(const PromptGroup& group, const BenchSize& s, const BenchOptions& opts) {
  GatingConfig cfg;
  cfg.rank = static_cast<std::size_t>(s.rank);
  cfg.m_max = static_cast<std::size_t>(s.positives);
  SvdOptions svd;
  svd.method = SvdMethod::kSubspaceIteration;
  svd.seed = opts.seed;
  const SamplePlan plan{0, 0, opts.seed};
  return [&group, cfg, svd, plan] {
    const auto sub = build_subspace(group, {0}, cfg, plan, svd);
    const auto res = residual_energies(group, {1}, sub, cfg);
    const auto gate = gate_weights(res, cfg);
    g_sink = g_sink + gate.q_high;
  };
}

// Token-wise head-gradient interference restricted to V*: the positive
// gradients are aggregated into G+ = sum delta+ h+^T, then each negative
// scores delta-^T G+ h-. Both stages cost O(|V*| d) per token.
std::function<void()> vocab_path(const PromptGroup& group, const BenchSize& s, Rng& rng) {
  auto model = LinearHeadModel::random(s.vocab_star, s.dim, rng, 1.0 / std::sqrt(static_cast<double>(s.dim)));
  std::vector<Eigen::Index> targets;
  for (const auto& traj : group.trajectories) {
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
      targets.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(s.vocab_star))));
    }
  }
  return [&group, s, model = std::move(model), targets = std::move(targets)] {
    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(s.vocab_star, s.dim);
    std::size_t n = 0;
    for (const auto& tok : group.trajectories[0].tokens) {
      agg.noalias() += model.delta(tok.hidden, targets[n++]) * tok.hidden.transpose();
    }
    double total = 0.0;
    for (const auto& tok : group.trajectories[1].tokens) {
      const Eigen::VectorXd delta = model.delta(tok.hidden, targets[n++]);
      total += std::abs(delta.dot(agg * tok.hidden));
    }
    g_sink = g_sink + total;
  };
}

bool same_except(const BenchSize& a, const BenchSize& b, int skip) {
  const long av[4] = {a.positives, a.negatives, a.dim, a.rank};
  const long bv[4] = {b.positives, b.negatives, b.dim, b.rank};
  for (int i = 0; i < 4; ++i) {
    if (i != skip && av[i] != bv[i]) return false;
  }
  return av[skip] * 2 == bv[skip];
}

std::string csv_size(const BenchSize& s) {
  std::ostringstream os;
  os << s.positives << ',' << s.negatives << ',' << s.dim << ',' << s.rank << ',' << s.vocab_star;
  return os.str();
}

}  // namespace

std::vector<BenchRow> bench_overhead(const std::vector<BenchSize>& sizes, const BenchOptions& opts) {
  // Groups must outlive the jobs that reference them.
  std::deque<PromptGroup> groups;
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const BenchSize& s = sizes[i];
    check_size(s);
    Rng rng(mix_seed(opts.seed, i));
    PromptGroup& group = groups.emplace_back();
    group.prompt_id = "bench";
    group.trajectories.push_back(random_trajectory(0, s.positives, s.dim, rng));
    group.trajectories.push_back(random_trajectory(1, s.negatives, s.dim, rng));
    group.trajectories[0].reward = 1.0;
    group.advantages = {1.0, -1.0};
    jobs.push_back({"resrl", s, residual_path(group, s, opts), 1, {}});
    if (s.vocab_star > 0) jobs.push_back({"lld", s, vocab_path(group, s, rng), 1, {}});
  }
  for (auto& job : jobs) calibrate(job, opts);
  // Round-robin so slow drift in machine load hits every row alike.
  for (int r = 0; r < std::max(1, opts.repeats); ++r) {
    for (auto& job : jobs) sample(job);
  }
  std::vector<BenchRow> rows;
  for (auto& job : jobs) {
    std::sort(job.samples.begin(), job.samples.end());
    rows.push_back({job.method, job.size, job.samples[job.samples.size() / 2]});
  }
  return rows;
}

std::vector<BenchSize> default_bench_grid() {
  return {
      {2048, 128, 128, 16, 0},    {4096, 128, 128, 16, 0},    // M
      {64, 8192, 128, 16, 0},     {64, 16384, 128, 16, 0},    // T-
      {1024, 1024, 128, 16, 128}, {1024, 1024, 256, 16, 0},   // d, V*/k = 8
      {1024, 1024, 128, 32, 0},                               // k
      {1024, 1024, 128, 16, 512}, {1024, 1024, 128, 16, 2048},  // V*/k = 32, 128
  };
}

std::vector<BenchSize> parse_bench_sizes(const std::string& spec) {
  std::vector<BenchSize> out;
  std::stringstream all(spec);
  std::string item;
  while (std::getline(all, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream fields(item);
    std::string f;
    std::vector<long> v;
    while (std::getline(fields, f, ',')) {
      std::size_t used = 0;
      long value = 0;
      try {
        value = std::stol(f, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("bench sizes: not an integer: '" + f + "'");
      }
      if (f.find_first_not_of(" \t", used) != std::string::npos) {
        throw std::invalid_argument("bench sizes: not an integer: '" + f + "'");
      }
      v.push_back(value);
    }
    if (v.size() != 4 && v.size() != 5) {
      throw std::invalid_argument("bench sizes: expected M,T,d,k[,V] in '" + item + "'");
    }
    BenchSize s{v[0], v[1], v[2], v[3], v.size() == 5 ? v[4] : 0};
    check_size(s);
    out.push_back(s);
  }
  return out;
}

BenchSummary summarize_bench(const std::vector<BenchRow>& rows) {
  static const char* const kNames[4] = {"M", "T", "d", "k"};
  std::vector<const BenchRow*> residual;
  for (const auto& r : rows) {
    if (r.method != "resrl") continue;
    const bool seen = std::any_of(residual.begin(), residual.end(), [&](const BenchRow* p) {
      return p->size.positives == r.size.positives && p->size.negatives == r.size.negatives &&
             p->size.dim == r.size.dim && p->size.rank == r.size.rank;
    });
    if (!seen) residual.push_back(&r);
  }
  BenchSummary out;
  for (int v = 0; v < 4; ++v) {
    for (const auto* a : residual) {
      for (const auto* b : residual) {
        if (same_except(a->size, b->size, v)) {
          out.doublings.push_back({kNames[v], a->size, b->size, b->seconds / a->seconds});
        }
      }
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].method != "lld") continue;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto& r = rows[j];
      if (r.method == "resrl" && r.size.positives == rows[i].size.positives &&
          r.size.negatives == rows[i].size.negatives && r.size.dim == rows[i].size.dim &&
          r.size.rank == rows[i].size.rank && r.size.vocab_star == rows[i].size.vocab_star) {
        out.vocab.push_back({rows[i].size, static_cast<double>(r.size.vocab_star) / static_cast<double>(r.size.rank),
                             rows[i].seconds / r.seconds});
        break;
      }
    }
  }
  std::sort(out.vocab.begin(), out.vocab.end(),
            [](const VocabRatio& a, const VocabRatio& b) { return a.vocab_per_rank < b.vocab_per_rank; });
  if (out.vocab.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& v : out.vocab) {
      x.push_back(std::log(v.vocab_per_rank));
      y.push_back(std::log(v.ratio));
    }
    try {
      out.vocab_slope = fit_slope(x, y);
    } catch (const std::invalid_argument&) {
      // all points share one |V*|/k
    }
  }
  return out;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, const BenchSummary& summary) {
  out << "method,M,T_neg,d,k,vocab_star,wall_time\n";
  for (const auto& r : rows) out << r.method << ',' << csv_size(r.size) << ',' << format_real(r.seconds) << '\n';
  if (summary.doublings.empty() && summary.vocab.empty()) return;
  out << "\nfit,variable,from,to,value\n";
  for (const auto& f : summary.doublings) {
    out << "doubling_ratio," << f.variable << ",\"" << csv_size(f.from) << "\",\"" << csv_size(f.to) << "\","
        << format_real(f.ratio) << '\n';
  }
  for (const auto& v : summary.vocab) {
    out << "vocab_ratio,V*/k=" << format_real(v.vocab_per_rank) << ",\"" << csv_size(v.size) << "\",,"
        << format_real(v.ratio) << '\n';
  }
  if (summary.vocab_slope) out << "vocab_loglog_slope,V*/k,,," << format_real(*summary.vocab_slope) << '\n';
}

}  // namespace resrl
