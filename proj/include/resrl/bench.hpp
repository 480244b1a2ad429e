// Wall-clock comparison of the residual gating path against a
// restricted-vocabulary head-gradient accumulation.

#ifndef RESRL_BENCH_HPP_
#define RESRL_BENCH_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace resrl {

struct BenchSize {
  long positives = 0;  // M
  long negatives = 0;  // T-
  long dim = 0;        // d
  long rank = 0;       // k
  long vocab_star = 0; // |V*_x|; 0 skips the vocabulary path
};

struct BenchRow {
  std::string method;  // "resrl" or "lld"
  BenchSize size;
  double seconds = 0.0;
};

struct BenchOptions {
  int repeats = 5;
  int warmup = 1;
  /// Lower bound on the duration of one timed sample.
  double min_sample_seconds = 0.02;
  std::uint64_t seed = 0;
};

/// Times each size: the residual path always, the vocabulary path when
/// vocab_star > 0. Reported time is the per-call median over repeats after
/// warmup.
std::vector<BenchRow> bench_overhead(const std::vector<BenchSize>& sizes, const BenchOptions& opts = {});

/// Grid with one doubling per variable plus |V*|/k in {8, 32, 128}.
std::vector<BenchSize> default_bench_grid();

/// Parses "M,T,d,k,V;M,T,d,k,V;...".
std::vector<BenchSize> parse_bench_sizes(const std::string& spec);

struct ScalingFit {
  std::string variable;  // "M", "T", "d", "k"
  BenchSize from;
  BenchSize to;
  double ratio = 0.0;  // time(to) / time(from) for a doubling
};

struct VocabRatio {
  BenchSize size;
  double vocab_per_rank = 0.0;
  double ratio = 0.0;  // lld time / resrl time
};

struct BenchSummary {
  std::vector<ScalingFit> doublings;
  std::vector<VocabRatio> vocab;
  /// Log-log slope of the vocab ratio against |V*|/k; empty below two points.
  std::optional<double> vocab_slope;
};

/// Pairs residual-path rows that differ by exactly a doubling of one
/// variable, and collects the vocabulary-path ratios.
BenchSummary summarize_bench(const std::vector<BenchRow>& rows);

/// CSV table followed by a blank line and the fitted summary.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, const BenchSummary& summary);

}  // namespace resrl

#endif  // RESRL_BENCH_HPP_
