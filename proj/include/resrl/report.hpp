// Aggregate run of the theory checks, serialised as one JSON document.

#ifndef RESRL_REPORT_HPP_
#define RESRL_REPORT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resrl/bench.hpp"
#include "resrl/theory.hpp"

namespace resrl {

struct TheoryReportOptions {
  std::size_t factorization_trials = 1000;
  std::size_t bound_trials = 10000;
  std::size_t proxy_tokens = 512;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  bool projector_fault = false;
  /// Timed rows; empty skips the benchmark.
  std::vector<BenchSize> bench_sizes;
  BenchOptions bench;
};

struct TheoryReport {
  FactorizationCheck factorization;
  FactorizationCheck scaled_bound;
  BoundCheck alignment;
  BoundCheck proxy;
  LldBridge lld;
  ProxyCorrelation correlation;
  std::vector<BenchRow> bench_table;
  std::optional<BenchSummary> bench_summary;

  std::size_t total_violations() const;
  std::string to_json() const;
};

TheoryReport run_theory_report(const TheoryReportOptions& opts);

}  // namespace resrl

#endif  // RESRL_REPORT_HPP_
