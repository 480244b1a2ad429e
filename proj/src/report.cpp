#include "resrl/report.hpp"

#include <vector>

#include "resrl/json_writer.hpp"
#include "resrl/random.hpp"

namespace resrl {

namespace {

std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string("null");
}

std::string size_json(const BenchSize& s) {
  JsonObject o;
  o.add("M", static_cast<std::int64_t>(s.positives))
      .add("T_neg", static_cast<std::int64_t>(s.negatives))
      .add("d", static_cast<std::int64_t>(s.dim))
      .add("k", static_cast<std::int64_t>(s.rank))
      .add("vocab_star", static_cast<std::int64_t>(s.vocab_star));
  return o.str();
}

// Positives inside a rank-k subspace; negatives mix an in-subspace and an
// orthogonal Gaussian component with a uniform share.
void mixed_fixture(std::size_t tokens, Rng& rng, LinearHeadModel& model, OrthonormalBasis<double>& s,
                   std::vector<HeadToken>& positives, std::vector<HeadToken>& negatives) {
  const Eigen::Index d = 24, k = 4, v = 16;
  model = LinearHeadModel::random(v, d, rng, 0.3);
  s = random_subspace(d, k, rng);
  auto gaussian = [&](Eigen::Index n) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
    return x;
  };
  for (int i = 0; i < 16; ++i) {
    positives.push_back({s.columns() * gaussian(k), static_cast<Eigen::Index>(rng.below(v)), 1.0});
  }
  for (std::size_t i = 0; i < tokens; ++i) {
    const Eigen::VectorXd g = gaussian(d);
    const Eigen::VectorXd in = s.project(g);
    const double share = rng.uniform();
    const Eigen::VectorXd x = share * in + (1.0 - share) * (g - in);
    negatives.push_back({x, static_cast<Eigen::Index>(rng.below(v)), -1.0});
  }
}

}  // namespace

std::size_t TheoryReport::total_violations() const {
  return factorization.violations + scaled_bound.violations + alignment.violations +
         alignment.monotonicity_violations + proxy.violations + proxy.monotonicity_violations;
}

std::string TheoryReport::to_json() const {
  JsonObject o;
  o.add("schema", 1)
      .add("factorization_trials", factorization.trials)
      .add("lemma1_max_rel_err", factorization.max_rel_err)
      .add("factorization_violations", factorization.violations)
      .add("scaled_bound_trials", scaled_bound.trials)
      .add("scaled_bound_max_rel_err", scaled_bound.max_rel_err)
      .add("scaled_bound_violations", scaled_bound.violations)
      .add("alignment_trials", alignment.trials)
      .add("alignment_violations", alignment.violations)
      .add("proxy_trials", proxy.trials)
      .add("proxy_violations", proxy.violations)
      .add("proxy_monotonicity_sweeps", proxy.sweeps)
      .add("proxy_monotonicity_violations", proxy.monotonicity_violations)
      .add("lld_bridge_order", lld.slope)
      .add_array("lld_etas", lld.etas)
      .add_array("lld_abs_error", lld.abs_error)
      .add("proxy_correlation_tokens", correlation.tokens)
      .add_raw("proxy_correlation", optional_real(correlation.spearman))
      .add_raw("proxy_correlation_ci_low", optional_real(correlation.ci_low))
      .add_raw("proxy_correlation_ci_high", optional_real(correlation.ci_high));
  std::string rows = "[";
  for (std::size_t i = 0; i < bench_table.size(); ++i) {
    const auto& r = bench_table[i];
    JsonObject row;
    row.add("method", r.method)
        .add("M", static_cast<std::int64_t>(r.size.positives))
        .add("T_neg", static_cast<std::int64_t>(r.size.negatives))
        .add("d", static_cast<std::int64_t>(r.size.dim))
        .add("k", static_cast<std::int64_t>(r.size.rank))
        .add("vocab_star", static_cast<std::int64_t>(r.size.vocab_star))
        .add("wall_time", r.seconds);
    rows += (i ? "," : "") + row.str();
  }
  o.add_raw("bench_table", rows + "]");
  if (bench_summary) {
    std::string fits = "[";
    for (std::size_t i = 0; i < bench_summary->doublings.size(); ++i) {
      const auto& f = bench_summary->doublings[i];
      JsonObject fit;
      fit.add("variable", f.variable).add_raw("from", size_json(f.from)).add_raw("to", size_json(f.to)).add("ratio", f.ratio);
      fits += (i ? "," : "") + fit.str();
    }
    std::string vocab = "[";
    for (std::size_t i = 0; i < bench_summary->vocab.size(); ++i) {
      const auto& v = bench_summary->vocab[i];
      JsonObject row;
      row.add_raw("size", size_json(v.size)).add("vocab_per_rank", v.vocab_per_rank).add("ratio", v.ratio);
      vocab += (i ? "," : "") + row.str();
    }
    o.add_raw("bench_doublings", fits + "]")
        .add_raw("bench_vocab_ratios", vocab + "]")
        .add_raw("bench_vocab_slope", optional_real(bench_summary->vocab_slope));
  }
  o.add("total_violations", total_violations());
  return o.str();
}

TheoryReport run_theory_report(const TheoryReportOptions& opts) {
  TheoryReport r;
  r.factorization = check_gradient_factorization(opts.factorization_trials, 128, 64, mix_seed(opts.seed, 1));
  r.scaled_bound = check_scaled_bound(opts.factorization_trials, mix_seed(opts.seed, 2));
  BoundCheckOptions b;
  b.trials = opts.bound_trials;
  b.projector_fault = opts.projector_fault;
  b.seed = mix_seed(opts.seed, 3);
  r.alignment = check_alignment_bound(b);
  b.seed = mix_seed(opts.seed, 4);
  r.proxy = check_proxy_theorem(b);

  Rng rng(mix_seed(opts.seed, 5));
  r.lld = check_lld_bridge(LldFixture::random(16, 12, 4, rng), {1e-2, 1e-3, 1e-4});

  LinearHeadModel model(Eigen::MatrixXd::Zero(2, 2));
  OrthonormalBasis<double> s(2);
  std::vector<HeadToken> positives, negatives;
  Rng fixture_rng(mix_seed(opts.seed, 6));
  mixed_fixture(opts.proxy_tokens, fixture_rng, model, s, positives, negatives);
  r.correlation = proxy_interference_correlation(model, positives, negatives, s, opts.bootstrap, mix_seed(opts.seed, 7));

  if (!opts.bench_sizes.empty()) {
    BenchOptions bo = opts.bench;
    bo.seed = mix_seed(opts.seed, 8);
    r.bench_table = bench_overhead(opts.bench_sizes, bo);
    r.bench_summary = summarize_bench(r.bench_table);
  }
  return r;
}

}  // namespace resrl
