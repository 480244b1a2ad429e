#include "resrl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace resrl {

namespace {

Eigen::VectorXd normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Eigen::Index uniform_index(Eigen::Index lo, Eigen::Index hi, Rng& rng) {
  return lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

// Unit vector in the complement of S; requires rank < d.
Eigen::VectorXd complement_direction(const OrthonormalBasis<double>& s, Rng& rng) {
  for (;;) {
    Eigen::VectorXd v = normal_vector(s.ambient_dim(), rng);
    v -= s.project(v);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

LinearHeadModel::LinearHeadModel(Eigen::MatrixXd w) : head(std::move(w)) {
  if (head.rows() < 2 || head.cols() < 2) {
    throw std::invalid_argument("LinearHeadModel: need |V| >= 2 and d >= 2");
  }
  require_finite(head, "LinearHeadModel");
}

LinearHeadModel LinearHeadModel::random(Eigen::Index vocab, Eigen::Index dim, Rng& rng, double scale) {
  Eigen::MatrixXd w(vocab, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    for (Eigen::Index i = 0; i < vocab; ++i) w(i, j) = scale * rng.normal();
  }
  return LinearHeadModel(std::move(w));
}

double LinearHeadModel::log_prob(const Eigen::VectorXd& x, Eigen::Index target) const {
  const Eigen::VectorXd z = head * x;
  const double m = z.maxCoeff();
  return z(target) - m - std::log((z.array() - m).exp().sum());
}

Eigen::VectorXd LinearHeadModel::delta(const Eigen::VectorXd& x, Eigen::Index target) const {
  const Eigen::VectorXd z = head * x;
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  p /= p.sum();
  p(target) -= 1.0;
  return p;
}

Eigen::MatrixXd LinearHeadModel::head_gradient(const Eigen::VectorXd& x, Eigen::Index target) const {
  return delta(x, target) * x.transpose();
}

FactorizationCheck check_gradient_factorization(std::size_t trials, Eigen::Index max_vocab,
                                                Eigen::Index max_dim, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("check_gradient_factorization: trials >= 1");
  Rng rng(seed);
  FactorizationCheck out;
  out.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index v = uniform_index(2, max_vocab, rng);
    const Eigen::Index d = uniform_index(2, max_dim, rng);
    const auto model = LinearHeadModel::random(v, d, rng);
    const Eigen::VectorXd x1 = normal_vector(d, rng);
    const Eigen::VectorXd x2 = normal_vector(d, rng);
    const Eigen::VectorXd d1 = model.delta(x1, uniform_index(0, v - 1, rng));
    const Eigen::VectorXd d2 = model.delta(x2, uniform_index(0, v - 1, rng));
    const double lhs = frobenius(d1 * x1.transpose(), d2 * x2.transpose());
    const double rhs = d1.dot(d2) * x1.dot(x2);
    const double scale = d1.norm() * d2.norm() * x1.norm() * x2.norm();
    const double err = scale > 0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
    out.max_rel_err = std::max(out.max_rel_err, err);
    if (err > 1e-10) ++out.violations;
  }
  return out;
}

FactorizationCheck check_scaled_bound(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("check_scaled_bound: trials >= 1");
  Rng rng(seed);
  FactorizationCheck out;
  out.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const Eigen::Index v = uniform_index(2, 128, rng);
    const Eigen::Index d = uniform_index(2, 64, rng);
    const auto model = LinearHeadModel::random(v, d, rng);
    const Eigen::VectorXd x1 = normal_vector(d, rng);
    const Eigen::VectorXd x2 = normal_vector(d, rng);
    const Eigen::Index y1 = uniform_index(0, v - 1, rng);
    const Eigen::Index y2 = uniform_index(0, v - 1, rng);
    const double a1 = rng.below(10) == 0 ? 0.0 : 3.0 * rng.normal();
    const double a2 = 3.0 * rng.normal();
    const double lhs = std::abs(frobenius(a1 * model.head_gradient(x1, y1), a2 * model.head_gradient(x2, y2)));
    const Eigen::VectorXd d1 = model.delta(x1, y1);
    const Eigen::VectorXd d2 = model.delta(x2, y2);
    const double rhs = std::abs(a1 * a2) * std::abs(d1.dot(d2)) * std::abs(x1.dot(x2));
    const double scale = std::abs(a1 * a2) * d1.norm() * d2.norm() * x1.norm() * x2.norm();
    const double err = scale > 0 ? std::abs(lhs - rhs) / scale : std::abs(lhs - rhs);
    out.max_rel_err = std::max(out.max_rel_err, err);
    if (err > 1e-10) ++out.violations;
  }
  return out;
}

double complement_energy(const Eigen::VectorXd& x, const OrthonormalBasis<double>& s,
                         bool projector_fault) {
  if (!projector_fault) return residual_energy(x, s);
  const Eigen::VectorXd r = x - 0.5 * s.project(x);
  return r.squaredNorm() / static_cast<double>(x.size());
}

OrthonormalBasis<double> random_subspace(Eigen::Index d, Eigen::Index k, Rng& rng) {
  if (k < 1 || k > d) throw std::invalid_argument("random_subspace: need 1 <= k <= d");
  Eigen::MatrixXd g(d, k);
  for (Eigen::Index j = 0; j < k; ++j) g.col(j) = normal_vector(d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return OrthonormalBasis<double>(Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(d, k)));
}

namespace {

struct TrialShape {
  Eigen::Index d;
  Eigen::Index k;
};

TrialShape draw_shape(const BoundCheckOptions& opts, Rng& rng) {
  const Eigen::Index d = opts.dim > 0 ? opts.dim : uniform_index(2, 64, rng);
  const Eigen::Index k = opts.rank > 0 ? opts.rank : uniform_index(1, d - 1, rng);
  if (d < 2 || k < 1 || k >= d) throw std::invalid_argument("bound check: need 1 <= k < d");
  return {d, k};
}

}  // namespace

BoundCheck check_alignment_bound(const BoundCheckOptions& opts) {
  Rng rng(opts.seed);
  BoundCheck out;
  out.trials = opts.trials;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const auto [d, k] = draw_shape(opts, rng);
    const auto s = random_subspace(d, k, rng);
    const Eigen::VectorXd xp = s.columns() * normal_vector(k, rng);
    // Half the trials put most of x inside S, where the bound is tight.
    Eigen::VectorXd x = normal_vector(d, rng);
    if (t % 2 == 0) x = s.project(x) + 0.05 * (x - s.project(x));
    const double lhs = std::pow(x.dot(xp), 2);
    const double dd = static_cast<double>(d);
    const double rhs = xp.squaredNorm() * (x.squaredNorm() - dd * complement_energy(x, s, opts.projector_fault));
    if (lhs > rhs + 1e-9) ++out.violations;
  }
  return out;
}

BoundCheck check_proxy_theorem(const BoundCheckOptions& opts) {
  Rng rng(opts.seed);
  BoundCheck out;
  out.trials = opts.trials;
  constexpr int kSweepSteps = 16;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    const auto [d, k] = draw_shape(opts, rng);
    const auto s = random_subspace(d, k, rng);
    const double dd = static_cast<double>(d);
    Eigen::VectorXd xp = normal_vector(d, rng);
    Eigen::VectorXd xn = normal_vector(d, rng);
    // Vary how much of each vector lies outside S.
    xp = s.project(xp) + rng.uniform() * (xp - s.project(xp));
    xn = s.project(xn) + rng.uniform() * (xn - s.project(xn));
    const double pxp = s.project(xp).norm();
    auto subspace_term = [&](const Eigen::VectorXd& x) {
      return pxp * std::sqrt(std::max(0.0, x.squaredNorm() - dd * complement_energy(x, s, opts.projector_fault)));
    };
    const double lhs = std::abs(xn.dot(xp));
    const double rhs = subspace_term(xn) +
                       xn.norm() * std::sqrt(dd * complement_energy(xp, s, opts.projector_fault));
    if (lhs > rhs + 1e-9) ++out.violations;

    const Eigen::VectorXd in_s = s.columns() * normal_vector(k, rng).normalized();
    const Eigen::VectorXd off_s = complement_direction(s, rng);
    const double norm = xn.norm();
    double prev_term = INFINITY;
    double prev_energy = -INFINITY;
    bool ok = true;
    for (int step = 0; step <= kSweepSteps; ++step) {
      const double theta = 0.5 * M_PI * step / kSweepSteps;
      const Eigen::VectorXd x = norm * (std::cos(theta) * in_s + std::sin(theta) * off_s);
      const double e = complement_energy(x, s, opts.projector_fault);
      const double term = subspace_term(x);
      if (e < prev_energy - 1e-12 || term > prev_term + 1e-12 * (1.0 + pxp * norm)) ok = false;
      prev_term = term;
      prev_energy = e;
    }
    ++out.sweeps;
    if (!ok) ++out.monotonicity_violations;
  }
  return out;
}

LldFixture LldFixture::random(Eigen::Index vocab, Eigen::Index dim, std::size_t negatives, Rng& rng) {
  LldFixture f{LinearHeadModel::random(vocab, dim, rng, 1.0 / std::sqrt(static_cast<double>(dim))), {}, {}};
  f.positive.x = normal_vector(dim, rng);
  f.positive.target = uniform_index(0, vocab - 1, rng);
  f.positive.advantage = 1.0;
  for (std::size_t j = 0; j < negatives; ++j) {
    HeadToken n;
    n.x = f.positive.x + normal_vector(dim, rng);
    n.target = uniform_index(0, vocab - 1, rng);
    n.advantage = -(0.5 + rng.uniform());
    f.negatives.push_back(std::move(n));
  }
  return f;
}

LldFixture LldFixture::aligned(Eigen::Index vocab, Eigen::Index dim, Rng& rng) {
  LldFixture f = random(vocab, dim, 0, rng);
  HeadToken n = f.positive;
  n.advantage = -1.0;
  f.negatives.push_back(std::move(n));
  return f;
}

LldFixture LldFixture::orthogonal(Eigen::Index vocab, Eigen::Index dim, std::size_t negatives, Rng& rng) {
  LldFixture f = random(vocab, dim, negatives, rng);
  const Eigen::VectorXd u = f.positive.x.normalized();
  for (auto& n : f.negatives) n.x -= u * u.dot(n.x);
  return f;
}

LldBridge check_lld_bridge(const LldFixture& fixture, const std::vector<double>& etas) {
  if (fixture.negatives.empty()) throw std::invalid_argument("check_lld_bridge: no negative tokens");
  if (etas.size() < 2) throw std::invalid_argument("check_lld_bridge: need at least two step sizes");
  const auto& model = fixture.model;
  const auto& pos = fixture.positive;
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(model.vocab(), model.dim());
  for (const auto& n : fixture.negatives) update -= n.advantage * model.head_gradient(n.x, n.target);
  const double first_order = -frobenius(model.head_gradient(pos.x, pos.target), update);
  const double base = model.log_prob(pos.x, pos.target);

  LldBridge out;
  out.etas = etas;
  std::vector<double> log_eta;
  std::vector<double> log_err;
  for (double eta : etas) {
    if (!(eta > 0)) throw std::invalid_argument("check_lld_bridge: step sizes must be positive");
    const LinearHeadModel moved(model.head + eta * update);
    const double actual = moved.log_prob(pos.x, pos.target) - base;
    const double predicted = eta * first_order;
    out.actual.push_back(actual);
    out.predicted.push_back(predicted);
    out.abs_error.push_back(std::abs(actual - predicted));
    if (out.abs_error.back() > 0) {
      log_eta.push_back(std::log(eta));
      log_err.push_back(std::log(out.abs_error.back()));
    }
  }
  if (log_err.size() < 2) {
    throw std::invalid_argument("check_lld_bridge: degenerate fixture, update leaves the target unchanged");
  }
  out.slope = fit_slope(log_eta, log_err);
  return out;
}

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: need >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0) throw std::invalid_argument("fit_slope: constant abscissa");
  return sxy / sxx;
}

ProxyCorrelation proxy_interference_correlation(const LinearHeadModel& model,
                                                const std::vector<HeadToken>& positives,
                                                const std::vector<HeadToken>& negatives,
                                                const OrthonormalBasis<double>& s,
                                                std::size_t bootstrap, std::uint64_t seed) {
  if (positives.empty()) throw std::invalid_argument("proxy_interference_correlation: no positives");
  std::vector<Eigen::MatrixXd> pos_grads;
  for (const auto& p : positives) pos_grads.push_back(model.head_gradient(p.x, p.target));

  ProxyCorrelation out;
  out.tokens = negatives.size();
  for (const auto& n : negatives) {
    const Eigen::MatrixXd g = model.head_gradient(n.x, n.target);
    double total = 0.0;
    for (const auto& gp : pos_grads) total += std::abs(frobenius(g, gp));
    out.energies.push_back(complement_energy(n.x, s));
    out.interference.push_back(total / static_cast<double>(pos_grads.size()));
  }
  out.spearman = spearman(out.energies, out.interference);
  if (!out.spearman || bootstrap == 0) return out;

  Rng rng(seed);
  std::vector<double> stats;
  std::vector<double> a(negatives.size());
  std::vector<double> b(negatives.size());
  for (std::size_t r = 0; r < bootstrap; ++r) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto j = static_cast<std::size_t>(rng.below(a.size()));
      a[i] = out.energies[j];
      b[i] = out.interference[j];
    }
    if (const auto rho = spearman(a, b)) stats.push_back(*rho);
  }
  if (!stats.empty()) {
    out.ci_low = empirical_quantile(stats, 0.025);
    out.ci_high = empirical_quantile(stats, 0.975);
  }
  return out;
}

}  // namespace resrl
