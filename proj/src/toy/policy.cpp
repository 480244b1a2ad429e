#include "resrl/toy/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace resrl::toy {

namespace {

enum : std::size_t { kEmbed, kWx, kWr, kBr, kU, kBu, kW, kC };

}  // namespace

HiddenLayer parse_hidden_layer(const std::string& s) {
  if (s == "penultimate") return HiddenLayer::kPenultimate;
  if (s == "final") return HiddenLayer::kFinal;
  throw std::invalid_argument("hidden layer must be 'penultimate' or 'final', got '" + s + "'");
}

std::string to_string(HiddenLayer layer) {
  return layer == HiddenLayer::kPenultimate ? "penultimate" : "final";
}

TinyPolicy::TinyPolicy(const PolicyShape& shape) : shape_(shape) {
  if (shape.vocab < 2 || shape.embed < 1 || shape.recurrent < 2 || shape.hidden < 2) {
    throw std::invalid_argument("TinyPolicy: degenerate shape");
  }
  const Eigen::Index v = shape.vocab, e = shape.embed, r = shape.recurrent, h = shape.hidden;
  // Embeddings are stored one column per token.
  const std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> spec = {
      {"embed", e, v}, {"w_in", r, e}, {"w_rec", r, r}, {"b_rec", r, 1},
      {"w_hidden", h, r}, {"b_hidden", h, 1}, {"w_head", v, h}, {"b_head", v, 1},
  };
  Eigen::Index offset = 0;
  for (const auto& [name, rows, cols] : spec) {
    layout_.push_back({name, rows, cols, offset});
    offset += rows * cols;
  }
  if (offset > 100000) throw std::invalid_argument("TinyPolicy: more than 1e5 parameters");
  params_ = Eigen::VectorXd::Zero(offset);
}

TinyPolicy TinyPolicy::random(const PolicyShape& shape, Rng& rng) {
  TinyPolicy p(shape);
  auto fill = [&](std::size_t i, double scale) {
    const Tensor& t = p.layout_[i];
    for (Eigen::Index k = 0; k < t.rows * t.cols; ++k) p.params_(t.offset + k) = scale * rng.normal();
  };
  fill(kEmbed, 1.0);
  fill(kWx, 1.0 / std::sqrt(static_cast<double>(shape.embed)));
  fill(kWr, 0.5 / std::sqrt(static_cast<double>(shape.recurrent)));
  fill(kU, 1.0 / std::sqrt(static_cast<double>(shape.recurrent)));
  fill(kW, 1.0 / std::sqrt(static_cast<double>(shape.hidden)));
  return p;
}

TinyPolicy::ConstMap TinyPolicy::view(std::size_t i) const {
  const Tensor& t = layout_[i];
  return ConstMap(params_.data() + t.offset, t.rows, t.cols);
}

TinyPolicy::Map TinyPolicy::grad_view(Eigen::VectorXd& grad, std::size_t i) const {
  const Tensor& t = layout_[i];
  return Map(grad.data() + t.offset, t.rows, t.cols);
}

void TinyPolicy::step(int token, const Eigen::VectorXd& r_prev, Eigen::VectorXd& r, Eigen::VectorXd& f,
                      Eigen::VectorXd& logits) const {
  if (token < 0 || token >= shape_.vocab) throw std::out_of_range("TinyPolicy: token id");
  r = (view(kWx) * view(kEmbed).col(token) + view(kWr) * r_prev + view(kBr)).array().tanh();
  f = (view(kU) * r + view(kBu)).array().tanh();
  logits = view(kW) * f + view(kC);
}

Trace TinyPolicy::forward(const std::vector<int>& tokens) const {
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Trace t;
  t.tokens = tokens;
  t.r.resize(shape_.recurrent, n);
  t.f.resize(shape_.hidden, n);
  t.logits.resize(shape_.vocab, n);
  Eigen::VectorXd r_prev = Eigen::VectorXd::Zero(shape_.recurrent);
  Eigen::VectorXd r, f, z;
  for (Eigen::Index s = 0; s < n; ++s) {
    step(tokens[static_cast<std::size_t>(s)], r_prev, r, f, z);
    t.r.col(s) = r;
    t.f.col(s) = f;
    t.logits.col(s) = z;
    r_prev = r;
  }
  return t;
}

Eigen::VectorXd TinyPolicy::probabilities(const Eigen::VectorXd& logits, double temperature) {
  const double tau = temperature > 0 ? temperature : 1.0;
  Eigen::VectorXd p = ((logits.array() - logits.maxCoeff()) / tau).exp();
  return p / p.sum();
}

double TinyPolicy::log_prob(const Eigen::VectorXd& logits, int target, double temperature) {
  const double tau = temperature > 0 ? temperature : 1.0;
  const double m = logits.maxCoeff();
  return (logits(target) - m) / tau - std::log(((logits.array() - m) / tau).exp().sum());
}

void TinyPolicy::add_logprob_grad(Eigen::MatrixXd& dlogits, Eigen::Index s, const Eigen::VectorXd& logits,
                                  int target, double temperature, double coef) {
  const double tau = temperature > 0 ? temperature : 1.0;
  Eigen::VectorXd g = -probabilities(logits, temperature);
  g(target) += 1.0;
  dlogits.col(s) += (coef / tau) * g;
}

void TinyPolicy::backward(const Trace& trace, const Eigen::MatrixXd& dlogits, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("TinyPolicy::backward: gradient size");
  const Eigen::Index n = trace.r.cols();
  if (dlogits.rows() != shape_.vocab || dlogits.cols() != n) {
    throw std::invalid_argument("TinyPolicy::backward: dlogits shape");
  }
  auto g_embed = grad_view(grad, kEmbed);
  auto g_wx = grad_view(grad, kWx);
  auto g_wr = grad_view(grad, kWr);
  auto g_br = grad_view(grad, kBr);
  auto g_u = grad_view(grad, kU);
  auto g_bu = grad_view(grad, kBu);
  auto g_w = grad_view(grad, kW);
  auto g_c = grad_view(grad, kC);
  const auto wx = view(kWx);
  const auto wr = view(kWr);
  const auto u = view(kU);
  const auto w = view(kW);
  const auto embed = view(kEmbed);

  Eigen::VectorXd carry = Eigen::VectorXd::Zero(shape_.recurrent);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    Eigen::VectorXd dr = carry;
    if (!dlogits.col(s).isZero(0.0)) {
      const auto dz = dlogits.col(s);
      g_w.noalias() += dz * trace.f.col(s).transpose();
      g_c += dz;
      const Eigen::VectorXd dpre = (w.transpose() * dz).cwiseProduct(
          (1.0 - trace.f.col(s).array().square()).matrix());
      g_u.noalias() += dpre * trace.r.col(s).transpose();
      g_bu += dpre;
      dr.noalias() += u.transpose() * dpre;
    }
    const Eigen::VectorXd da = dr.cwiseProduct((1.0 - trace.r.col(s).array().square()).matrix());
    const int tok = trace.tokens[static_cast<std::size_t>(s)];
    g_wx.noalias() += da * embed.col(tok).transpose();
    g_embed.col(tok).noalias() += wx.transpose() * da;
    if (s > 0) g_wr.noalias() += da * trace.r.col(s - 1).transpose();
    g_br += da;
    carry.noalias() = wr.transpose() * da;
  }
}

}  // namespace resrl::toy
