// Tiny recurrent policy. The recurrent state r_t is the penultimate layer,
// f_t = tanh(U r_t + b) the final layer, logits = W f_t + c the output head.
// All parameters live in one flat vector so optimisers and snapshots see a
// single tensor.

#ifndef RESRL_TOY_POLICY_HPP_
#define RESRL_TOY_POLICY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resrl/random.hpp"

namespace resrl::toy {

enum class HiddenLayer { kPenultimate, kFinal };

HiddenLayer parse_hidden_layer(const std::string& s);
std::string to_string(HiddenLayer layer);

struct PolicyShape {
  int vocab = 32;
  int embed = 16;
  int recurrent = 64;
  int hidden = 32;
};

/// Forward pass over one token sequence. Column s holds the state after
/// consuming token s; its logits predict token s + 1.
struct Trace {
  std::vector<int> tokens;
  Eigen::MatrixXd r;       // recurrent x L
  Eigen::MatrixXd f;       // hidden x L
  Eigen::MatrixXd logits;  // vocab x L
};

class TinyPolicy {
 public:
  struct Tensor {
    std::string name;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index offset;
  };

  explicit TinyPolicy(const PolicyShape& shape);

  /// Scaled Gaussian initialisation.
  static TinyPolicy random(const PolicyShape& shape, Rng& rng);

  const PolicyShape& shape() const { return shape_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::Index param_count() const { return params_.size(); }
  const std::vector<Tensor>& layout() const { return layout_; }

  /// One recurrent step from state r.
  void step(int token, const Eigen::VectorXd& r_prev, Eigen::VectorXd& r, Eigen::VectorXd& f,
            Eigen::VectorXd& logits) const;

  Trace forward(const std::vector<int>& tokens) const;

  /// log softmax(logits / temperature)[target]; temperature <= 0 means 1.
  static double log_prob(const Eigen::VectorXd& logits, int target, double temperature);
  static Eigen::VectorXd probabilities(const Eigen::VectorXd& logits, double temperature);

  /// Adds sum_s d(objective)/d(logits_s) backpropagated through the trace
  /// into grad. dlogits is vocab x L.
  void backward(const Trace& trace, const Eigen::MatrixXd& dlogits, Eigen::VectorXd& grad) const;

  /// d log softmax(z / tau)[target] / dz, scaled by coef, into column s.
  static void add_logprob_grad(Eigen::MatrixXd& dlogits, Eigen::Index s, const Eigen::VectorXd& logits,
                               int target, double temperature, double coef);

 private:
  using Map = Eigen::Map<Eigen::MatrixXd>;
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
  ConstMap view(std::size_t i) const;
  Map grad_view(Eigen::VectorXd& grad, std::size_t i) const;

  PolicyShape shape_;
  std::vector<Tensor> layout_;
  Eigen::VectorXd params_;
};

}  // namespace resrl::toy

#endif  // RESRL_TOY_POLICY_HPP_
