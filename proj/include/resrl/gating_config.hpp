#ifndef RESRL_GATING_CONFIG_HPP_
#define RESRL_GATING_CONFIG_HPP_

#include <cstddef>

namespace resrl {

/// Hyperparameters of the reweighting pipeline. Defaults follow the
/// reference math-training configuration (rank 64, 4096 positive tokens,
/// lambda_pos 0.1, no KL) with q = 0.1 mapped to (alpha, beta) = (q, 1 - q).
struct GatingConfig {
  std::size_t rank = 64;
  std::size_t m_max = 4096;
  double alpha = 0.1;
  double beta = 0.9;
  /// Minimum NSR weight.
  double xi = 0.1;
  /// Stabiliser in the min-max normalisation.
  double eps = 1e-8;
  double lambda_pos = 0.1;
  double clip_eps = 0.2;
  bool truncation_guard = true;
  bool layernorm_enabled = true;
  double layernorm_eps = 1e-5;
  double kl_coeff = 0.0;
  double svd_tol = 1e-10;
  double std_floor = 1e-6;
  /// Fraction of m_max reserved for head and for tail tokens when sampling.
  double boundary_fraction = 0.05;

  /// Throws std::invalid_argument on a violated constraint.
  void validate() const;

  static GatingConfig from_quantile(double q) {
    GatingConfig c;
    c.alpha = q;
    c.beta = 1.0 - q;
    return c;
  }
};

}  // namespace resrl

#endif  // RESRL_GATING_CONFIG_HPP_
