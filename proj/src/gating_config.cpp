#include "resrl/gating_config.hpp"

#include <stdexcept>

namespace resrl {

void GatingConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("rank must be >= 1");
  if (m_max < 1) throw std::invalid_argument("m_max must be >= 1");
  if (!(alpha > 0.0 && alpha < beta && beta < 1.0)) {
    throw std::invalid_argument("quantiles must satisfy 0 < alpha < beta < 1");
  }
  if (!(xi > 0.0 && xi <= 1.0)) throw std::invalid_argument("xi must lie in (0, 1]");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (!(lambda_pos > 0.0)) throw std::invalid_argument("lambda_pos must be > 0");
  if (!(clip_eps >= 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must lie in [0, 1)");
  if (!(layernorm_eps > 0.0)) throw std::invalid_argument("layernorm_eps must be > 0");
  if (!(kl_coeff >= 0.0)) throw std::invalid_argument("kl_coeff must be >= 0");
  if (!(svd_tol >= 0.0)) throw std::invalid_argument("svd_tol must be >= 0");
  if (!(std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
  if (!(boundary_fraction >= 0.0 && boundary_fraction <= 0.5)) {
    throw std::invalid_argument("boundary_fraction must lie in [0, 0.5]");
  }
}

}  // namespace resrl
