// Dense linear-algebra primitives shared by every stage of the reweighting
// pipeline: token LayerNorm, rank-k truncated SVD, orthogonal-complement
// projection and empirical quantiles.
//
// Everything here is header-only and templated on the scalar type. All
// functions are pure; returned objects are immutable values.

#ifndef RESRL_LINALG_HPP_
#define RESRL_LINALG_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace resrl {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Throws std::domain_error when any coefficient is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) {
    throw std::domain_error(std::string(what) + ": non-finite entry");
  }
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LayerNormAffine {
  Vec<Scalar> gain;
  Vec<Scalar> bias;
};

/// Token-wise LayerNorm: (h - mean) / sqrt(var + eps), then the optional
/// elementwise affine map gain * y + bias. Variance is the population one.
template <typename Derived>
Vec<typename Derived::Scalar> layer_norm(
    const Eigen::MatrixBase<Derived>& h, typename Derived::Scalar eps,
    const std::optional<LayerNormAffine<typename Derived::Scalar>>& affine =
        std::nullopt) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index d = h.size();
  if (d < 2) throw std::invalid_argument("layer_norm: dim must be >= 2");
  if (!(eps > Scalar(0))) throw std::invalid_argument("layer_norm: eps must be > 0");
  require_finite(h, "layer_norm");
  const Scalar mean = h.mean();
  Vec<Scalar> centered = h.array() - mean;
  const Scalar var = centered.squaredNorm() / Scalar(d);
  Vec<Scalar> out = centered / std::sqrt(var + eps);
  if (affine) {
    if (affine->gain.size() != d || affine->bias.size() != d) {
      throw std::invalid_argument("layer_norm: affine dimension mismatch");
    }
    out = (out.array() * affine->gain.array() + affine->bias.array()).matrix();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orthonormal bases and truncated SVD
// ---------------------------------------------------------------------------

/// A d x k_eff matrix with orthonormal columns. k_eff may be zero.
template <typename Scalar>
class OrthonormalBasis {
 public:
  static constexpr double kTolerance = 1e-8;

  explicit OrthonormalBasis(Eigen::Index ambient_dim)
      : columns_(ambient_dim, 0) {}

  /// Validates orthonormality to kTolerance.
  explicit OrthonormalBasis(Mat<Scalar> columns) : columns_(std::move(columns)) {
    require_finite(columns_, "OrthonormalBasis");
    if (columns_.cols() > columns_.rows()) {
      throw std::invalid_argument("OrthonormalBasis: more columns than ambient dim");
    }
    const Mat<Scalar> gram = columns_.transpose() * columns_;
    const Mat<Scalar> eye = Mat<Scalar>::Identity(gram.rows(), gram.cols());
    if (gram.size() > 0 &&
        (gram - eye).cwiseAbs().maxCoeff() > Scalar(kTolerance)) {
      throw std::invalid_argument("OrthonormalBasis: columns are not orthonormal");
    }
  }

  /// Skips validation; for producers that orthonormalise by construction.
  static OrthonormalBasis trusted(Mat<Scalar> columns) {
    OrthonormalBasis b(columns.rows());
    b.columns_ = std::move(columns);
    return b;
  }

  Eigen::Index ambient_dim() const { return columns_.rows(); }
  Eigen::Index rank() const { return columns_.cols(); }
  bool empty() const { return columns_.cols() == 0; }
  const Mat<Scalar>& columns() const { return columns_; }

  /// P_S x = V (V^T x).
  template <typename Derived>
  Vec<Scalar> project(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != ambient_dim()) {
      throw std::invalid_argument("OrthonormalBasis::project: dimension mismatch");
    }
    if (empty()) return Vec<Scalar>::Zero(x.size());
    return columns_ * (columns_.transpose() * x);
  }

 private:
  Mat<Scalar> columns_;
};

enum class SvdMethod {
  kAuto,
  /// Symmetric eigendecomposition of the d x d Gram matrix X^T X.
  kGram,
  /// Seeded randomized subspace iteration; cost O(M d k) per sweep.
  kSubspaceIteration,
};

struct SvdOptions {
  double tol = 1e-10;
  SvdMethod method = SvdMethod::kAuto;
  int power_iterations = 4;
  std::uint64_t seed = 0x5eed5eedULL;
};

template <typename Scalar>
struct TruncatedSvd {
  OrthonormalBasis<Scalar> basis;
  /// Singular values of the retained directions, descending.
  Vec<Scalar> singular_values;
};

namespace detail {

// Makes the first entry with |v_i| >= 1e-8 positive.
template <typename Scalar>
void canonicalize_signs(Mat<Scalar>& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) >= Scalar(1e-8)) {
        if (v(i, j) < Scalar(0)) v.col(j) = -v.col(j);
        break;
      }
    }
  }
}

template <typename Scalar, typename Derived>
Mat<Scalar> thin_q(const Eigen::MatrixBase<Derived>& a) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(a);
  return qr.householderQ() * Mat<Scalar>::Identity(a.rows(), a.cols());
}

// Orders candidate directions by sigma_j = ||X v_j|| and keeps those above
// tol * sigma_1, at most k. Recomputing sigma from X avoids the squared
// condition number of the Gram route when judging numerical rank.
template <typename Scalar, typename Derived>
TruncatedSvd<Scalar> select_directions(const Eigen::MatrixBase<Derived>& x,
                                       const Mat<Scalar>& candidates,
                                       Eigen::Index k, double tol) {
  const Eigen::Index d = x.cols();
  const Vec<Scalar> sigma = (x * candidates).colwise().norm().transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(sigma.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sigma(a) > sigma(b); });
  const Scalar top = order.empty() ? Scalar(0) : sigma(order.front());
  Eigen::Index keep = 0;
  if (top > Scalar(0)) {
    while (keep < k && keep < static_cast<Eigen::Index>(order.size()) &&
           sigma(order[static_cast<std::size_t>(keep)]) > Scalar(tol) * top) {
      ++keep;
    }
  }
  Mat<Scalar> v(d, keep);
  Vec<Scalar> s(keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    v.col(j) = candidates.col(order[static_cast<std::size_t>(j)]);
    s(j) = sigma(order[static_cast<std::size_t>(j)]);
  }
  canonicalize_signs(v);
  return {OrthonormalBasis<Scalar>::trusted(std::move(v)), std::move(s)};
}

}  // namespace detail

/// Top-k right singular directions of X (rows are samples). The returned
/// rank k_eff = min(k, numerical rank of X at opts.tol) may be smaller than
/// k; sigma_j is retained iff sigma_j > tol * sigma_1.
template <typename Derived>
TruncatedSvd<typename Derived::Scalar> truncated_svd(
    const Eigen::MatrixBase<Derived>& x, Eigen::Index k, const SvdOptions& opts = {}) {
  using Scalar = typename Derived::Scalar;
  if (k < 1) throw std::invalid_argument("truncated_svd: k must be >= 1");
  require_finite(x, "truncated_svd");
  const Eigen::Index m = x.rows();
  const Eigen::Index d = x.cols();
  if (m == 0 || d == 0 || x.cwiseAbs().maxCoeff() == Scalar(0)) {
    return {OrthonormalBasis<Scalar>(d), Vec<Scalar>(0)};
  }

  SvdMethod method = opts.method;
  if (method == SvdMethod::kAuto) {
    method = (d <= 1024 || 4 * k >= d) ? SvdMethod::kGram : SvdMethod::kSubspaceIteration;
  }

  if (method == SvdMethod::kGram) {
    const Mat<Scalar> gram = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("truncated_svd: eigensolver failed");
    }
    // Eigenvalues ascend; the top min(d, k) eigenvectors are the candidates.
    const Eigen::Index take = std::min<Eigen::Index>(d, k);
    const Mat<Scalar> top = eig.eigenvectors().rightCols(take).rowwise().reverse();
    return detail::select_directions<Scalar>(x, top, k, opts.tol);
  }

  // Randomized subspace iteration with a fixed sketch width and sweep count,
  // so the cost is deterministic: O(M d l) per sweep with l = k + ceil(k/2).
  const Eigen::Index width = std::min<Eigen::Index>({d, m, k + (k + 1) / 2});
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  Mat<Scalar> omega(d, width);
  for (Eigen::Index j = 0; j < width; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) omega(i, j) = static_cast<Scalar>(normal(rng));
  }
  Mat<Scalar> q = detail::thin_q<Scalar>(x * omega);
  for (int it = 0; it < opts.power_iterations; ++it) {
    const Mat<Scalar> z = detail::thin_q<Scalar>(x.transpose() * q);
    q = detail::thin_q<Scalar>(x * z);
  }
  // Rayleigh-Ritz on the small factor B = Q^T X (width x d) via B B^T.
  const Mat<Scalar> b = q.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(b * b.transpose());
  const Mat<Scalar> u = eig.eigenvectors().rowwise().reverse();
  Mat<Scalar> v = b.transpose() * u;  // d x width, columns scaled by sigma
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    const Scalar n = v.col(j).norm();
    if (n > Scalar(0)) v.col(j) /= n;
  }
  // Re-orthonormalise against round-off before selecting.
  v = detail::thin_q<Scalar>(v);
  return detail::select_directions<Scalar>(x, v, k, opts.tol);
}

// ---------------------------------------------------------------------------
// Orthogonal-complement projection
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ProjectionResidual {
  Vec<Scalar> residual;
  /// ||residual||^2 / d.
  Scalar energy;
};

/// residual = x - V (V^T x); energy = ||residual||^2 / d.
template <typename Derived>
ProjectionResidual<typename Derived::Scalar> project_residual(
    const Eigen::MatrixBase<Derived>& x,
    const OrthonormalBasis<typename Derived::Scalar>& basis) {
  using Scalar = typename Derived::Scalar;
  if (x.size() != basis.ambient_dim()) {
    throw std::invalid_argument("project_residual: dimension mismatch");
  }
  require_finite(x, "project_residual");
  Vec<Scalar> r = x - basis.project(x);
  const Scalar e = r.squaredNorm() / Scalar(x.size());
  return {std::move(r), e};
}

/// Energy only. Computed from the explicit residual rather than
/// ||x||^2 - ||V^T x||^2, which cancels badly when x is close to S.
template <typename Derived>
typename Derived::Scalar residual_energy(
    const Eigen::MatrixBase<Derived>& x,
    const OrthonormalBasis<typename Derived::Scalar>& basis) {
  return project_residual(x, basis).energy;
}

// ---------------------------------------------------------------------------
// Empirical quantile
// ---------------------------------------------------------------------------

/// Linear interpolation between order statistics at fractional index
/// (n - 1) * gamma. Expected O(n) via selection.
template <typename Scalar>
Scalar empirical_quantile(std::span<const Scalar> values, double gamma) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty input");
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("empirical_quantile: gamma must lie in [0, 1]");
  }
  std::vector<Scalar> v(values.begin(), values.end());
  for (const Scalar& x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw std::domain_error("empirical_quantile: non-finite entry");
    }
  }
  const double pos = static_cast<double>(v.size() - 1) * gamma;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const Scalar lower = v[lo];
  if (frac == 0.0 || lo + 1 >= v.size()) return lower;
  const Scalar upper = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo + 1), v.end());
  return lower + static_cast<Scalar>(frac) * (upper - lower);
}

template <typename Scalar>
Scalar empirical_quantile(const std::vector<Scalar>& values, double gamma) {
  return empirical_quantile(std::span<const Scalar>(values), gamma);
}

}  // namespace resrl

#endif  // RESRL_LINALG_HPP_
