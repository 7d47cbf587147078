#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kinchain/se3.hpp"

// Scalar-generic skinning arithmetic. Instantiated with double for the
// public API and with Eigen::AutoDiffScalar for analytic gradients.
namespace kinchain::detail {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
struct TransformT {
  Mat3T<Scalar> rotation;
  Vec3T<Scalar> translation;
};

template <typename Scalar, typename AnchorVec>
std::vector<Scalar> softmax_weights(const Vec3T<Scalar>& x, const std::vector<AnchorVec>& anchors,
                                    double temperature) {
  using std::exp;
  std::vector<Scalar> logits(anchors.size());
  Scalar max_logit = Scalar(0);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec3T<Scalar> d = x - anchors[i].template cast<Scalar>();
    logits[i] = -d.squaredNorm() / temperature;
    if (i == 0 || logits[i] > max_logit) max_logit = logits[i];
  }
  Scalar total = Scalar(0);
  for (auto& l : logits) {
    l = exp(l - max_logit);
    total += l;
  }
  for (auto& l : logits) l /= total;
  return logits;
}

template <typename Scalar>
Vec3T<Scalar> blend_forward(const Vec3T<Scalar>& x, const std::vector<Scalar>& weights,
                            const std::vector<TransformT<Scalar>>& transforms) {
  Mat3T<Scalar> m = Mat3T<Scalar>::Zero();
  Vec3T<Scalar> b = Vec3T<Scalar>::Zero();
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    m += weights[i] * transforms[i].rotation;
    b += weights[i] * transforms[i].translation;
  }
  return m * x + b;
}

// Blend of inverse transforms: sum_i w_i [R_i^T | -R_i^T t_i].
template <typename Scalar>
Vec3T<Scalar> blend_inverse(const Vec3T<Scalar>& x, const std::vector<Scalar>& weights,
                            const std::vector<TransformT<Scalar>>& transforms) {
  Mat3T<Scalar> m = Mat3T<Scalar>::Zero();
  Vec3T<Scalar> b = Vec3T<Scalar>::Zero();
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    const Mat3T<Scalar> rt = transforms[i].rotation.transpose();
    m += weights[i] * rt;
    b -= weights[i] * (rt * transforms[i].translation);
  }
  return m * x + b;
}

template <typename Scalar>
Mat3T<Scalar> rodrigues(const Vec3T<Scalar>& unit_axis, double angle) {
  Mat3T<Scalar> k;
  k << Scalar(0), -unit_axis.z(), unit_axis.y(), unit_axis.z(), Scalar(0), -unit_axis.x(),
      -unit_axis.y(), unit_axis.x(), Scalar(0);
  return Mat3T<Scalar>::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

// alpha/beta/G reconstruction of one anchor from its link endpoints.
template <typename Scalar>
Vec3T<Scalar> associated_anchor(const Vec3T<Scalar>& parent, const Vec3T<Scalar>& child,
                                double canonical_length, double alpha, double beta,
                                const Mat3& g, double twist) {
  using std::sqrt;
  const Vec3T<Scalar> d = (child - parent) / canonical_length;
  Vec3T<Scalar> offset = g.cast<Scalar>() * d;
  if (twist != 0.0) {
    const Vec3T<Scalar> axis = d / sqrt(d.squaredNorm());
    offset = rodrigues<Scalar>(axis, twist) * offset;
  }
  return parent + alpha * d + beta * offset;
}

}  // namespace kinchain::detail
