#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "kinchain/detail/blend.hpp"
#include "kinchain/detail/recover.hpp"
#include "kinchain/fitting.hpp"
#include "kinchain/kernels.hpp"
#include "kinchain/metrics.hpp"

namespace kinchain {
namespace {

using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
using Vec3AD = detail::Vec3T<AD>;
using Mat3AD = detail::Mat3T<AD>;

void require_counts(const AnchorSet& anchors, std::span<const RigidTransform> transforms) {
  if (anchors.size() != transforms.size())
    throw std::invalid_argument("expected one transform per anchor");
}

// Transforms as autodiff values, seeded with one derivative per tangent
// parameter. R * (I + [d]x) has the value and first derivative of
// R * exp(d) at d = 0.
std::vector<detail::TransformT<AD>> seeded_transforms(std::span<const RigidTransform> transforms) {
  const Eigen::Index n = static_cast<Eigen::Index>(6 * transforms.size());
  std::vector<detail::TransformT<AD>> out(transforms.size());
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    Vec3AD rot, trans;
    for (int k = 0; k < 3; ++k) {
      rot[k] = AD(0.0, n, static_cast<Eigen::Index>(6 * i + k));
      trans[k] = AD(transforms[i].translation[k], n, static_cast<Eigen::Index>(6 * i + 3 + k));
    }
    Mat3AD perturb = Mat3AD::Identity();
    perturb(0, 1) = -rot.z();
    perturb(0, 2) = rot.y();
    perturb(1, 0) = rot.z();
    perturb(1, 2) = -rot.x();
    perturb(2, 0) = -rot.y();
    perturb(2, 1) = rot.x();
    out[i].rotation = transforms[i].rotation.matrix().cast<AD>() * perturb;
    out[i].translation = trans;
  }
  return out;
}

template <typename Scalar>
Vec3AD lift(const Eigen::Matrix<Scalar, 3, 1>& v) {
  return v.template cast<AD>();
}

LossGradient from_ad(const AD& loss, std::size_t params) {
  LossGradient out;
  out.value = loss.value();
  out.gradient = loss.derivatives().size() == 0 ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params))
                                                 : Eigen::VectorXd(loss.derivatives());
  return out;
}

template <typename Scalar>
Scalar cycle_loss_impl(std::span<const Vec3> samples, const AnchorSet& anchors,
                       const std::vector<detail::TransformT<Scalar>>& transforms,
                       const RigidTransform& root) {
  using V = detail::Vec3T<Scalar>;
  const Mat3 rc = root.rotation.matrix();
  const RigidTransform root_inv = invert(root);
  std::vector<V> deformed_anchors(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const V moved = transforms[i].rotation * anchors.positions[i].template cast<Scalar>() +
                    transforms[i].translation;
    deformed_anchors[i] = rc.cast<Scalar>() * moved + root.translation.cast<Scalar>();
  }
  Scalar total = Scalar(0);
  for (const Vec3& x : samples) {
    const V xt = x.template cast<Scalar>();
    const std::vector<Scalar> wb =
        detail::softmax_weights<Scalar>(xt, deformed_anchors, anchors.temperature);
    const V unrooted = apply_point(root_inv, x).template cast<Scalar>();
    const V canonical = detail::blend_inverse<Scalar>(unrooted, wb, transforms);
    const std::vector<Scalar> wf =
        detail::softmax_weights<Scalar>(canonical, anchors.positions, anchors.temperature);
    const V forward = rc.cast<Scalar>() * detail::blend_forward<Scalar>(canonical, wf, transforms) +
                      root.translation.cast<Scalar>();
    total += (forward - xt).squaredNorm();
  }
  return total / static_cast<double>(samples.size());
}

template <typename Scalar>
Scalar chain_aware_impl(const KinematicChain& chain, std::span<const Association> associations,
                        const AnchorSet& anchors,
                        const std::vector<detail::TransformT<Scalar>>& transforms,
                        const RigidTransform& root) {
  using V = detail::Vec3T<Scalar>;
  const Mat3 rc = root.rotation.matrix();
  std::vector<V> transported(chain.size());
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const Vec3& p = chain.position(j);
    const std::vector<double> w = forward_skin_weights(p, anchors);
    std::vector<Scalar> ws(w.begin(), w.end());
    transported[j] = detail::blend_forward<Scalar>(p.template cast<Scalar>(), ws, transforms);
  }
  // Recovery and re-anchoring happen before the root pose: G is a canonical-frame
  // rotation, so feeding root-rotated joints would make the loss depend on the root.
  const std::vector<V> revised = detail::recover_chain_impl<Scalar>(chain, transported, nullptr);
  Scalar total = Scalar(0);
  for (const Association& as : associations) {
    const Link& link = chain.links()[as.link];
    const V target = detail::associated_anchor<Scalar>(revised[link.parent], revised[link.child],
                                                       chain.link_length(as.link), as.alpha,
                                                       as.beta, as.g.matrix(), 0.0);
    const V rooted = rc.cast<Scalar>() * target + root.translation.cast<Scalar>();
    const V moved = rc.cast<Scalar>() * (transforms[as.anchor].rotation *
                                             anchors.positions[as.anchor].template cast<Scalar>() +
                                         transforms[as.anchor].translation) +
                    root.translation.cast<Scalar>();
    total += (rooted - moved).squaredNorm();
  }
  return total;
}

std::vector<detail::TransformT<double>> plain_transforms(std::span<const RigidTransform> transforms) {
  std::vector<detail::TransformT<double>> out;
  out.reserve(transforms.size());
  for (const auto& t : transforms) out.push_back({t.rotation.matrix(), t.translation});
  return out;
}

}  // namespace

double default_temperature(std::span<const Vec3> points) {
  const double d = 0.2 * bounding_box_diagonal(points);
  return d * d;
}

double reconstruction_loss(const Mesh& template_mesh, const AnchorSet& anchors,
                           std::span<const RigidTransform> transforms,
                           const FrameObservation& frame) {
  if (frame.target_points.empty()) throw std::invalid_argument("reconstruction_loss: empty target");
  const Mesh deformed = deform_mesh(template_mesh, anchors, transforms, frame.root_pose);
  return chamfer_distance(deformed.vertices, frame.target_points);
}

LossGradient reconstruction_loss_gradient(const Mesh& template_mesh, const AnchorSet& anchors,
                                          std::span<const RigidTransform> transforms,
                                          const FrameObservation& frame) {
  if (frame.target_points.empty()) throw std::invalid_argument("reconstruction_loss: empty target");
  require_counts(anchors, transforms);
  const auto& verts = template_mesh.vertices;
  const auto& target = frame.target_points;
  std::vector<Vec3> deformed(verts.size());
  kernels::deform_points_parallel(verts, anchors, transforms, frame.root_pose, deformed);
  const auto to_target = kernels::nearest_parallel(deformed, target);
  const auto to_mesh = kernels::nearest_parallel(target, deformed);

  double sum_a = 0.0, sum_b = 0.0;
  for (const double d : to_target.distance) sum_a += d;
  for (const double d : to_mesh.distance) sum_b += d;
  const double na = static_cast<double>(verts.size());
  const double nb = static_cast<double>(target.size());

  // dL/dx for every deformed vertex.
  std::vector<Vec3> grad_x(verts.size(), Vec3::Zero());
  for (std::size_t v = 0; v < verts.size(); ++v) {
    const double d = to_target.distance[v];
    if (d > 0.0) grad_x[v] += (0.5 / na / d) * (deformed[v] - target[to_target.index[v]]);
  }
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double d = to_mesh.distance[t];
    const std::size_t v = to_mesh.index[t];
    if (d > 0.0) grad_x[v] += (0.5 / nb / d) * (deformed[v] - target[t]);
  }

  const Mat3 rct = frame.root_pose.rotation.matrix().transpose();
  LossGradient out;
  out.value = 0.5 * (sum_a / na + sum_b / nb);
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * anchors.size()));
  for (std::size_t v = 0; v < verts.size(); ++v) {
    const Vec3 g = rct * grad_x[v];
    const SkinningWeights w = forward_skin_weights(verts[v], anchors);
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const Vec3 gl = transforms[i].rotation.matrix().transpose() * g;
      out.gradient.segment<3>(static_cast<Eigen::Index>(6 * i)) += w[i] * verts[v].cross(gl);
      out.gradient.segment<3>(static_cast<Eigen::Index>(6 * i + 3)) += w[i] * g;
    }
  }
  return out;
}

double cycle_consistency_loss(std::span<const Vec3> samples, const AnchorSet& anchors,
                              std::span<const RigidTransform> transforms,
                              const RigidTransform& root) {
  require_counts(anchors, transforms);
  if (samples.empty()) throw std::invalid_argument("cycle_consistency_loss: no samples");
  return cycle_loss_impl<double>(samples, anchors, plain_transforms(transforms), root);
}

LossGradient cycle_consistency_gradient(std::span<const Vec3> samples, const AnchorSet& anchors,
                                        std::span<const RigidTransform> transforms,
                                        const RigidTransform& root) {
  require_counts(anchors, transforms);
  if (samples.empty()) throw std::invalid_argument("cycle_consistency_loss: no samples");
  return from_ad(cycle_loss_impl<AD>(samples, anchors, seeded_transforms(transforms), root),
                 6 * transforms.size());
}

double anchor_consistency_loss(const AnchorSet& anchors, const KinematicChain& chain,
                               std::span<const Association> associations,
                               std::span<const Vec3> revised_joints,
                               std::span<const double> twists,
                               std::span<const RigidTransform> transforms,
                               const RigidTransform& root) {
  require_counts(anchors, transforms);
  const std::vector<Vec3> revised = anchor_positions(chain, associations, revised_joints, twists);
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    total += (apply_point(root, revised[i]) -
              apply_point(root, apply_point(transforms[i], anchors.positions[i])))
                 .squaredNorm();
  return total;
}

LossGradient anchor_consistency_gradient(const AnchorSet& anchors, const KinematicChain& chain,
                                         std::span<const Association> associations,
                                         std::span<const Vec3> revised_joints,
                                         std::span<const double> twists,
                                         std::span<const RigidTransform> transforms,
                                         const RigidTransform& root) {
  require_counts(anchors, transforms);
  const std::vector<Vec3> revised = anchor_positions(chain, associations, revised_joints, twists);
  const Mat3 rct = root.rotation.matrix().transpose();
  LossGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6 * anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const Vec3& a = anchors.positions[i];
    const Vec3 residual = apply_point(root, apply_point(transforms[i], a)) - apply_point(root, revised[i]);
    out.value += residual.squaredNorm();
    const Vec3 g = 2.0 * (rct * residual);
    out.gradient.segment<3>(static_cast<Eigen::Index>(6 * i)) =
        a.cross(transforms[i].rotation.matrix().transpose() * g);
    out.gradient.segment<3>(static_cast<Eigen::Index>(6 * i + 3)) = g;
  }
  return out;
}

std::vector<Vec3> transport_joints(const KinematicChain& chain, const AnchorSet& anchors,
                                   std::span<const RigidTransform> transforms,
                                   const RigidTransform& root) {
  require_counts(anchors, transforms);
  std::vector<Vec3> out(chain.size());
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const SkinningWeights w = forward_skin_weights(chain.position(j), anchors);
    out[j] = deform_point(chain.position(j), w, transforms, root);
  }
  return out;
}

double chain_aware_anchor_loss(const KinematicChain& chain,
                               std::span<const Association> associations,
                               const AnchorSet& anchors,
                               std::span<const RigidTransform> transforms,
                               const RigidTransform& root) {
  require_counts(anchors, transforms);
  return chain_aware_impl<double>(chain, associations, anchors, plain_transforms(transforms), root);
}

LossGradient chain_aware_anchor_gradient(const KinematicChain& chain,
                                         std::span<const Association> associations,
                                         const AnchorSet& anchors,
                                         std::span<const RigidTransform> transforms,
                                         const RigidTransform& root) {
  require_counts(anchors, transforms);
  return from_ad(
      chain_aware_impl<AD>(chain, associations, anchors, seeded_transforms(transforms), root),
      6 * transforms.size());
}

std::vector<RigidTransform> retract(std::span<const RigidTransform> transforms,
                                    std::span<const double> delta) {
  if (delta.size() != 6 * transforms.size())
    throw std::invalid_argument("retract: expected six parameters per transform");
  std::vector<RigidTransform> out(transforms.begin(), transforms.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Vec3 rot(delta[6 * i], delta[6 * i + 1], delta[6 * i + 2]);
    const Vec3 trans(delta[6 * i + 3], delta[6 * i + 4], delta[6 * i + 5]);
    out[i].rotation = out[i].rotation * rotation_from_axis_angle(rot);
    out[i].translation += trans;
  }
  return out;
}

double numeric_gradient_check(const Objective& objective, std::span<const double> params,
                              double epsilon, double abs_floor) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("numeric_gradient_check: epsilon must be positive");
  const LossGradient analytic = objective(params);
  if (static_cast<std::size_t>(analytic.gradient.size()) != params.size())
    throw std::invalid_argument("numeric_gradient_check: gradient size mismatch");
  std::vector<double> x(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + epsilon;
    const double plus = objective(x).value;
    x[k] = saved - epsilon;
    const double minus = objective(x).value;
    x[k] = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double a = analytic.gradient[static_cast<Eigen::Index>(k)];
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace kinchain
