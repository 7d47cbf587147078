#include "kinchain/skinning.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "kinchain/detail/blend.hpp"
#include "kinchain/kernels.hpp"

namespace kinchain {
namespace {

std::vector<detail::TransformT<double>> to_impl(std::span<const RigidTransform> transforms) {
  std::vector<detail::TransformT<double>> out;
  out.reserve(transforms.size());
  for (const auto& t : transforms) out.push_back({t.rotation.matrix(), t.translation});
  return out;
}

}  // namespace

void AnchorSet::validate() const {
  if (positions.empty()) throw std::invalid_argument("anchor set is empty");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("anchor temperature must be positive");
}

void Mesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (const int i : faces[f])
      if (i < 0 || i >= n)
        throw std::invalid_argument("face " + std::to_string(f) + " references vertex " +
                                    std::to_string(i) + " out of range");
}

std::vector<Association> build_associations(const KinematicChain& chain, const AnchorSet& anchors) {
  std::vector<Association> out;
  out.reserve(anchors.size());
  if (chain.link_count() == 0) throw std::invalid_argument("build_associations: chain has no links");
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const Vec3& anchor = anchors.positions[a];
    double best = std::numeric_limits<double>::infinity();
    Association assoc;
    Vec3 foot = Vec3::Zero();
    for (std::size_t l = 0; l < chain.link_count(); ++l) {
      const Vec3& pj = chain.position(chain.links()[l].parent);
      const Vec3& pk = chain.position(chain.links()[l].child);
      const Vec3 d = pk - pj;
      const double t = std::clamp((anchor - pj).dot(d) / d.squaredNorm(), 0.0, 1.0);
      const Vec3 m = pj + t * d;
      const double dist = (anchor - m).norm();
      if (dist < best) {
        best = dist;
        assoc.link = l;
        foot = m;
      }
    }
    const Link& link = chain.links()[assoc.link];
    const Vec3& pj = chain.position(link.parent);
    assoc.anchor = a;
    assoc.alpha = (foot - pj).norm();
    assoc.beta = (anchor - foot).norm();
    // The link direction equals unit(m - p_j) whenever alpha > 0 and stays
    // defined when the foot point is the parent joint.
    assoc.g = assoc.beta > 0.0 ? rotation_between(chain.position(link.child) - pj, anchor - foot)
                               : Rotation::identity();
    out.push_back(assoc);
  }
  return out;
}

std::vector<Vec3> anchor_positions(const KinematicChain& chain,
                                   std::span<const Association> associations,
                                   std::span<const Vec3> deformed_joints,
                                   std::span<const double> twists) {
  if (deformed_joints.size() != chain.size())
    throw std::invalid_argument("anchor_positions: expected one deformed position per joint");
  if (!twists.empty() && twists.size() != chain.link_count())
    throw std::invalid_argument("anchor_positions: expected one twist per link");
  std::vector<Vec3> out(associations.size(), Vec3::Zero());
  for (const Association& as : associations) {
    if (as.link >= chain.link_count() || as.anchor >= associations.size())
      throw std::invalid_argument("anchor_positions: association does not match the chain");
    const Link& link = chain.links()[as.link];
    out[as.anchor] = detail::associated_anchor<double>(
        deformed_joints[link.parent], deformed_joints[link.child], chain.link_length(as.link),
        as.alpha, as.beta, as.g.matrix(), twists.empty() ? 0.0 : twists[as.link]);
  }
  return out;
}

std::vector<RigidTransform> revised_anchor_transforms(std::span<const Vec3> canonical,
                                                      std::span<const Vec3> deformed) {
  if (canonical.size() != deformed.size())
    throw std::invalid_argument("revised_anchor_transforms: count mismatch");
  std::vector<RigidTransform> out;
  out.reserve(canonical.size());
  for (std::size_t i = 0; i < canonical.size(); ++i)
    out.push_back(RigidTransform::from_translation(deformed[i] - canonical[i]));
  return out;
}

SkinningWeights forward_skin_weights(const Vec3& x, const AnchorSet& anchors) {
  return detail::softmax_weights<double>(x, anchors.positions, anchors.temperature);
}

Vec3 deform_point(const Vec3& x, std::span<const double> weights,
                  std::span<const RigidTransform> transforms, const RigidTransform& root) {
  if (weights.size() != transforms.size())
    throw std::invalid_argument("deform_point: weight/transform count mismatch");
  const std::vector<double> w(weights.begin(), weights.end());
  return apply_point(root, detail::blend_forward<double>(x, w, to_impl(transforms)));
}

Vec3 backward_deform_point(const Vec3& x_t, std::span<const Vec3> deformed_anchors,
                           std::span<const RigidTransform> transforms, const RigidTransform& root,
                           double temperature) {
  if (deformed_anchors.size() != transforms.size())
    throw std::invalid_argument("backward_deform_point: anchor/transform count mismatch");
  const std::vector<Vec3> anchors(deformed_anchors.begin(), deformed_anchors.end());
  const std::vector<double> w = detail::softmax_weights<double>(x_t, anchors, temperature);
  return detail::blend_inverse<double>(apply_point(invert(root), x_t), w, to_impl(transforms));
}

Mesh deform_mesh(const Mesh& mesh, const AnchorSet& anchors,
                 std::span<const RigidTransform> transforms, const RigidTransform& root) {
  if (anchors.size() != transforms.size())
    throw std::invalid_argument("deform_mesh: anchor/transform count mismatch");
  Mesh out;
  out.faces = mesh.faces;
  out.vertices.resize(mesh.vertices.size());
  kernels::deform_points_parallel(mesh.vertices, anchors, transforms, root, out.vertices);
  return out;
}

}  // namespace kinchain
