#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "kinchain/chain.hpp"
#include "kinchain/se3.hpp"

namespace kinchain {

/// Canonical-space deformation anchors and the softmax temperature.
struct AnchorSet {
  std::vector<Vec3> positions;
  double temperature = 1.0;

  std::size_t size() const { return positions.size(); }
  /// Throws std::invalid_argument on an empty set or non-positive temperature.
  void validate() const;
};

/// Ties anchor `anchor` to link `link` of a chain: alpha is the distance from
/// the parent joint to the foot point m, beta the distance from m to the
/// anchor, and g rotates the link direction onto the foot->anchor direction.
struct Association {
  std::size_t anchor = 0;
  std::size_t link = 0;
  double alpha = 0.0;
  double beta = 0.0;
  Rotation g;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  /// Throws std::invalid_argument if a face index is out of range.
  void validate() const;
};

using SkinningWeights = std::vector<double>;

/// Each anchor goes to the link with the smallest point-to-segment distance,
/// ties resolved to the lower link index.
std::vector<Association> build_associations(const KinematicChain& chain, const AnchorSet& anchors);

/// Anchor positions implied by the associations for joint positions
/// `deformed_joints` (per joint index) and per-link twist angles. An empty
/// `twists` span means no twist. G is a canonical-frame rotation, so the
/// joints must be root-free; apply the root pose to the result.
std::vector<Vec3> anchor_positions(const KinematicChain& chain,
                                   std::span<const Association> associations,
                                   std::span<const Vec3> deformed_joints,
                                   std::span<const double> twists = {});

/// Translation-only transforms [I | deformed - canonical].
std::vector<RigidTransform> revised_anchor_transforms(std::span<const Vec3> canonical,
                                                      std::span<const Vec3> deformed);

/// softmax(-|x - a_i|^2 / temperature)
SkinningWeights forward_skin_weights(const Vec3& x, const AnchorSet& anchors);

/// root * (sum_i w_i M_i) * x with M_i the homogeneous matrices of `transforms`.
Vec3 deform_point(const Vec3& x, std::span<const double> weights,
                  std::span<const RigidTransform> transforms, const RigidTransform& root);

/// (sum_i w_i M_i^-1) * root^-1 * x_t with weights taken against the deformed
/// anchors, which live in the same space as x_t.
Vec3 backward_deform_point(const Vec3& x_t, std::span<const Vec3> deformed_anchors,
                           std::span<const RigidTransform> transforms, const RigidTransform& root,
                           double temperature);

/// Forward skinning of every vertex; faces are copied.
Mesh deform_mesh(const Mesh& mesh, const AnchorSet& anchors,
                 std::span<const RigidTransform> transforms, const RigidTransform& root);

}  // namespace kinchain
