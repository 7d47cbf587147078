#include "kinchain/repose.hpp"

namespace kinchain {

ReposeResult repose(const ModelBundle& model, const Pose& pose) {
  Pose local = pose;
  local.root_rotation = Vec3::Zero();
  local.root_translation = Vec3::Zero();
  const ForwardKinematicsResult fk = forward_kinematics(model.chain, local);
  const std::vector<Vec3> anchors =
      anchor_positions(model.chain, model.associations, fk.positions, pose.link_twists);
  const std::vector<RigidTransform> transforms =
      revised_anchor_transforms(model.anchors.positions, anchors);

  const RigidTransform root = pose.root();
  ReposeResult out;
  out.vertices = deform_mesh(model.mesh, model.anchors, transforms, root).vertices;
  out.joints.reserve(fk.positions.size());
  for (const Vec3& p : fk.positions) out.joints.push_back(apply_point(root, p));
  out.anchors.reserve(anchors.size());
  for (const Vec3& a : anchors) out.anchors.push_back(apply_point(root, a));
  return out;
}

}  // namespace kinchain
