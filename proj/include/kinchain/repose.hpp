#pragma once

#include <vector>

#include "kinchain/io.hpp"

namespace kinchain {

/// Deformed-space output of re-posing a model.
struct ReposeResult {
  std::vector<Vec3> vertices;
  std::vector<Vec3> joints;
  std::vector<Vec3> anchors;
};

/// forward kinematics -> anchor reconstruction -> translation-only anchor
/// transforms -> mesh skinning. The root pose is applied outermost.
ReposeResult repose(const ModelBundle& model, const Pose& pose);

}  // namespace kinchain
