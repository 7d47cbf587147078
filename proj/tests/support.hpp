// Shared generators for unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "kinchain/chain.hpp"
#include "kinchain/fitting.hpp"
#include "kinchain/skinning.hpp"

namespace kinchain::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(Rng& rng, double scale = 1.0) {
  return Vec3(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do v = Vec3(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6);
  return v.normalized();
}

inline Rotation random_rotation(Rng& rng, double max_angle = std::numbers::pi) {
  return axis_angle_rotation(random_unit(rng), uniform(rng, -max_angle, max_angle));
}

inline RigidTransform random_transform(Rng& rng, double max_angle = std::numbers::pi,
                                       double max_translation = 1.0) {
  return {random_rotation(rng, max_angle), random_vec(rng, max_translation)};
}

// Random tree with shuffled, non-contiguous ids; link lengths in [0.2, 2].
inline KinematicChain random_chain(Rng& rng, int joints) {
  std::vector<int> ids(static_cast<std::size_t>(joints));
  std::iota(ids.begin(), ids.end(), 0);
  for (int& id : ids) id = 3 * id + 7;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<Joint> out(static_cast<std::size_t>(joints));
  out[0] = {ids[0], std::nullopt, random_vec(rng, 2.0)};
  for (std::size_t i = 1; i < out.size(); ++i) {
    const std::size_t p = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    out[i] = {ids[i], ids[p], out[p].position + uniform(rng, 0.2, 2.0) * random_unit(rng)};
  }
  std::shuffle(out.begin(), out.end(), rng);
  return KinematicChain(std::move(out));
}

inline Pose random_pose(Rng& rng, const KinematicChain& chain, double max_angle = 1.0) {
  Pose pose = Pose::identity(chain);
  pose.root_rotation = random_unit(rng) * uniform(rng, 0.0, std::numbers::pi * 0.9);
  pose.root_translation = random_vec(rng, 2.0);
  for (Vec3& r : pose.joint_rotations) r = random_unit(rng) * uniform(rng, 0.0, max_angle);
  for (double& t : pose.link_twists) t = uniform(rng, -max_angle, max_angle);
  return pose;
}

inline AnchorSet random_anchors(Rng& rng, const KinematicChain& chain, int count) {
  AnchorSet a;
  const auto& links = chain.links();
  for (int i = 0; i < count; ++i) {
    const Link& l = links[std::uniform_int_distribution<std::size_t>(0, links.size() - 1)(rng)];
    const Vec3 p = chain.position(l.parent);
    const Vec3 q = chain.position(l.child);
    a.positions.push_back(p + uniform(rng, 0.05, 0.95) * (q - p) + random_vec(rng, 0.3));
  }
  a.temperature = 0.5;
  return a;
}

// Closed tube along +x: rings x segments vertices, quads split into triangles.
inline Mesh make_cylinder(int rings, int segments, double length, double radius) {
  Mesh m;
  for (int r = 0; r < rings; ++r) {
    const double x = length * r / (rings - 1);
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      m.vertices.emplace_back(x, radius * std::cos(phi), radius * std::sin(phi));
    }
  }
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      const int a = r * segments + s;
      const int b = r * segments + (s + 1) % segments;
      const int c = a + segments;
      const int d = b + segments;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  return m;
}

struct ElbowModel {
  Mesh mesh;
  KinematicChain chain;
  AnchorSet anchors;
};

// Two-link arm along +x with joints at 0, 1, 2 and six anchors, three per link.
// `shortening` pulls the elbow and wrist back by that amount, leaving mesh and
// anchors untouched.
inline ElbowModel make_elbow(double shortening = 0.0) {
  ElbowModel m{make_cylinder(30, 20, 2.0, 0.15),
               KinematicChain({{0, std::nullopt, Vec3(0, 0, 0)},
                               {1, 0, Vec3(1.0 - shortening, 0, 0)},
                               {2, 1, Vec3(2.0 - shortening, 0, 0)}}),
               {}};
  const double xs[] = {1.0 / 6, 0.5, 5.0 / 6, 7.0 / 6, 1.5, 11.0 / 6};
  const double ys[] = {0.05, -0.05, 0.0, 0.0, 0.05, -0.05};
  for (int i = 0; i < 6; ++i) m.anchors.positions.emplace_back(xs[i], ys[i], 0.0);
  m.anchors.temperature = default_temperature(m.mesh.vertices);
  return m;
}

inline Pose elbow_pose(const KinematicChain& chain, double degrees) {
  Pose pose = Pose::identity(chain);
  pose.joint_rotations[chain.index_of(1)] = Vec3(0, 0, degrees * std::numbers::pi / 180.0);
  return pose;
}

// Each anchor follows the rigid motion of the link it is associated with.
inline std::vector<RigidTransform> rigid_link_transforms(const KinematicChain& chain,
                                                         const AnchorSet& anchors,
                                                         const Pose& pose) {
  Pose local = pose;
  local.root_rotation.setZero();
  local.root_translation.setZero();
  const auto fk = forward_kinematics(chain, local);
  const auto assoc = build_associations(chain, anchors);
  std::vector<RigidTransform> out;
  for (const Association& a : assoc) out.push_back(fk.joint_transforms[chain.links()[a.link].parent]);
  return out;
}

inline FrameObservation elbow_frame(const ElbowModel& truth, double degrees, int time_index) {
  const Pose pose = elbow_pose(truth.chain, degrees);
  const auto transforms = rigid_link_transforms(truth.chain, truth.anchors, pose);
  return {time_index, deform_mesh(truth.mesh, truth.anchors, transforms, pose.root()).vertices,
          pose.root()};
}

}  // namespace kinchain::testing
