#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kinchain/kernels.hpp"
#include "kinchain/repose.hpp"
#include "kinchain/skinning.hpp"
#include "support.hpp"

namespace kinchain {
namespace {

using testing::Rng;
using testing::random_anchors;
using testing::random_chain;
using testing::random_pose;
using testing::random_transform;
using testing::random_vec;

constexpr double kPi = std::numbers::pi;

KinematicChain vertical_link() {
  return KinematicChain({{0, std::nullopt, Vec3(0, 0, 0)}, {1, 0, Vec3(0, 0, 2)}});
}

// Weighted 4x4 blend followed by the root, written out per anchor.
Vec3 blend_oracle(const Vec3& x, const std::vector<double>& w, const std::vector<RigidTransform>& ts,
                  const RigidTransform& root) {
  Mat4 m = Mat4::Zero();
  for (std::size_t i = 0; i < ts.size(); ++i) m += w[i] * ts[i].homogeneous();
  return (root.homogeneous() * m * x.homogeneous()).head<3>();
}

std::vector<double> softmax_oracle(const Vec3& x, const std::vector<Vec3>& anchors, double tau) {
  std::vector<double> w;
  double sum = 0.0;
  for (const Vec3& a : anchors) {
    w.push_back(std::exp(-(x - a).squaredNorm() / tau));
    sum += w.back();
  }
  for (double& v : w) v /= sum;
  return w;
}

TEST(BuildAssociations, AnchorOnLinkInterior) {
  const auto a = build_associations(vertical_link(), {{Vec3(0, 0, 0.75)}, 1.0});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].beta, 0.0);
  EXPECT_NEAR(a[0].alpha, 0.75, 1e-15);
  EXPECT_EQ(a[0].g.matrix(), Mat3::Identity());
}

TEST(BuildAssociations, PerpendicularOffset) {
  const auto a = build_associations(vertical_link(), {{Vec3(1, 0, 0.5)}, 1.0});
  EXPECT_NEAR(a[0].alpha, 0.5, 1e-15);
  EXPECT_NEAR(a[0].beta, 1.0, 1e-15);
  EXPECT_LT((a[0].g * Vec3(0, 0, 1) - Vec3(1, 0, 0)).norm(), 1e-12);
}

TEST(BuildAssociations, ClampsBeyondEndpoints) {
  const auto a = build_associations(vertical_link(), {{Vec3(0, 1, 3), Vec3(0, 0, -1)}, 1.0});
  EXPECT_NEAR(a[0].alpha, 2.0, 1e-15);
  EXPECT_NEAR(a[0].beta, std::sqrt(2.0), 1e-15);
  // Foot point at the parent joint: alpha = 0 with a well-defined g.
  EXPECT_EQ(a[1].alpha, 0.0);
  EXPECT_NEAR(a[1].beta, 1.0, 1e-15);
  EXPECT_LT((a[1].g * Vec3(0, 0, 1) - Vec3(0, 0, -1)).norm(), 1e-9);
}

TEST(BuildAssociations, TieGoesToLowerLinkIndex) {
  // Two links leaving the root along +x and +y; the anchor sits on the diagonal.
  const KinematicChain chain({{0, std::nullopt, Vec3(0, 0, 0)}, {2, 0, Vec3(0, 1, 0)}, {1, 0, Vec3(1, 0, 0)}});
  const auto a = build_associations(chain, {{Vec3(0.5, 0.5, 0)}, 1.0});
  ASSERT_EQ(chain.joint(chain.links()[0].child).id, 1);
  EXPECT_EQ(a[0].link, 0u);
}

TEST(BuildAssociations, GAlignsLinkDirectionWithOffset) {
  Rng rng(31);
  for (int c = 0; c < 100; ++c) {
    const KinematicChain chain = random_chain(rng, 7);
    const AnchorSet anchors = random_anchors(rng, chain, 10);
    for (const Association& a : build_associations(chain, anchors)) {
      const Link& l = chain.links()[a.link];
      EXPECT_GE(a.alpha, 0.0);
      EXPECT_LE(a.alpha, chain.link_length(a.link) + 1e-12);
      if (a.beta <= 1e-9) continue;
      const Vec3 d = (chain.position(l.child) - chain.position(l.parent)).normalized();
      const Vec3 m = chain.position(l.parent) + a.alpha * d;
      EXPECT_LT((a.g * d - (anchors.positions[a.anchor] - m).normalized()).norm(), 1e-9);
      EXPECT_NEAR((anchors.positions[a.anchor] - m).norm(), a.beta, 1e-12);
    }
  }
}

TEST(AnchorPositions, CanonicalFixedPoint) {
  Rng rng(32);
  for (int c = 0; c < 100; ++c) {
    const KinematicChain chain = random_chain(rng, 8);
    const AnchorSet anchors = random_anchors(rng, chain, 12);
    const auto assoc = build_associations(chain, anchors);
    const auto got = anchor_positions(chain, assoc, chain.positions());
    for (std::size_t i = 0; i < anchors.size(); ++i)
      EXPECT_LT((got[i] - anchors.positions[i]).norm(), 1e-12);
  }
}

TEST(AnchorPositions, FollowsRotatedLink) {
  const KinematicChain chain({{0, std::nullopt, Vec3(0, 0, 0)}, {1, 0, Vec3(1, 0, 0)}});
  const AnchorSet anchors{{Vec3(0.5, 1, 0)}, 1.0};
  const auto assoc = build_associations(chain, anchors);
  Pose pose = Pose::identity(chain);
  pose.joint_rotations[0] = Vec3(0, 0, kPi / 2);
  const auto fk = forward_kinematics(chain, pose);
  const auto got = anchor_positions(chain, assoc, fk.positions);
  // Link now points along +y; the +y offset turned to -x.
  EXPECT_LT((got[0] - Vec3(-1, 0.5, 0)).norm(), 1e-12);
}

TEST(AnchorPositions, HalfTurnTwistReflectsAcrossTheAxis) {
  const KinematicChain chain({{0, std::nullopt, Vec3(0, 0, 0)}, {1, 0, Vec3(2, 0, 0)}});
  const AnchorSet anchors{{Vec3(0.5, 0.3, 0.1)}, 1.0};
  const auto assoc = build_associations(chain, anchors);
  const std::vector<double> twist{kPi};
  const auto got = anchor_positions(chain, assoc, chain.positions(), twist);
  EXPECT_LT((got[0] - Vec3(0.5, -0.3, -0.1)).norm(), 1e-12);
}

TEST(AnchorPositions, OffsetNormConservedUnderPoses) {
  Rng rng(33);
  for (int c = 0; c < 100; ++c) {
    const KinematicChain chain = random_chain(rng, 6);
    const AnchorSet anchors = random_anchors(rng, chain, 8);
    const auto assoc = build_associations(chain, anchors);
    const Pose pose = random_pose(rng, chain, 2.0);
    const auto fk = forward_kinematics(chain, pose);
    const auto got = anchor_positions(chain, assoc, fk.positions, pose.link_twists);
    for (const Association& a : assoc) {
      const Link& l = chain.links()[a.link];
      const Vec3 d = (fk.positions[l.child] - fk.positions[l.parent]) / chain.link_length(a.link);
      EXPECT_NEAR((got[a.anchor] - (fk.positions[l.parent] + a.alpha * d)).norm(), a.beta, 1e-9);
    }
  }
}

TEST(AnchorPositions, RootAppliedOutermostIsEquivariant) {
  Rng rng(34);
  for (int c = 0; c < 20; ++c) {
    const KinematicChain chain = random_chain(rng, 6);
    const AnchorSet anchors = random_anchors(rng, chain, 8);
    Mesh mesh;
    for (int v = 0; v < 50; ++v) mesh.vertices.push_back(random_vec(rng, 2.0));
    const ModelBundle model = ModelBundle::make(mesh, chain, anchors);
    Pose pose = random_pose(rng, chain);
    pose.root_rotation = Vec3::Zero();
    pose.root_translation = Vec3::Zero();
    const ReposeResult local = repose(model, pose);
    pose.root_rotation = Vec3(0.3, -1.1, 0.4);
    pose.root_translation = Vec3(1, 2, 3);
    const ReposeResult rooted = repose(model, pose);
    for (std::size_t i = 0; i < anchors.size(); ++i)
      EXPECT_LT((rooted.anchors[i] - apply_point(pose.root(), local.anchors[i])).norm(), 1e-9);
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
      EXPECT_LT((rooted.vertices[v] - apply_point(pose.root(), local.vertices[v])).norm(), 1e-9);
  }
}

TEST(AnchorPositions, OffsetLegIsFixedInCanonicalFrame) {
  // Spinning the joints about the link's own axis leaves the joints, and so the
  // anchor, where they are; only a twist turns the offset.
  const KinematicChain chain({{0, std::nullopt, Vec3(0, 0, 0)}, {1, 0, Vec3(1, 0, 0)}});
  const AnchorSet anchors{{Vec3(0.5, 0.3, 0)}, 1.0};
  const auto assoc = build_associations(chain, anchors);
  Pose pose = Pose::identity(chain);
  pose.root_rotation = Vec3(1.0, 0, 0);
  const auto got = anchor_positions(chain, assoc, forward_kinematics(chain, pose).positions);
  EXPECT_LT((got[0] - anchors.positions[0]).norm(), 1e-12);
}

TEST(AnchorPositions, MismatchedInputsThrow) {
  const KinematicChain chain = vertical_link();
  const auto assoc = build_associations(chain, {{Vec3(1, 0, 0)}, 1.0});
  EXPECT_THROW(anchor_positions(chain, assoc, std::vector<Vec3>(3)), std::invalid_argument);
  EXPECT_THROW(anchor_positions(chain, assoc, chain.positions(), std::vector<double>(2)),
               std::invalid_argument);
}

TEST(RevisedAnchorTransforms, TranslationOnly) {
  const std::vector<Vec3> a{Vec3(1, 1, 1), Vec3(0, 0, 0)};
  const std::vector<Vec3> b{Vec3(1, 1, 1), Vec3(1, 2, 3)};
  const auto t = revised_anchor_transforms(a, b);
  EXPECT_EQ(t[0].translation, Vec3::Zero());
  EXPECT_EQ(t[1].translation, Vec3(1, 2, 3));
  for (const auto& x : t) EXPECT_EQ(x.rotation.matrix(), Mat3::Identity());

  Rng rng(35);
  for (int i = 0; i < 100; ++i) {
    const std::vector<Vec3> p{random_vec(rng, 5)}, q{random_vec(rng, 5)};
    EXPECT_LT((apply_point(revised_anchor_transforms(p, q)[0], p[0]) - q[0]).norm(), 1e-12);
  }
  EXPECT_THROW(revised_anchor_transforms(a, std::vector<Vec3>(1)), std::invalid_argument);
}

TEST(SkinWeights, Examples) {
  EXPECT_EQ(forward_skin_weights(Vec3(3, 4, 5), {{Vec3(0, 0, 0)}, 0.1}), SkinningWeights{1.0});
  const auto half = forward_skin_weights(Vec3(0, 0, 0), {{Vec3(1, 0, 0), Vec3(-1, 0, 0)}, 0.7});
  EXPECT_EQ(half[0], 0.5);
  EXPECT_EQ(half[1], 0.5);
  const auto w = forward_skin_weights(Vec3(0, 0, 0), {{Vec3(1, 0, 0), Vec3(2, 0, 0)}, 1.0});
  const double e1 = std::exp(-1.0), e4 = std::exp(-4.0);
  EXPECT_NEAR(w[0], e1 / (e1 + e4), 1e-15);
  EXPECT_NEAR(w[1], e4 / (e1 + e4), 1e-15);
}

TEST(SkinWeights, NormalizedNonNegativeAndMatchSoftmaxOracle) {
  Rng rng(36);
  for (int i = 0; i < 2000; ++i) {
    AnchorSet anchors;
    for (int k = 0; k < 7; ++k) anchors.positions.push_back(random_vec(rng, 3));
    anchors.temperature = testing::uniform(rng, 0.05, 5.0);
    const Vec3 x = random_vec(rng, 4);
    const auto w = forward_skin_weights(x, anchors);
    const auto o = softmax_oracle(x, anchors.positions, anchors.temperature);
    double s = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      EXPECT_GE(w[k], 0.0);
      EXPECT_NEAR(w[k], o[k], 1e-12);
      s += w[k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SkinWeights, FarQueriesDoNotUnderflow) {
  const auto w = forward_skin_weights(Vec3(1e3, 0, 0), {{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 1e-3});
  EXPECT_NEAR(w[0] + w[1], 1.0, 1e-12);
  EXPECT_EQ(w[1], 1.0);
}

TEST(SkinWeights, SmallTemperatureSelectsNearest) {
  const AnchorSet anchors{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, 1e-6};
  const auto w = forward_skin_weights(Vec3(0.2, 0.1, 0), anchors);
  EXPECT_GT(w[0], 1.0 - 1e-6);
}

TEST(DeformPoint, Examples) {
  const Vec3 x(0.4, -0.2, 1.3);
  const std::vector<double> w{0.3, 0.7};
  const std::vector<RigidTransform> id(2);
  EXPECT_EQ(deform_point(x, w, id, RigidTransform::identity()), x);
  const std::vector<RigidTransform> opposite{RigidTransform::from_translation(Vec3(1, 2, 3)),
                                             RigidTransform::from_translation(Vec3(-1, -2, -3))};
  EXPECT_LT((deform_point(x, std::vector<double>{0.5, 0.5}, opposite, RigidTransform::identity()) - x).norm(), 1e-15);
  EXPECT_THROW(deform_point(x, std::vector<double>{1.0}, id, RigidTransform::identity()), std::invalid_argument);
}

TEST(DeformPoint, TranslationOnlyMatchesWeightedSum) {
  Rng rng(37);
  for (int i = 0; i < 500; ++i) {
    std::vector<RigidTransform> ts;
    std::vector<double> w;
    double s = 0.0;
    for (int k = 0; k < 5; ++k) {
      ts.push_back(RigidTransform::from_translation(random_vec(rng, 2)));
      w.push_back(testing::uniform(rng, 0, 1));
      s += w.back();
    }
    for (double& v : w) v /= s;
    const RigidTransform root = random_transform(rng);
    const Vec3 x = random_vec(rng, 3);
    Vec3 shift = Vec3::Zero();
    for (int k = 0; k < 5; ++k) shift += w[k] * ts[k].translation;
    EXPECT_LT((deform_point(x, w, ts, root) - apply_point(root, x + shift)).norm(), 1e-12);
  }
}

TEST(DeformPoint, MatchesHomogeneousBlendOracle) {
  Rng rng(38);
  for (int i = 0; i < 500; ++i) {
    std::vector<RigidTransform> ts;
    for (int k = 0; k < 4; ++k) ts.push_back(random_transform(rng));
    AnchorSet anchors;
    for (int k = 0; k < 4; ++k) anchors.positions.push_back(random_vec(rng, 2));
    anchors.temperature = 0.8;
    const RigidTransform root = random_transform(rng);
    const Vec3 x = random_vec(rng, 3);
    const auto w = forward_skin_weights(x, anchors);
    EXPECT_LT((deform_point(x, w, ts, root) - blend_oracle(x, w, ts, root)).norm(), 1e-12);
  }
}

TEST(BackwardDeform, IdentityReturnsInput) {
  const Vec3 x(1, 2, 3);
  const std::vector<Vec3> anchors{Vec3(0, 0, 0), Vec3(1, 1, 1)};
  EXPECT_LT((backward_deform_point(x, anchors, std::vector<RigidTransform>(2), RigidTransform::identity(), 1.0) - x).norm(),
            1e-12);
}

TEST(BackwardDeform, SingleAnchorIsExactInverse) {
  Rng rng(39);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform t = random_transform(rng), root = random_transform(rng);
    const std::vector<RigidTransform> ts{t};
    const Vec3 x = random_vec(rng, 3);
    const Vec3 y = deform_point(x, std::vector<double>{1.0}, ts, root);
    const std::vector<Vec3> deformed{apply_point(root, apply_point(t, Vec3(0.1, 0.2, 0.3)))};
    const Vec3 back = backward_deform_point(y, deformed, ts, root, 0.5);
    EXPECT_LT((back - apply_point(invert(t), apply_point(invert(root), y))).norm(), 1e-12);
    EXPECT_LT((back - x).norm(), 1e-12);
  }
}

TEST(BackwardDeform, SharedTransformRoundTrip) {
  Rng rng(40);
  for (int i = 0; i < 200; ++i) {
    AnchorSet anchors;
    for (int k = 0; k < 6; ++k) anchors.positions.push_back(random_vec(rng, 2));
    anchors.temperature = 0.4;
    const RigidTransform t = random_transform(rng), root = random_transform(rng);
    const std::vector<RigidTransform> ts(anchors.size(), t);
    std::vector<Vec3> deformed;
    for (const Vec3& a : anchors.positions) deformed.push_back(apply_point(root, apply_point(t, a)));
    const Vec3 x = random_vec(rng, 3);
    const Vec3 y = deform_point(x, forward_skin_weights(x, anchors), ts, root);
    EXPECT_LT((backward_deform_point(y, deformed, ts, root, anchors.temperature) - x).norm(), 1e-9);
  }
}

TEST(BackwardDeform, UsesInverseBlendOnRootFreePoint) {
  Rng rng(41);
  const std::vector<RigidTransform> ts{random_transform(rng), random_transform(rng)};
  const RigidTransform root = random_transform(rng);
  const std::vector<Vec3> deformed{random_vec(rng, 2), random_vec(rng, 2)};
  const Vec3 xt = random_vec(rng, 2);
  const auto w = softmax_oracle(xt, deformed, 0.9);
  Mat4 m = Mat4::Zero();
  for (int k = 0; k < 2; ++k) m += w[k] * invert(ts[k]).homogeneous();
  const Vec3 want = (m * apply_point(invert(root), xt).homogeneous()).head<3>();
  EXPECT_LT((backward_deform_point(xt, deformed, ts, root, 0.9) - want).norm(), 1e-12);
}

TEST(DeformMesh, IdentityAndRigidRoot) {
  const Mesh mesh = testing::make_cylinder(6, 8, 1.0, 0.2);
  const AnchorSet anchors{{Vec3(0.2, 0, 0), Vec3(0.8, 0, 0)}, 0.1};
  const std::vector<RigidTransform> id(2);
  const Mesh same = deform_mesh(mesh, anchors, id, RigidTransform::identity());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    EXPECT_LT((same.vertices[v] - mesh.vertices[v]).norm(), 1e-12);
  EXPECT_EQ(same.faces, mesh.faces);

  Rng rng(42);
  const RigidTransform root = random_transform(rng, kPi, 3.0);
  const Mesh moved = deform_mesh(mesh, anchors, id, root);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    EXPECT_LT((moved.vertices[v] - apply_point(root, mesh.vertices[v])).norm(), 1e-9);
    EXPECT_NEAR((moved.vertices[v] - moved.vertices[0]).norm(), (mesh.vertices[v] - mesh.vertices[0]).norm(), 1e-9);
  }
}

TEST(DeformMesh, BentElbowMatchesPerVertexOracle) {
  const auto model = testing::make_elbow();
  const Pose pose = testing::elbow_pose(model.chain, 45.0);
  const auto ts = testing::rigid_link_transforms(model.chain, model.anchors, pose);
  const Mesh bent = deform_mesh(model.mesh, model.anchors, ts, RigidTransform::identity());
  for (std::size_t v = 0; v < model.mesh.vertices.size(); ++v) {
    const Vec3& x = model.mesh.vertices[v];
    const auto w = softmax_oracle(x, model.anchors.positions, model.anchors.temperature);
    EXPECT_LT((bent.vertices[v] - blend_oracle(x, w, ts, RigidTransform::identity())).norm(), 1e-12);
  }
  // The shoulder end stays put, the wrist end follows the forearm rotation.
  EXPECT_LT((bent.vertices[0] - model.mesh.vertices[0]).norm(), 0.05);
  const Vec3 wrist = model.mesh.vertices.back();
  EXPECT_LT((bent.vertices.back() - apply_point(ts.back(), wrist)).norm(), 0.05);
}

TEST(Kernels, ParallelDeformIsBitwiseSerial) {
  Rng rng(43);
  std::vector<Vec3> pts(5000);
  for (Vec3& p : pts) p = random_vec(rng, 3);
  AnchorSet anchors;
  std::vector<RigidTransform> ts;
  for (int k = 0; k < 16; ++k) {
    anchors.positions.push_back(random_vec(rng, 3));
    ts.push_back(random_transform(rng));
  }
  anchors.temperature = 0.5;
  const RigidTransform root = random_transform(rng);
  std::vector<Vec3> a(pts.size()), b(pts.size());
  kernels::deform_points_serial(pts, anchors, ts, root, a);
  kernels::deform_points_parallel(pts, anchors, ts, root, b);
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace kinchain
