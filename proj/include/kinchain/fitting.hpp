#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kinchain/chain.hpp"
#include "kinchain/skinning.hpp"

namespace kinchain {

/// Observed deformed point cloud of one frame with its (given) root pose.
struct FrameObservation {
  int time_index = 0;
  std::vector<Vec3> target_points;
  RigidTransform root_pose;
};

/// Per-anchor rigid transforms of one frame, fitted without chain constraints.
struct UnconstrainedFrameTransforms {
  int time_index = 0;
  std::vector<RigidTransform> per_anchor;
};

struct LossWeights {
  double recon = 1.0;
  double cycle = 0.1;
  double anchors = 0.1;
};

struct FitConfig {
  int stage1_iterations = 400;
  int stage2_iterations = 300;
  double step_size = 1e-2;
  /// Softmax temperature override; the anchor set's own value otherwise.
  std::optional<double> tau;
  /// Residual clip bound; 0.1 * min link length when absent.
  std::optional<double> gamma;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  /// Relative loss change below which an optimisation stops.
  double convergence_tol = 1e-8;
  /// Off reproduces fixed-length chains (no link residuals).
  bool optimize_residuals = true;
  /// Deformed-space samples per frame for the cycle loss.
  int cycle_samples = 128;

  /// Throws ConfigError on non-positive sizes, steps or weights that are all zero.
  void validate() const;
};

/// Default temperature: (0.2 * bounding-box diagonal)^2.
double default_temperature(std::span<const Vec3> points);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Chamfer distance between the skinned template vertices and the frame's
/// target points.
double reconstruction_loss(const Mesh& template_mesh, const AnchorSet& anchors,
                           std::span<const RigidTransform> transforms,
                           const FrameObservation& frame);

/// Mean squared forward(backward(x)) - x over deformed-space samples.
/// Backward weights use the deformed anchors root * T_i * a_i.
double cycle_consistency_loss(std::span<const Vec3> samples, const AnchorSet& anchors,
                              std::span<const RigidTransform> transforms,
                              const RigidTransform& root);

/// sum_i |root * a~_i - root * T_i * a_i|^2 with a~ the anchors reconstructed
/// from the root-free `revised_joints` through the associations.
double anchor_consistency_loss(const AnchorSet& anchors, const KinematicChain& chain,
                               std::span<const Association> associations,
                               std::span<const Vec3> revised_joints,
                               std::span<const double> twists,
                               std::span<const RigidTransform> transforms,
                               const RigidTransform& root = RigidTransform::identity());

/// Canonical joints pushed through the anchor blend: root * sum_i w_i T_i p.
std::vector<Vec3> transport_joints(const KinematicChain& chain, const AnchorSet& anchors,
                                   std::span<const RigidTransform> transforms,
                                   const RigidTransform& root);

/// transport_joints (root-free) -> recover_chain -> anchor_positions -> anchor
/// loss, as one function of the frame transforms. The root is applied to both
/// sides last, which keeps the loss root-equivariant.
double chain_aware_anchor_loss(const KinematicChain& chain,
                               std::span<const Association> associations,
                               const AnchorSet& anchors,
                               std::span<const RigidTransform> transforms,
                               const RigidTransform& root);

// ---------------------------------------------------------------------------
// Gradients
//
// Parameters are tangent perturbations, six per anchor: [rotation(3),
// translation(3)], applied as R <- R * exp(rotation), t <- t + translation.
// ---------------------------------------------------------------------------

struct LossGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

std::vector<RigidTransform> retract(std::span<const RigidTransform> transforms,
                                    std::span<const double> delta);

LossGradient reconstruction_loss_gradient(const Mesh& template_mesh, const AnchorSet& anchors,
                                          std::span<const RigidTransform> transforms,
                                          const FrameObservation& frame);

LossGradient cycle_consistency_gradient(std::span<const Vec3> samples, const AnchorSet& anchors,
                                        std::span<const RigidTransform> transforms,
                                        const RigidTransform& root);

/// Gradient with the revised joints held fixed.
LossGradient anchor_consistency_gradient(const AnchorSet& anchors, const KinematicChain& chain,
                                         std::span<const Association> associations,
                                         std::span<const Vec3> revised_joints,
                                         std::span<const double> twists,
                                         std::span<const RigidTransform> transforms,
                                         const RigidTransform& root = RigidTransform::identity());

/// Gradient through transport and chain recovery as well.
LossGradient chain_aware_anchor_gradient(const KinematicChain& chain,
                                         std::span<const Association> associations,
                                         const AnchorSet& anchors,
                                         std::span<const RigidTransform> transforms,
                                         const RigidTransform& root);

using Objective = std::function<LossGradient(std::span<const double>)>;

/// Max over parameters of |analytic - central difference| /
/// max(|analytic|, |numeric|, abs_floor), evaluated at `params`.
double numeric_gradient_check(const Objective& objective, std::span<const double> params,
                              double epsilon, double abs_floor = 1e-6);

// ---------------------------------------------------------------------------
// Optimisation
// ---------------------------------------------------------------------------

struct LossTerms {
  double recon = 0.0;
  double cycle = 0.0;
  double anchors = 0.0;
  double total = 0.0;
};

struct TraceRow {
  int stage = 1;
  /// Frame index for stage 1, -1 for the joint stage-2 objective.
  int frame = -1;
  int iteration = 0;
  LossTerms terms;
  double step = 0.0;
};

using LossTrace = std::vector<TraceRow>;

/// Tab-separated table with a header line.
std::string format_trace(const LossTrace& trace);

struct Stage1Result {
  std::vector<UnconstrainedFrameTransforms> frames;
  LossTrace trace;
};

/// Per-frame gradient descent with backtracking on
/// w_recon * reconstruction + w_cycle * cycle, starting from identity.
/// Throws FitDivergedError on a non-finite loss.
Stage1Result fit_stage1(const Mesh& template_mesh, const AnchorSet& anchors,
                        std::span<const FrameObservation> frames, const FitConfig& config);

struct Stage2Result {
  KinematicChain chain;
  LinkResiduals residuals;
  std::vector<UnconstrainedFrameTransforms> frames;
  std::vector<Association> associations;
  LossTrace trace;
};

/// Joint descent over all frame transforms and the link residuals on
/// recon + cycle + chain-aware anchor loss. The residual-updated chain and
/// its rebuilt associations are returned.
Stage2Result fit_stage2(const KinematicChain& chain, const Mesh& template_mesh,
                        const AnchorSet& anchors, std::span<const UnconstrainedFrameTransforms> stage1,
                        std::span<const FrameObservation> frames, const FitConfig& config);

/// Deterministic subsample (seeded) of a frame's target points.
std::vector<Vec3> cycle_samples(const FrameObservation& frame, int count, std::uint64_t seed);

}  // namespace kinchain
