#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinchain/se3.hpp"

namespace kinchain {

struct Joint {
  int id = 0;
  std::optional<int> parent;
  Vec3 position = Vec3::Zero();
};

/// Parent/child joint storage indices of one link.
struct Link {
  std::size_t parent = 0;
  std::size_t child = 0;
};

enum class DiagnosticKind {
  kEmpty,
  kDuplicateId,
  kNoRoot,
  kMultipleRoots,
  kUnknownParent,
  kCycle,
  kZeroLengthLink,
  kDegenerateDirection,
};

struct Diagnostic {
  DiagnosticKind kind;
  int joint_id = -1;
  std::string message;
};

/// Reports every tree violation, duplicate id and zero-length link. Empty iff
/// the joints form a valid chain.
std::vector<Diagnostic> validate_chain(std::span<const Joint> joints);

/// Tree of joints with a single root. Joints keep their storage order; all
/// per-joint arrays in this library are indexed by storage index, and all
/// per-link arrays by position in links().
class KinematicChain {
 public:
  /// Throws InvalidChainError naming the first offending joint.
  explicit KinematicChain(std::vector<Joint> joints);

  std::size_t size() const { return joints_.size(); }
  const std::vector<Joint>& joints() const { return joints_; }
  const Joint& joint(std::size_t index) const { return joints_[index]; }
  const Vec3& position(std::size_t index) const { return joints_[index].position; }
  std::vector<Vec3> positions() const;

  std::optional<std::size_t> find(int id) const;
  /// Throws std::invalid_argument for an unknown id.
  std::size_t index_of(int id) const;

  std::size_t root() const { return root_; }
  std::optional<std::size_t> parent(std::size_t index) const { return parent_[index]; }
  const std::vector<std::size_t>& children(std::size_t index) const { return children_[index]; }
  /// Root first, every joint after its parent (breadth first, children by id).
  const std::vector<std::size_t>& order() const { return order_; }

  /// Links sorted lexicographically by (parent id, child id).
  const std::vector<Link>& links() const { return links_; }
  std::size_t link_count() const { return links_.size(); }
  /// Index of the link ending at `child`, absent for the root.
  std::optional<std::size_t> incoming_link(std::size_t child) const { return incoming_[child]; }
  double link_length(std::size_t link) const;
  double min_link_length() const;

  /// Same topology, new positions (validated).
  KinematicChain with_positions(std::span<const Vec3> positions) const;

 private:
  std::vector<Joint> joints_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
  std::vector<Link> links_;
  std::vector<std::optional<std::size_t>> incoming_;
  std::size_t root_ = 0;
};

std::vector<Diagnostic> validate_chain(const KinematicChain& chain);

/// Joint ids in hierarchical order.
std::vector<int> hierarchical_order(const KinematicChain& chain);

/// Joint rotations (axis-angle, per joint storage index) rotate the joint's
/// subtree about the joint's canonical position. Twists are per link, about
/// the link axis, and only affect anchors.
struct Pose {
  /// Root pose parameters (axis-angle, translation); stored as parameters so
  /// pose documents round-trip exactly.
  Vec3 root_rotation = Vec3::Zero();
  Vec3 root_translation = Vec3::Zero();
  std::vector<Vec3> joint_rotations;
  std::vector<double> link_twists;

  static Pose identity(const KinematicChain& chain);
  RigidTransform root() const {
    return {rotation_from_axis_angle(root_rotation), root_translation};
  }
};

struct ForwardKinematicsResult {
  /// Canonical -> deformed map of each joint, root pose included.
  std::vector<RigidTransform> joint_transforms;
  std::vector<Vec3> positions;
};

ForwardKinematicsResult forward_kinematics(const KinematicChain& chain, const Pose& pose);

/// Places each joint at its canonical link length along the unconstrained
/// parent->child direction, walking the tree from the root, so every subtree
/// is carried along with its corrected root. The root keeps its unconstrained
/// position. Coincident unconstrained endpoints fall back to the canonical
/// offset and append a kDegenerateDirection warning to `warnings`.
std::vector<Vec3> recover_chain(const KinematicChain& chain, std::span<const Vec3> unconstrained,
                                std::vector<Diagnostic>* warnings = nullptr);

/// Raw per-link residuals and their clip bound gamma.
struct LinkResiduals {
  std::vector<double> raw;
  double gamma = 0.0;

  /// gamma * tanh(raw)
  std::vector<double> clipped() const;
};

/// Lengthens each link by gamma * tanh(r) along its current direction and
/// carries descendants along. Throws std::invalid_argument on a count
/// mismatch and ConfigError unless 0 < gamma < min link length.
KinematicChain apply_residuals(const KinematicChain& chain, const LinkResiduals& residuals);

}  // namespace kinchain
