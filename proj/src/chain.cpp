#include "kinchain/chain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <stdexcept>

#include "kinchain/detail/recover.hpp"
#include "kinchain/errors.hpp"

namespace kinchain {

std::vector<Diagnostic> validate_chain(std::span<const Joint> joints) {
  std::vector<Diagnostic> out;
  if (joints.empty()) {
    out.push_back({DiagnosticKind::kEmpty, -1, "chain has no joints"});
    return out;
  }

  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (!by_id.emplace(joints[i].id, i).second)
      out.push_back({DiagnosticKind::kDuplicateId, joints[i].id,
                     "duplicate joint id " + std::to_string(joints[i].id)});
  }

  std::vector<int> roots;
  for (const Joint& j : joints) {
    if (!j.parent) {
      roots.push_back(j.id);
    } else if (!by_id.contains(*j.parent)) {
      out.push_back({DiagnosticKind::kUnknownParent, j.id,
                     "joint " + std::to_string(j.id) + " references unknown parent " +
                         std::to_string(*j.parent)});
    } else if (*j.parent == j.id) {
      out.push_back({DiagnosticKind::kCycle, j.id,
                     "joint " + std::to_string(j.id) + " is its own parent (cycle)"});
    }
  }
  if (roots.empty()) {
    out.push_back({DiagnosticKind::kNoRoot, joints.front().id, "chain has no root joint"});
  } else if (roots.size() > 1) {
    out.push_back({DiagnosticKind::kMultipleRoots, roots[1],
                   "multiple roots: joints " + std::to_string(roots[0]) + " and " +
                       std::to_string(roots[1]) + " have no parent"});
  }

  // Walk each joint's ancestry; a revisit means a cycle.
  for (const Joint& start : joints) {
    std::vector<int> seen{start.id};
    std::optional<int> cur = start.parent;
    while (cur && by_id.contains(*cur)) {
      if (*cur == start.id) {
        out.push_back({DiagnosticKind::kCycle, start.id,
                       "cycle through joint " + std::to_string(start.id)});
        break;
      }
      if (std::find(seen.begin(), seen.end(), *cur) != seen.end()) break;
      seen.push_back(*cur);
      cur = joints[by_id.at(*cur)].parent;
    }
  }

  for (const Joint& j : joints) {
    if (!j.parent || !by_id.contains(*j.parent)) continue;
    const Joint& p = joints[by_id.at(*j.parent)];
    if (!((j.position - p.position).norm() > 0.0) || !j.position.allFinite())
      out.push_back({DiagnosticKind::kZeroLengthLink, j.id,
                     "link " + std::to_string(p.id) + "->" + std::to_string(j.id) +
                         " has zero length"});
  }
  return out;
}

KinematicChain::KinematicChain(std::vector<Joint> joints) : joints_(std::move(joints)) {
  const auto diagnostics = validate_chain(joints_);
  if (!diagnostics.empty())
    throw InvalidChainError(diagnostics.front().message, diagnostics.front().joint_id);

  const std::size_t n = joints_.size();
  parent_.assign(n, std::nullopt);
  children_.assign(n, {});
  incoming_.assign(n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    if (joints_[i].parent) {
      const std::size_t p = index_of(*joints_[i].parent);
      parent_[i] = p;
      children_[p].push_back(i);
    } else {
      root_ = i;
    }
  }
  for (auto& c : children_)
    std::sort(c.begin(), c.end(),
              [&](std::size_t a, std::size_t b) { return joints_[a].id < joints_[b].id; });

  std::deque<std::size_t> queue{root_};
  while (!queue.empty()) {
    const std::size_t j = queue.front();
    queue.pop_front();
    order_.push_back(j);
    for (const std::size_t k : children_[j]) queue.push_back(k);
  }

  for (std::size_t i = 0; i < n; ++i)
    if (parent_[i]) links_.push_back({*parent_[i], i});
  std::sort(links_.begin(), links_.end(), [&](const Link& a, const Link& b) {
    const int pa = joints_[a.parent].id, pb = joints_[b.parent].id;
    return pa != pb ? pa < pb : joints_[a.child].id < joints_[b.child].id;
  });
  for (std::size_t l = 0; l < links_.size(); ++l) incoming_[links_[l].child] = l;
}

std::vector<Vec3> KinematicChain::positions() const {
  std::vector<Vec3> out;
  out.reserve(joints_.size());
  for (const Joint& j : joints_) out.push_back(j.position);
  return out;
}

std::optional<std::size_t> KinematicChain::find(int id) const {
  for (std::size_t i = 0; i < joints_.size(); ++i)
    if (joints_[i].id == id) return i;
  return std::nullopt;
}

std::size_t KinematicChain::index_of(int id) const {
  if (auto i = find(id)) return *i;
  throw std::invalid_argument("unknown joint id " + std::to_string(id));
}

double KinematicChain::link_length(std::size_t link) const {
  const Link& l = links_.at(link);
  return (joints_[l.child].position - joints_[l.parent].position).norm();
}

double KinematicChain::min_link_length() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < links_.size(); ++l) m = std::min(m, link_length(l));
  return m;
}

KinematicChain KinematicChain::with_positions(std::span<const Vec3> positions) const {
  if (positions.size() != joints_.size())
    throw std::invalid_argument("with_positions: expected one position per joint");
  std::vector<Joint> joints = joints_;
  for (std::size_t i = 0; i < joints.size(); ++i) joints[i].position = positions[i];
  return KinematicChain(std::move(joints));
}

std::vector<Diagnostic> validate_chain(const KinematicChain& chain) {
  return validate_chain(std::span<const Joint>(chain.joints()));
}

std::vector<int> hierarchical_order(const KinematicChain& chain) {
  std::vector<int> ids;
  ids.reserve(chain.size());
  for (const std::size_t i : chain.order()) ids.push_back(chain.joint(i).id);
  return ids;
}

Pose Pose::identity(const KinematicChain& chain) {
  Pose pose;
  pose.joint_rotations.assign(chain.size(), Vec3::Zero());
  pose.link_twists.assign(chain.link_count(), 0.0);
  return pose;
}

ForwardKinematicsResult forward_kinematics(const KinematicChain& chain, const Pose& pose) {
  if (pose.joint_rotations.size() != chain.size())
    throw std::invalid_argument("forward_kinematics: expected " + std::to_string(chain.size()) +
                                " joint rotations, got " +
                                std::to_string(pose.joint_rotations.size()));
  if (!pose.link_twists.empty() && pose.link_twists.size() != chain.link_count())
    throw std::invalid_argument("forward_kinematics: twist count does not match link count");

  // Subtree maps without the root pose.
  const RigidTransform root = pose.root();
  std::vector<RigidTransform> subtree(chain.size());
  ForwardKinematicsResult out;
  out.joint_transforms.resize(chain.size());
  out.positions.resize(chain.size());
  for (const std::size_t j : chain.order()) {
    const Vec3& p = chain.position(j);
    const Rotation r = rotation_from_axis_angle(pose.joint_rotations[j]);
    const RigidTransform local{r, p - r * p};
    const auto parent = chain.parent(j);
    subtree[j] = parent ? compose(subtree[*parent], local) : local;
    // The joint's own rotation fixes its position.
    const RigidTransform& placing = parent ? subtree[*parent] : RigidTransform::identity();
    out.positions[j] = apply_point(root, apply_point(placing, p));
    out.joint_transforms[j] = compose(root, subtree[j]);
  }
  return out;
}

std::vector<Vec3> recover_chain(const KinematicChain& chain, std::span<const Vec3> unconstrained,
                                std::vector<Diagnostic>* warnings) {
  if (unconstrained.size() != chain.size())
    throw std::invalid_argument("recover_chain: expected one unconstrained position per joint");
  return detail::recover_chain_impl<double>(
      chain, std::vector<Vec3>(unconstrained.begin(), unconstrained.end()), warnings);
}

std::vector<double> LinkResiduals::clipped() const {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = gamma * std::tanh(raw[i]);
  return out;
}

KinematicChain apply_residuals(const KinematicChain& chain, const LinkResiduals& residuals) {
  if (residuals.raw.size() != chain.link_count())
    throw std::invalid_argument("apply_residuals: expected " + std::to_string(chain.link_count()) +
                                " residuals, got " + std::to_string(residuals.raw.size()));
  if (!(residuals.gamma > 0.0) || !(residuals.gamma < chain.min_link_length()))
    throw ConfigError("apply_residuals: gamma must satisfy 0 < gamma < min link length (" +
                      std::to_string(chain.min_link_length()) + ")");

  const std::vector<double> clipped = residuals.clipped();
  std::vector<Vec3> shift(chain.size(), Vec3::Zero());
  std::vector<Vec3> updated(chain.size());
  updated[chain.root()] = chain.position(chain.root());
  for (const std::size_t j : chain.order()) {
    for (const std::size_t k : chain.children(j)) {
      const std::size_t link = *chain.incoming_link(k);
      const Vec3 offset = chain.position(k) - chain.position(j);
      shift[k] = shift[j] + offset * (clipped[link] / offset.norm());
      updated[k] = chain.position(k) + shift[k];
    }
  }
  return chain.with_positions(updated);
}

}  // namespace kinchain
