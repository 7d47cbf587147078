#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinchain/chain.hpp"
#include "kinchain/fitting.hpp"
#include "kinchain/skinning.hpp"

namespace kinchain {

using Json = nlohmann::json;

// Wavefront OBJ subset: `v x y z` and `f i j k` (1-based, `i/t/n` accepted).
// Polygons are fan-triangulated with a warning; other records are ignored.
Mesh parse_obj(std::istream& in, std::vector<std::string>* warnings = nullptr);
std::string format_obj(const Mesh& mesh);
Mesh load_mesh(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

// {"joints":[{"id":int,"parent":int|null,"position":[x,y,z]},...]}
Json chain_to_json(const KinematicChain& chain);
KinematicChain chain_from_json(const Json& doc);
KinematicChain load_chain(const std::filesystem::path& path);
void save_chain(const KinematicChain& chain, const std::filesystem::path& path);

// {"root":{"rotation_axis_angle":[..],"translation":[..]},
//  "joints":[{"id":int,"rotation_axis_angle":[..],"twist":real},...]}
// Missing joints default to no rotation and no twist.
Json pose_to_json(const Pose& pose, const KinematicChain& chain);
Pose pose_from_json(const Json& doc, const KinematicChain& chain);
Pose load_pose(const std::filesystem::path& path, const KinematicChain& chain);
void save_pose(const Pose& pose, const KinematicChain& chain, const std::filesystem::path& path);

// {"anchors":[[x,y,z],...],"temperature":real}. A missing temperature takes
// `fallback_temperature` and is reported through `warnings`.
Json anchors_to_json(const AnchorSet& anchors);
AnchorSet anchors_from_json(const Json& doc, double fallback_temperature,
                            std::vector<std::string>* warnings = nullptr);
AnchorSet load_anchors(const std::filesystem::path& path, double fallback_temperature = 1.0,
                       std::vector<std::string>* warnings = nullptr);
void save_anchors(const AnchorSet& anchors, const std::filesystem::path& path);

// Every *.obj in `dir` in filename order. An optional root_poses.json
// ({"root_poses":[{"rotation_axis_angle":[..],"translation":[..]},...]})
// supplies one root pose per frame; identity otherwise.
std::vector<FrameObservation> load_frames(const std::filesystem::path& dir);

Json config_to_json(const FitConfig& config);
FitConfig config_from_json(const Json& doc);
FitConfig load_config(const std::filesystem::path& path);

Json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const Json& doc);
Json frame_transforms_to_json(std::span<const UnconstrainedFrameTransforms> frames);
Json associations_to_json(const KinematicChain& chain, std::span<const Association> associations);
Json points_to_json(std::span<const Vec3> points);

// {"joints":[{"id":int,"position":[x,y,z]},...]}: one entry per chain joint.
std::vector<Vec3> joint_positions_from_json(const Json& doc, const KinematicChain& chain);
Json joint_positions_to_json(std::span<const Vec3> positions, const KinematicChain& chain);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Canonical model: mesh, chain, anchors and the associations derived from them.
struct ModelBundle {
  Mesh mesh;
  KinematicChain chain;
  AnchorSet anchors;
  std::vector<Association> associations;

  static ModelBundle make(Mesh mesh, KinematicChain chain, AnchorSet anchors);
};

/// mesh.obj, chain.json and anchors.json from `dir`.
ModelBundle load_model_dir(const std::filesystem::path& dir,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace kinchain
