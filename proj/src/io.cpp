#include "kinchain/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kinchain/errors.hpp"

namespace kinchain {
namespace fs = std::filesystem;

namespace {

bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

Vec3 vec3_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ParseError(what + ": expected an array of 3 numbers");
    v[k] = j[k].get<double>();
    if (!std::isfinite(v[k])) throw ParseError(what + ": non-finite value");
  }
  return v;
}

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

Json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// OBJ

Mesh parse_obj(std::istream& in, std::vector<std::string>* warnings) {
  Mesh mesh;
  std::vector<int> face_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw ParseError("vertex needs 3 coordinates", line_no);
      Vec3 v;
      for (int k = 0; k < 3; ++k)
        if (!parse_double(tokens[1 + k], v[k]))
          throw ParseError("malformed vertex coordinate '" + std::string(tokens[1 + k]) + "'", line_no);
      mesh.vertices.push_back(v);
    } else if (tokens[0] == "f") {
      std::vector<int> idx;
      for (std::size_t t = 1; t < tokens.size(); ++t) {
        const std::string_view head = tokens[t].substr(0, tokens[t].find('/'));
        int i = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), i);
        if (ec != std::errc() || ptr != head.data() + head.size())
          throw ParseError("malformed face index '" + std::string(tokens[t]) + "'", line_no);
        if (i <= 0) throw ParseError("face indices must be positive (1-based)", line_no);
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) throw ParseError("face needs at least 3 vertices", line_no);
      if (idx.size() > 3 && warnings)
        warnings->push_back("line " + std::to_string(line_no) + ": " + std::to_string(idx.size()) +
                            "-gon fan-triangulated");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
        face_lines.push_back(line_no);
      }
    }
  }
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    for (const int i : mesh.faces[f])
      if (i >= n) throw ParseError("face index " + std::to_string(i + 1) + " out of range", face_lines[f]);
  return mesh;
}

std::string format_obj(const Mesh& mesh) {
  std::string out;
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

Mesh load_mesh(const fs::path& path, std::vector<std::string>* warnings) {
  auto in = open_in(path);
  try {
    return parse_obj(in, warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + std::to_string(e.line()) + ": " + e.what(), e.line());
  }
}

void save_mesh(const Mesh& mesh, const fs::path& path) { write_text(path, format_obj(mesh)); }

// ---------------------------------------------------------------------------
// Chain

Json chain_to_json(const KinematicChain& chain) {
  Json joints = Json::array();
  for (const Joint& j : chain.joints()) {
    Json e;
    e["id"] = j.id;
    e["parent"] = j.parent ? Json(*j.parent) : Json(nullptr);
    e["position"] = vec3_to_json(j.position);
    joints.push_back(std::move(e));
  }
  return Json{{"joints", std::move(joints)}};
}

KinematicChain chain_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("joints") || !doc["joints"].is_array())
    throw ParseError("chain: expected {\"joints\": [...]}");
  std::vector<Joint> joints;
  for (const Json& e : doc["joints"]) {
    if (!e.is_object() || !e.contains("id") || !e["id"].is_number_integer())
      throw ParseError("chain: every joint needs an integer id");
    Joint j;
    j.id = e["id"].get<int>();
    if (e.contains("parent") && !e["parent"].is_null()) {
      if (!e["parent"].is_number_integer())
        throw ParseError("chain: joint " + std::to_string(j.id) + " has a non-integer parent");
      j.parent = e["parent"].get<int>();
    }
    if (!e.contains("position"))
      throw ParseError("chain: joint " + std::to_string(j.id) + " has no position");
    j.position = vec3_from_json(e["position"], "chain: joint " + std::to_string(j.id) + " position");
    joints.push_back(j);
  }
  return KinematicChain(std::move(joints));
}

KinematicChain load_chain(const fs::path& path) { return chain_from_json(read_json(path)); }

void save_chain(const KinematicChain& chain, const fs::path& path) {
  write_text(path, chain_to_json(chain).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Pose

Json transform_to_json(const RigidTransform& t) {
  return Json{{"rotation_axis_angle", vec3_to_json(t.rotation.log())},
              {"translation", vec3_to_json(t.translation)}};
}

RigidTransform transform_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("transform: expected an object");
  RigidTransform t;
  if (doc.contains("rotation_axis_angle"))
    t.rotation = rotation_from_axis_angle(vec3_from_json(doc["rotation_axis_angle"], "rotation_axis_angle"));
  if (doc.contains("translation")) t.translation = vec3_from_json(doc["translation"], "translation");
  return t;
}

Json pose_to_json(const Pose& pose, const KinematicChain& chain) {
  Json joints = Json::array();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto link = chain.incoming_link(i);
    joints.push_back(Json{{"id", chain.joint(i).id},
                          {"rotation_axis_angle", vec3_to_json(pose.joint_rotations.at(i))},
                          {"twist", link && !pose.link_twists.empty() ? pose.link_twists[*link] : 0.0}});
  }
  Json root{{"rotation_axis_angle", vec3_to_json(pose.root_rotation)},
            {"translation", vec3_to_json(pose.root_translation)}};
  return Json{{"root", std::move(root)}, {"joints", std::move(joints)}};
}

Pose pose_from_json(const Json& doc, const KinematicChain& chain) {
  if (!doc.is_object()) throw ParseError("pose: expected an object");
  Pose pose = Pose::identity(chain);
  if (doc.contains("root")) {
    const Json& root = doc["root"];
    if (!root.is_object()) throw ParseError("pose: root must be an object");
    if (root.contains("rotation_axis_angle"))
      pose.root_rotation = vec3_from_json(root["rotation_axis_angle"], "pose: root rotation");
    if (root.contains("translation"))
      pose.root_translation = vec3_from_json(root["translation"], "pose: root translation");
  }
  if (doc.contains("joints")) {
    if (!doc["joints"].is_array()) throw ParseError("pose: joints must be an array");
    for (const Json& e : doc["joints"]) {
      if (!e.is_object() || !e.contains("id") || !e["id"].is_number_integer())
        throw ParseError("pose: every joint entry needs an integer id");
      const int id = e["id"].get<int>();
      const auto index = chain.find(id);
      if (!index) throw ParseError("pose: unknown joint id " + std::to_string(id));
      if (e.contains("rotation_axis_angle"))
        pose.joint_rotations[*index] =
            vec3_from_json(e["rotation_axis_angle"], "pose: joint " + std::to_string(id) + " rotation");
      if (e.contains("twist")) {
        if (!e["twist"].is_number()) throw ParseError("pose: twist must be a number");
        const double twist = e["twist"].get<double>();
        if (!std::isfinite(twist)) throw ParseError("pose: non-finite twist");
        const auto link = chain.incoming_link(*index);
        if (link) {
          pose.link_twists[*link] = twist;
        } else if (twist != 0.0) {
          throw ParseError("pose: root joint " + std::to_string(id) + " has no link to twist");
        }
      }
    }
  }
  return pose;
}

Pose load_pose(const fs::path& path, const KinematicChain& chain) {
  return pose_from_json(read_json(path), chain);
}

void save_pose(const Pose& pose, const KinematicChain& chain, const fs::path& path) {
  write_text(path, pose_to_json(pose, chain).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Anchors

Json anchors_to_json(const AnchorSet& anchors) {
  Json list = Json::array();
  for (const Vec3& a : anchors.positions) list.push_back(vec3_to_json(a));
  return Json{{"anchors", std::move(list)}, {"temperature", anchors.temperature}};
}

AnchorSet anchors_from_json(const Json& doc, double fallback_temperature,
                            std::vector<std::string>* warnings) {
  if (!doc.is_object() || !doc.contains("anchors") || !doc["anchors"].is_array())
    throw ParseError("anchors: expected {\"anchors\": [...]}");
  AnchorSet set;
  for (const Json& a : doc["anchors"]) set.positions.push_back(vec3_from_json(a, "anchor"));
  if (doc.contains("temperature")) {
    if (!doc["temperature"].is_number()) throw ParseError("anchors: temperature must be a number");
    set.temperature = doc["temperature"].get<double>();
  } else {
    set.temperature = fallback_temperature;
    if (warnings)
      warnings->push_back("anchors: temperature missing, using default " +
                          std::to_string(fallback_temperature));
  }
  try {
    set.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("anchors: ") + e.what());
  }
  return set;
}

AnchorSet load_anchors(const fs::path& path, double fallback_temperature,
                       std::vector<std::string>* warnings) {
  return anchors_from_json(read_json(path), fallback_temperature, warnings);
}

void save_anchors(const AnchorSet& anchors, const fs::path& path) {
  write_text(path, anchors_to_json(anchors).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Frames and config

std::vector<FrameObservation> load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".obj") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .obj frames in " + dir.string());

  std::vector<FrameObservation> frames;
  for (std::size_t i = 0; i < files.size(); ++i) {
    FrameObservation f;
    f.time_index = static_cast<int>(i);
    f.target_points = load_mesh(files[i]).vertices;
    if (f.target_points.empty()) throw ParseError(files[i].string() + ": no points");
    frames.push_back(std::move(f));
  }
  const fs::path poses = dir / "root_poses.json";
  if (fs::exists(poses)) {
    const Json doc = read_json(poses);
    if (!doc.contains("root_poses") || !doc["root_poses"].is_array() ||
        doc["root_poses"].size() != frames.size())
      throw ParseError("root_poses.json: expected one root pose per frame");
    for (std::size_t i = 0; i < frames.size(); ++i)
      frames[i].root_pose = transform_from_json(doc["root_poses"][i]);
  }
  return frames;
}

Json config_to_json(const FitConfig& c) {
  Json j{{"stage1_iterations", c.stage1_iterations},
         {"stage2_iterations", c.stage2_iterations},
         {"step_size", c.step_size},
         {"loss_weights",
          {{"recon", c.loss_weights.recon}, {"cycle", c.loss_weights.cycle}, {"anchors", c.loss_weights.anchors}}},
         {"seed", c.seed},
         {"convergence_tol", c.convergence_tol},
         {"optimize_residuals", c.optimize_residuals},
         {"cycle_samples", c.cycle_samples}};
  if (c.tau) j["tau"] = *c.tau;
  if (c.gamma) j["gamma"] = *c.gamma;
  return j;
}

FitConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("config: expected an object");
  static const std::set<std::string> known{
      "stage1_iterations", "stage2_iterations", "step_size", "tau", "gamma", "loss_weights",
      "seed", "convergence_tol", "optimize_residuals", "cycle_samples"};
  for (const auto& [key, _] : doc.items())
    if (!known.contains(key)) throw ParseError("config: unknown key '" + key + "'");

  FitConfig c;
  try {
    if (doc.contains("stage1_iterations")) c.stage1_iterations = doc["stage1_iterations"].get<int>();
    if (doc.contains("stage2_iterations")) c.stage2_iterations = doc["stage2_iterations"].get<int>();
    if (doc.contains("step_size")) c.step_size = doc["step_size"].get<double>();
    if (doc.contains("tau") && !doc["tau"].is_null()) c.tau = doc["tau"].get<double>();
    if (doc.contains("gamma") && !doc["gamma"].is_null()) c.gamma = doc["gamma"].get<double>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("convergence_tol")) c.convergence_tol = doc["convergence_tol"].get<double>();
    if (doc.contains("optimize_residuals")) c.optimize_residuals = doc["optimize_residuals"].get<bool>();
    if (doc.contains("cycle_samples")) c.cycle_samples = doc["cycle_samples"].get<int>();
    if (doc.contains("loss_weights")) {
      const Json& w = doc["loss_weights"];
      if (w.contains("recon")) c.loss_weights.recon = w["recon"].get<double>();
      if (w.contains("cycle")) c.loss_weights.cycle = w["cycle"].get<double>();
      if (w.contains("anchors")) c.loss_weights.anchors = w["anchors"].get<double>();
    }
  } catch (const Json::type_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

FitConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Results

Json frame_transforms_to_json(std::span<const UnconstrainedFrameTransforms> frames) {
  Json list = Json::array();
  for (const auto& f : frames) {
    Json per = Json::array();
    for (const auto& t : f.per_anchor) per.push_back(transform_to_json(t));
    list.push_back(Json{{"time_index", f.time_index}, {"per_anchor", std::move(per)}});
  }
  return Json{{"frames", std::move(list)}};
}

Json associations_to_json(const KinematicChain& chain, std::span<const Association> associations) {
  Json list = Json::array();
  for (const Association& a : associations) {
    const Link& l = chain.links().at(a.link);
    Json g = Json::array();
    for (int r = 0; r < 3; ++r)
      g.push_back(Json::array({a.g.matrix()(r, 0), a.g.matrix()(r, 1), a.g.matrix()(r, 2)}));
    list.push_back(Json{{"anchor", a.anchor},
                        {"link", Json::array({chain.joint(l.parent).id, chain.joint(l.child).id})},
                        {"alpha", a.alpha},
                        {"beta", a.beta},
                        {"g", std::move(g)}});
  }
  return list;
}

Json points_to_json(std::span<const Vec3> points) {
  Json list = Json::array();
  for (const Vec3& p : points) list.push_back(vec3_to_json(p));
  return list;
}

std::vector<Vec3> joint_positions_from_json(const Json& doc, const KinematicChain& chain) {
  if (!doc.is_object() || !doc.contains("joints") || !doc["joints"].is_array())
    throw ParseError("joints: expected {\"joints\": [...]}");
  std::vector<Vec3> out(chain.size());
  std::vector<bool> seen(chain.size(), false);
  for (const Json& e : doc["joints"]) {
    if (!e.is_object() || !e.contains("id") || !e["id"].is_number_integer())
      throw ParseError("joints: every entry needs an integer id");
    const int id = e["id"].get<int>();
    const auto index = chain.find(id);
    if (!index) throw ParseError("joints: unknown joint id " + std::to_string(id));
    if (seen[*index]) throw ParseError("joints: duplicate joint id " + std::to_string(id));
    seen[*index] = true;
    out[*index] = vec3_from_json(e["position"], "joints: position of " + std::to_string(id));
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw ParseError("joints: missing joint id " + std::to_string(chain.joint(i).id));
  return out;
}

Json joint_positions_to_json(std::span<const Vec3> positions, const KinematicChain& chain) {
  Json list = Json::array();
  for (std::size_t i = 0; i < chain.size(); ++i)
    list.push_back(Json{{"id", chain.joint(i).id}, {"position", vec3_to_json(positions[i])}});
  return Json{{"joints", std::move(list)}};
}

// ---------------------------------------------------------------------------
// Bundle

ModelBundle ModelBundle::make(Mesh mesh, KinematicChain chain, AnchorSet anchors) {
  mesh.validate();
  anchors.validate();
  auto associations = build_associations(chain, anchors);
  return {std::move(mesh), std::move(chain), std::move(anchors), std::move(associations)};
}

ModelBundle load_model_dir(const fs::path& dir, std::vector<std::string>* warnings) {
  Mesh mesh = load_mesh(dir / "mesh.obj", warnings);
  KinematicChain chain = load_chain(dir / "chain.json");
  const double fallback = mesh.vertices.empty() ? 1.0 : default_temperature(mesh.vertices);
  AnchorSet anchors = load_anchors(dir / "anchors.json", fallback, warnings);
  return ModelBundle::make(std::move(mesh), std::move(chain), std::move(anchors));
}

}  // namespace kinchain
