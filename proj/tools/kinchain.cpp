// Command-line front end: repose, fit, recover, eval, serve.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinchain/errors.hpp"
#include "kinchain/fitting.hpp"
#include "kinchain/io.hpp"
#include "kinchain/metrics.hpp"
#include "kinchain/repose.hpp"
#include "kinchain/service.hpp"

namespace fs = std::filesystem;
using namespace kinchain;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

ModelBundle load_bundle(const fs::path& mesh_path, const fs::path& chain_path,
                        const fs::path& anchors_path) {
  std::vector<std::string> warnings;
  Mesh mesh = load_mesh(mesh_path, &warnings);
  KinematicChain chain = load_chain(chain_path);
  const double fallback = mesh.vertices.empty() ? 1.0 : default_temperature(mesh.vertices);
  AnchorSet anchors = load_anchors(anchors_path, fallback, &warnings);
  print_warnings(warnings);
  return ModelBundle::make(std::move(mesh), std::move(chain), std::move(anchors));
}

int run_repose(const fs::path& mesh, const fs::path& chain, const fs::path& anchors,
               const std::optional<fs::path>& pose_path, const fs::path& out) {
  const ModelBundle model = load_bundle(mesh, chain, anchors);
  const Pose pose = pose_path ? load_pose(*pose_path, model.chain) : Pose::identity(model.chain);
  const ReposeResult r = repose(model, pose);
  save_mesh(Mesh{r.vertices, model.mesh.faces}, out);
  return 0;
}

int run_fit(const fs::path& mesh, const fs::path& chain, const fs::path& anchors,
            const fs::path& frames_dir, const std::optional<fs::path>& config_path,
            std::optional<std::uint64_t> seed, const fs::path& out) {
  const ModelBundle model = load_bundle(mesh, chain, anchors);
  FitConfig config = config_path ? load_config(*config_path) : FitConfig{};
  if (seed) config.seed = *seed;
  const auto frames = load_frames(frames_dir);

  const Stage1Result s1 = fit_stage1(model.mesh, model.anchors, frames, config);
  const Stage2Result s2 = fit_stage2(model.chain, model.mesh, model.anchors, s1.frames, frames, config);

  fs::create_directories(out);
  write_text(out / "transforms_stage1.json", frame_transforms_to_json(s1.frames).dump(2) + "\n");
  write_text(out / "transforms.json", frame_transforms_to_json(s2.frames).dump(2) + "\n");
  save_chain(s2.chain, out / "chain.json");
  write_text(out / "associations.json",
             associations_to_json(s2.chain, s2.associations).dump(2) + "\n");
  write_text(out / "residuals.json", Json{{"raw", s2.residuals.raw},
                                          {"clipped", s2.residuals.clipped()},
                                          {"gamma", s2.residuals.gamma}}
                                         .dump(2) + "\n");
  LossTrace trace = s1.trace;
  trace.insert(trace.end(), s2.trace.begin(), s2.trace.end());
  write_text(out / "trace.tsv", format_trace(trace));

  for (std::size_t f = 0; f < frames.size(); ++f) {
    const double cd = reconstruction_loss(model.mesh, model.anchors, s2.frames[f].per_anchor, frames[f]);
    std::printf("frame %zu\tchamfer %.6g\n", f, cd);
  }
  return 0;
}

int run_recover(const fs::path& chain_path, const fs::path& joints_path, const std::optional<fs::path>& out) {
  const KinematicChain chain = load_chain(chain_path);
  const auto unconstrained = joint_positions_from_json(read_json(joints_path), chain);
  std::vector<Diagnostic> warnings;
  const auto revised = recover_chain(chain, unconstrained, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w.message << '\n';
  const std::string doc = joint_positions_to_json(revised, chain).dump(2) + "\n";
  if (out) {
    write_text(*out, doc);
  } else {
    std::cout << doc;
  }
  return 0;
}

int run_eval(const fs::path& predicted, const fs::path& reference, std::vector<double> thresholds,
             const std::optional<fs::path>& out) {
  if (thresholds.empty()) thresholds.push_back(0.02);
  const Mesh a = load_mesh(predicted);
  const Mesh b = load_mesh(reference);
  const MetricReport report = evaluate(a.vertices, b.vertices, thresholds);
  std::printf("metric\tvalue\n");
  std::printf("chamfer\t%.9g\n", report.chamfer);
  Json fs_json = Json::array();
  for (const auto& [t, f] : report.f_scores) {
    std::printf("f@%g%%\t%.6f\n", t * 100.0, f);
    fs_json.push_back(Json{{"threshold", t}, {"f_score", f}});
  }
  if (out) write_text(*out, Json{{"chamfer", report.chamfer}, {"f_scores", fs_json}}.dump(2) + "\n");
  return 0;
}

ServiceHost* g_host = nullptr;

int run_serve(const fs::path& model_dir, const std::string& bind, int port,
              const std::optional<fs::path>& static_dir) {
  std::vector<std::string> warnings;
  ReposeService service(load_model_dir(model_dir, &warnings));
  print_warnings(warnings);
  ServiceHost host(service, bind, port, static_dir);
  g_host = &host;
  std::signal(SIGINT, [](int) {
    if (g_host) g_host->stop();
  });
  std::cerr << "serving " << model_dir << " on http://" << bind << ':' << host.port() << '\n';
  host.wait();
  g_host = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinematic-chain driven skinning: re-posing, fitting and evaluation"};
  app.require_subcommand(1);

  fs::path mesh, chain, anchors, out, frames, joints, model_dir;
  std::optional<fs::path> pose, config, out_opt, static_dir;
  std::optional<std::uint64_t> seed;
  std::vector<double> thresholds;
  fs::path predicted, reference;
  int port = 8080;
  std::string bind = "127.0.0.1";

  auto* repose_cmd = app.add_subcommand("repose", "Deform a mesh with a chain pose");
  repose_cmd->add_option("--mesh", mesh, "Canonical mesh (OBJ)")->required();
  repose_cmd->add_option("--chain", chain, "Chain JSON")->required();
  repose_cmd->add_option("--anchors", anchors, "Anchors JSON")->required();
  repose_cmd->add_option("--pose", pose, "Pose JSON (identity when omitted)");
  repose_cmd->add_option("--out", out, "Output OBJ")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Fit anchor transforms and chain residuals to frames");
  fit_cmd->add_option("--mesh", mesh, "Canonical mesh (OBJ)")->required();
  fit_cmd->add_option("--chain", chain, "Chain JSON")->required();
  fit_cmd->add_option("--anchors", anchors, "Anchors JSON")->required();
  fit_cmd->add_option("--frames", frames, "Directory of frame OBJ point clouds")->required();
  fit_cmd->add_option("--config", config, "Fit config JSON");
  fit_cmd->add_option("--seed", seed, "Override the config seed");
  fit_cmd->add_option("--out", out, "Output directory")->required();

  auto* recover_cmd = app.add_subcommand("recover", "Restore link lengths of unconstrained joints");
  recover_cmd->add_option("--chain", chain, "Chain JSON")->required();
  recover_cmd->add_option("--joints", joints, "Unconstrained joints JSON")->required();
  recover_cmd->add_option("--out", out_opt, "Output JSON (stdout when omitted)");

  auto* eval_cmd = app.add_subcommand("eval", "Chamfer distance and F-scores between two OBJs");
  eval_cmd->add_option("predicted", predicted, "Predicted OBJ")->required();
  eval_cmd->add_option("reference", reference, "Reference OBJ")->required();
  eval_cmd->add_option("--threshold", thresholds, "F-score threshold fraction of the reference bbox diagonal (repeatable)");
  eval_cmd->add_option("--out", out_opt, "Machine-readable report (JSON)");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the re-posing HTTP API");
  serve_cmd->add_option("--model", model_dir, "Directory with mesh.obj, chain.json, anchors.json")->required();
  serve_cmd->add_option("--port", port, "Port")->capture_default_str();
  serve_cmd->add_option("--bind", bind, "Bind address")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Static UI directory served under /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors count as validation errors; --help exits 0.
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*repose_cmd) return run_repose(mesh, chain, anchors, pose, out);
    if (*fit_cmd) return run_fit(mesh, chain, anchors, frames, config, seed, out);
    if (*recover_cmd) return run_recover(chain, joints, out_opt);
    if (*eval_cmd) return run_eval(predicted, reference, thresholds, out_opt);
    if (*serve_cmd) return run_serve(model_dir, bind, port, static_dir);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
