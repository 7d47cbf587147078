#include "kinchain/service.hpp"

#include <thread>

#include <httplib.h>

#include "kinchain/errors.hpp"
#include "kinchain/repose.hpp"

namespace kinchain {

std::string repose_document(const ModelBundle& model, const Pose& pose) {
  const ReposeResult r = repose(model, pose);
  return Json{{"vertices", points_to_json(r.vertices)},
              {"joints", points_to_json(r.joints)},
              {"anchors", points_to_json(r.anchors)}}
      .dump();
}

ReposeService::ReposeService(ModelBundle bundle) : bundle_(std::move(bundle)) {
  Json faces = Json::array();
  for (const auto& f : bundle_.mesh.faces) faces.push_back(Json::array({f[0], f[1], f[2]}));
  Json doc = chain_to_json(bundle_.chain);
  doc["hierarchical_order"] = hierarchical_order(bundle_.chain);
  doc["anchors"] = anchors_to_json(bundle_.anchors);
  doc["associations"] = associations_to_json(bundle_.chain, bundle_.associations);
  doc["mesh"] = Json{{"vertices", points_to_json(bundle_.mesh.vertices)}, {"faces", std::move(faces)}};
  model_document_ = doc.dump();
}

ReposeService::Response ReposeService::repose(const std::string& body) const {
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    return {400, Json{{"error", std::string("malformed JSON: ") + e.what()}}.dump()};
  }
  try {
    const Pose pose = pose_from_json(doc, bundle_.chain);
    return {200, repose_document(bundle_, pose)};
  } catch (const ParseError& e) {
    return {400, Json{{"error", e.what()}}.dump()};
  } catch (const std::invalid_argument& e) {
    return {400, Json{{"error", e.what()}}.dump()};
  }
}

struct ServiceHost::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

ServiceHost::ServiceHost(const ReposeService& service, const std::string& host, int port,
                         const std::optional<std::filesystem::path>& static_dir)
    : impl_(std::make_unique<Impl>()) {
  auto& server = impl_->server;
  server.Get("/api/model", [&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(service.model_document(), "application/json");
  });
  server.Post("/api/repose", [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.repose(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  if (static_dir && !server.set_mount_point("/", static_dir->string()))
    throw IoError("cannot serve static files from " + static_dir->string());

  impl_->port = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (impl_->port < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

ServiceHost::~ServiceHost() { stop(); }

int ServiceHost::port() const { return impl_->port; }

void ServiceHost::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void ServiceHost::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace kinchain
