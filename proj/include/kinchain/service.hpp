#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "kinchain/io.hpp"

namespace kinchain {

/// Request handling for the re-posing HTTP API, independent of the socket
/// layer. The bundle is read-only after construction, so one instance may
/// serve concurrent requests.
class ReposeService {
 public:
  struct Response {
    int status = 200;
    std::string body;
  };

  explicit ReposeService(ModelBundle bundle);

  /// GET /api/model: chain, anchors, associations and mesh.
  const std::string& model_document() const { return model_document_; }
  /// POST /api/repose with a pose document.
  Response repose(const std::string& body) const;
  const ModelBundle& bundle() const { return bundle_; }

 private:
  ModelBundle bundle_;
  std::string model_document_;
};

/// {"vertices":[...],"joints":[...],"anchors":[...]}
std::string repose_document(const ModelBundle& model, const Pose& pose);

/// HTTP server running on a background thread until stop() or destruction.
class ServiceHost {
 public:
  /// port 0 binds an ephemeral port. Throws IoError if binding fails.
  ServiceHost(const ReposeService& service, const std::string& host, int port,
              const std::optional<std::filesystem::path>& static_dir = std::nullopt);
  ~ServiceHost();
  ServiceHost(const ServiceHost&) = delete;
  ServiceHost& operator=(const ServiceHost&) = delete;

  int port() const;
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kinchain
