#pragma once

#include <memory>
#include <string>

#include "slomo/error.hpp"
#include "slomo/service/jobs.hpp"

namespace httplib {
class Server;
}

namespace slomo::service {

/// HTTP status for an error category.
int http_status(ErrorCode code) noexcept;

/// JSON API over a JobManager:
///   POST /api/jobs                 multipart "media" file(s), fields "e", "backend"
///   GET  /api/jobs/{id}
///   GET  /api/jobs/{id}/video      ?format=y4m (default) or the container extension
///   GET  /api/jobs/{id}/frames
///   GET  /api/jobs/{id}/frames/{k}
///   GET  /api/backends
///   GET  /api/healthz
class Server {
 public:
  explicit Server(JobManager& jobs);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds host:port from the config; port 0 picks a free port. Returns the port.
  int bind();
  /// Blocks serving requests until stop().
  void serve();
  void stop();
  int port() const noexcept { return port_; }

 private:
  void routes();

  JobManager& jobs_;
  std::unique_ptr<httplib::Server> http_;
  int port_ = 0;
};

/// JobState as served by GET /api/jobs/{id}.
std::string job_state_json(const JobRecord& record);

}  // namespace slomo::service
