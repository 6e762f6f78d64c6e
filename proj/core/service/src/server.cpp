#include "slomo/service/server.hpp"

#include <charconv>
#include <fstream>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "slomo/media/frame_dir.hpp"

namespace slomo::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), kJson);
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, http_status(e.code()), error_code_name(e.code()), e.what());
}

// Wraps a handler so every exception becomes a JSON error response.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

int parse_int_field(const std::string& text, const char* name) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) fail(ErrorCode::kValidation, std::string(name) + " must be an integer");
  return v;
}

std::string fps_text(Rational r) { return std::to_string(r.num) + "/" + std::to_string(r.den); }

std::string frame_url(const std::string& id, std::size_t k) {
  return "/api/jobs/" + id + "/frames/" + std::to_string(k);
}

JobRecord require_job(JobManager& jobs, const std::string& id) {
  auto r = jobs.get(id);
  if (!r) fail(ErrorCode::kNotFound, "no job '" + id + "'");
  return *r;
}

void require_done(const JobRecord& r) {
  if (r.state.status == JobStatus::kFailed) {
    fail(ErrorCode::kConflict, "job failed: " + r.state.error_message.value_or("unknown error"));
  }
  if (r.state.status != JobStatus::kDone) {
    fail(ErrorCode::kConflict, "job is " + std::string(job_status_name(r.state.status)) + ", not done");
  }
}

void stream_file(httplib::Response& res, const fs::path& path, const char* content_type) {
  if (!fs::exists(path)) fail(ErrorCode::kNotFound, "result file is missing");
  const auto size = fs::file_size(path);
  auto in = std::make_shared<std::ifstream>(path, std::ios::binary);
  if (!*in) fail(ErrorCode::kIo, "cannot open " + path.string());
  res.set_content_provider(static_cast<std::size_t>(size), content_type,
                           [in](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                             std::vector<char> buf(std::min<std::size_t>(length, 1 << 16));
                             in->seekg(static_cast<std::streamoff>(offset));
                             in->read(buf.data(), static_cast<std::streamsize>(buf.size()));
                             const auto got = in->gcount();
                             if (got <= 0) return false;
                             return sink.write(buf.data(), static_cast<std::size_t>(got));
                           });
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kBounds:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kCapability:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kParse:
    case ErrorCode::kTruncation:
    case ErrorCode::kUnsupportedFormat:
    case ErrorCode::kEmptySequence:
    case ErrorCode::kMissingFrame:
    case ErrorCode::kDecoder:
    case ErrorCode::kDegenerateInput:
      return 422;
    case ErrorCode::kProtocol:
    case ErrorCode::kContractViolation:
    case ErrorCode::kBackend:
      return 502;
    case ErrorCode::kConfiguration:
    case ErrorCode::kBackendUnavailable:
      return 503;
    case ErrorCode::kIo:
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

std::string job_state_json(const JobRecord& r) {
  const auto& s = r.state;
  json j;
  j["id"] = r.spec.id;
  j["kind"] = input_kind_name(r.spec.kind);
  j["exponent"] = r.spec.exponent;
  j["backend"] = r.spec.backend;
  j["status"] = job_status_name(s.status);
  j["progress"] = s.progress;
  j["error"] = s.status == JobStatus::kFailed
                   ? json{{"code", s.error_code.value_or("internal")}, {"message", s.error_message.value_or("")}}
                   : json(nullptr);
  j["created_at"] = s.created_at;
  j["started_at"] = s.started_at ? json(*s.started_at) : json(nullptr);
  j["finished_at"] = s.finished_at ? json(*s.finished_at) : json(nullptr);
  json result = nullptr;
  if (s.status == JobStatus::kDone && s.result) {
    result = {{"frame_count", s.result->frame_count}, {"fps", fps_text(s.result->fps)}};
    if (r.spec.kind == InputKind::kImagePair) {
      result["frames_url"] = "/api/jobs/" + r.spec.id + "/frames";
      result["interpolated"] = s.result->frame_count - 2;
    } else {
      result["video_url"] = "/api/jobs/" + r.spec.id + "/video";
      result["container"] = s.result->container;
    }
  }
  j["result"] = result;
  return j.dump();
}

Server::Server(JobManager& jobs) : jobs_(jobs), http_(std::make_unique<httplib::Server>()) { routes(); }

Server::~Server() { stop(); }

int Server::bind() {
  const auto& cfg = jobs_.config();
  if (cfg.port == 0) {
    port_ = http_->bind_to_any_port(cfg.host);
    if (port_ <= 0) fail(ErrorCode::kIo, "cannot bind " + cfg.host);
  } else {
    if (!http_->bind_to_port(cfg.host, cfg.port)) {
      fail(ErrorCode::kIo, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    }
    port_ = cfg.port;
  }
  return port_;
}

void Server::serve() { http_->listen_after_bind(); }

void Server::stop() {
  if (http_) http_->stop();
}

void Server::routes() {
  auto& http = *http_;
  http.set_payload_max_length(jobs_.config().upload_limit);
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  if (!jobs_.config().static_dir.empty()) http.set_mount_point("/", jobs_.config().static_dir.string());

  http.Get("/api/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", kJson);
  });

  http.Get("/api/backends", guarded([this](const httplib::Request&, httplib::Response& res) {
    json arr = json::array();
    for (const auto& d : jobs_.backends().descriptors()) {
      arr.push_back({{"name", d.name},
                     {"kind", interp::backend_kind_name(d.kind)},
                     {"capability", interp::capability_name(d.capability)}});
    }
    res.set_content(arr.dump(), kJson);
  }));

  http.Post("/api/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) fail(ErrorCode::kValidation, "expected multipart/form-data");
    CreateJobRequest create;
    for (const auto& [name, item] : req.files) {
      if (!item.filename.empty()) {
        create.files.push_back({item.filename, item.content});
      } else if (name == "e" || name == "exponent") {
        create.exponent = parse_int_field(item.content, "e");
      } else if (name == "backend") {
        create.backend = item.content;
      }
    }
    const JobRecord r = jobs_.create(create);
    res.status = 201;
    res.set_header("Location", "/api/jobs/" + r.spec.id);
    res.set_content(json{{"id", r.spec.id}}.dump(), kJson);
  }));

  http.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(job_state_json(require_job(jobs_, req.matches[1])), kJson);
  }));

  http.Get(R"(/api/jobs/([^/]+)/video)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const JobRecord r = require_job(jobs_, req.matches[1]);
    if (r.spec.kind != InputKind::kVideo) {
      fail(ErrorCode::kConflict, "job input is an image pair; results are under /frames");
    }
    require_done(r);
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "y4m";
    const fs::path dir = jobs_.store().result_dir(r.spec.id);
    if (format == "y4m") {
      stream_file(res, dir / "video.y4m", "video/x-yuv4mpeg");
      return;
    }
    if (format != "container" && format != jobs_.config().container_extension) {
      fail(ErrorCode::kValidation, "unknown video format '" + format + "'");
    }
    if (!r.state.result || !r.state.result->container) {
      send_error(res, 503, "unavailable", "no encoder configured; the Y4M result is at ?format=y4m");
      return;
    }
    const std::string ext = jobs_.config().container_extension;
    const std::string type = ext == "mp4" ? "video/mp4" : ext == "webm" ? "video/webm" : "application/octet-stream";
    stream_file(res, dir / ("video." + ext), type.c_str());
  }));

  http.Get(R"(/api/jobs/([^/]+)/frames)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const JobRecord r = require_job(jobs_, req.matches[1]);
    if (r.spec.kind != InputKind::kImagePair) fail(ErrorCode::kConflict, "job input is a video; use /video");
    require_done(r);
    const std::size_t steps = std::size_t{1} << r.spec.exponent;
    json frames = json::array();
    for (std::size_t k = 1; k < steps; ++k) {
      frames.push_back({{"k", k}, {"t", static_cast<double>(k) / steps}, {"url", frame_url(r.spec.id, k)}});
    }
    const json endpoints = json::array({{{"k", 0}, {"t", 0.0}, {"url", frame_url(r.spec.id, 0)}},
                                        {{"k", steps}, {"t", 1.0}, {"url", frame_url(r.spec.id, steps)}}});
    res.set_content(json{{"id", r.spec.id}, {"exponent", r.spec.exponent}, {"count", steps - 1}, {"frames", frames},
                         {"endpoints", endpoints}}
                        .dump(),
                    kJson);
  }));

  http.Get(R"(/api/jobs/([^/]+)/frames/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const JobRecord r = require_job(jobs_, req.matches[1]);
    if (r.spec.kind != InputKind::kImagePair) fail(ErrorCode::kConflict, "job input is a video; use /video");
    require_done(r);
    const std::string ks = req.matches[2];
    const std::size_t steps = std::size_t{1} << r.spec.exponent;
    std::size_t k = 0;
    const auto [p, ec] = std::from_chars(ks.data(), ks.data() + ks.size(), k);
    if (ec != std::errc() || p != ks.data() + ks.size() || k > steps) {
      fail(ErrorCode::kNotFound, "frame " + ks + " out of range 0.." + std::to_string(steps));
    }
    const fs::path dir = jobs_.store().result_dir(r.spec.id) / "frames";
    media::FrameDirManifest m = media::read_frame_dir_manifest(dir);
    stream_file(res, media::frame_file(dir, m, static_cast<std::uint32_t>(k + 1)), "image/png");
  }));
}

}  // namespace slomo::service
