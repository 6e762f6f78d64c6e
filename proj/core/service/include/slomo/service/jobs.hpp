#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "slomo/backend.hpp"
#include "slomo/error.hpp"
#include "slomo/media/external_codec.hpp"
#include "slomo/slowmo.hpp"

namespace slomo::service {

enum class InputKind : std::uint8_t { kVideo, kImagePair };
enum class JobStatus : std::uint8_t { kQueued, kRunning, kDone, kFailed };

std::string_view input_kind_name(InputKind kind) noexcept;
std::string_view job_status_name(JobStatus status) noexcept;

struct JobSpec {
  std::string id;
  InputKind kind = InputKind::kImagePair;
  int exponent = 2;
  std::string backend = "classical";
  /// File names under the job's input/ directory.
  std::vector<std::string> inputs;
  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

struct JobResult {
  std::size_t frame_count = 0;  // including the source frames
  Rational fps{30, 1};
  bool container = false;       // an encoded container file exists
  friend bool operator==(const JobResult&, const JobResult&) = default;
};

struct JobState {
  JobStatus status = JobStatus::kQueued;
  double progress = 0.0;
  std::optional<std::string> error_code;
  std::optional<std::string> error_message;
  double created_at = 0.0;  // unix seconds
  std::optional<double> started_at;
  std::optional<double> finished_at;
  std::optional<JobResult> result;
  friend bool operator==(const JobState&, const JobState&) = default;
};

struct JobRecord {
  JobSpec spec;
  JobState state;
  friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

std::string format_job_record(const JobRecord& record);
JobRecord parse_job_record(const std::string& text);

/// 128 random bits, base64url without padding (22 characters).
std::string new_job_id();
bool is_valid_job_id(std::string_view id) noexcept;

/// One directory per job under <root>/jobs/<id>: job.json, input/, result/.
class JobStore {
 public:
  explicit JobStore(std::filesystem::path root);

  std::filesystem::path job_dir(const std::string& id) const;
  std::filesystem::path input_dir(const std::string& id) const { return job_dir(id) / "input"; }
  std::filesystem::path result_dir(const std::string& id) const { return job_dir(id) / "result"; }

  void save(const JobRecord& record) const;
  std::optional<JobRecord> load(const std::string& id) const;
  /// Every readable record, sorted by (created_at, id).
  std::vector<JobRecord> load_all() const;
  void remove(const std::string& id) const;

 private:
  std::filesystem::path jobs_;
};

struct UploadedFile {
  std::string filename;
  std::string content;
};

struct CreateJobRequest {
  std::vector<UploadedFile> files;
  int exponent = 2;
  std::string backend = "classical";
};

struct ServiceConfig {
  std::filesystem::path data_dir = "slomo-data";
  std::size_t workers = 1;
  std::size_t upload_limit = 512u << 20;
  std::chrono::seconds ttl{24 * 3600};
  media::MediaConfig media;
  /// File extension of encoded containers, used when an encoder is configured.
  std::string container_extension = "mp4";
  interp::FpsPolicy fps_policy = interp::FpsPolicy::kKeep;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;
};

/// Owns the job queue and the synthesis workers. Thread-safe.
class JobManager {
 public:
  /// Recovers persisted jobs: queued and running jobs are queued again in
  /// creation order. Workers start only on start().
  JobManager(ServiceConfig config, interp::BackendRegistry& backends);
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  void start();
  void stop();

  /// Validates and decodes the upload, persists it and enqueues the job.
  JobRecord create(const CreateJobRequest& request);
  std::optional<JobRecord> get(const std::string& id) const;

  const ServiceConfig& config() const noexcept { return config_; }
  const JobStore& store() const noexcept { return store_; }
  interp::BackendRegistry& backends() noexcept { return backends_; }

  /// Deletes finished jobs older than the TTL. Returns how many were removed.
  std::size_t purge_expired(double now);
  /// Blocks until the queue is empty and no job runs, or the timeout passes.
  bool wait_idle(std::chrono::milliseconds timeout);
  std::size_t running_count() const;

 private:
  void worker_loop();
  void run_job(const std::string& id);
  void update(const std::string& id, const std::function<void(JobState&)>& fn);

  ServiceConfig config_;
  interp::BackendRegistry& backends_;
  JobStore store_;

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::map<std::string, JobRecord> jobs_;
  std::deque<std::string> queue_;
  std::size_t running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::thread janitor_;
};

double unix_now();

}  // namespace slomo::service
