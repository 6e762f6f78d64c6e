#include "slomo/service/jobs.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "slomo/io_util.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/image_io.hpp"
#include "slomo/media/y4m.hpp"

namespace slomo::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecordName = "job.json";

InputKind parse_input_kind(std::string_view s) {
  if (s == "video") return InputKind::kVideo;
  if (s == "image_pair") return InputKind::kImagePair;
  fail(ErrorCode::kParse, "unknown input kind '" + std::string(s) + "'");
}

JobStatus parse_job_status(std::string_view s) {
  if (s == "queued") return JobStatus::kQueued;
  if (s == "running") return JobStatus::kRunning;
  if (s == "done") return JobStatus::kDone;
  if (s == "failed") return JobStatus::kFailed;
  fail(ErrorCode::kParse, "unknown job status '" + std::string(s) + "'");
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::string extension_of(const std::string& filename, const std::string& fallback) {
  std::string ext = fs::path(filename).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  const bool safe = ext.size() > 1 && ext.size() <= 6 &&
                    std::all_of(ext.begin() + 1, ext.end(), [](unsigned char c) { return std::isalnum(c); });
  return safe ? ext : fallback;
}

}  // namespace

std::string_view input_kind_name(InputKind kind) noexcept {
  return kind == InputKind::kVideo ? "video" : "image_pair";
}

std::string_view job_status_name(JobStatus status) noexcept {
  switch (status) {
    case JobStatus::kQueued: return "queued";
    case JobStatus::kRunning: return "running";
    case JobStatus::kDone: return "done";
    case JobStatus::kFailed: return "failed";
  }
  return "unknown";
}

double unix_now() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string format_job_record(const JobRecord& r) {
  json result = nullptr;
  if (r.state.result) {
    result = {{"frame_count", r.state.result->frame_count},
              {"fps_num", r.state.result->fps.num},
              {"fps_den", r.state.result->fps.den},
              {"container", r.state.result->container}};
  }
  const json j = {
      {"spec",
       {{"id", r.spec.id},
        {"kind", std::string(input_kind_name(r.spec.kind))},
        {"exponent", r.spec.exponent},
        {"backend", r.spec.backend},
        {"inputs", r.spec.inputs}}},
      {"state",
       {{"status", std::string(job_status_name(r.state.status))},
        {"progress", r.state.progress},
        {"error_code", opt(r.state.error_code)},
        {"error_message", opt(r.state.error_message)},
        {"created_at", r.state.created_at},
        {"started_at", opt(r.state.started_at)},
        {"finished_at", opt(r.state.finished_at)},
        {"result", result}}},
  };
  return j.dump(2) + "\n";
}

JobRecord parse_job_record(const std::string& text) {
  JobRecord r;
  try {
    const json j = json::parse(text);
    const json& s = j.at("spec");
    r.spec.id = s.at("id").get<std::string>();
    r.spec.kind = parse_input_kind(s.at("kind").get<std::string>());
    r.spec.exponent = s.at("exponent").get<int>();
    r.spec.backend = s.at("backend").get<std::string>();
    r.spec.inputs = s.at("inputs").get<std::vector<std::string>>();
    const json& st = j.at("state");
    r.state.status = parse_job_status(st.at("status").get<std::string>());
    r.state.progress = st.at("progress").get<double>();
    r.state.error_code = opt_from<std::string>(st, "error_code");
    r.state.error_message = opt_from<std::string>(st, "error_message");
    r.state.created_at = st.at("created_at").get<double>();
    r.state.started_at = opt_from<double>(st, "started_at");
    r.state.finished_at = opt_from<double>(st, "finished_at");
    if (st.contains("result") && !st.at("result").is_null()) {
      const json& res = st.at("result");
      r.state.result = JobResult{res.at("frame_count").get<std::size_t>(),
                                 {res.at("fps_num").get<std::uint32_t>(), res.at("fps_den").get<std::uint32_t>()},
                                 res.at("container").get<bool>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("job record: ") + e.what());
  }
  if (!is_valid_job_id(r.spec.id)) fail(ErrorCode::kParse, "job record has an invalid id");
  return r;
}

std::string new_job_id() {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  std::random_device rd;
  std::uint8_t bytes[16];
  for (int i = 0; i < 16; i += 4) {
    const std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) bytes[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::uint8_t b : bytes) {
    acc = (acc << 8) | b;
    bits += 8;
    while (bits >= 6) {
      bits -= 6;
      out += kAlphabet[(acc >> bits) & 63];
    }
  }
  if (bits > 0) out += kAlphabet[(acc << (6 - bits)) & 63];
  return out;
}

bool is_valid_job_id(std::string_view id) noexcept {
  return id.size() == 22 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '-' || c == '_';
         });
}

JobStore::JobStore(fs::path root) : jobs_(std::move(root) / "jobs") { fs::create_directories(jobs_); }

fs::path JobStore::job_dir(const std::string& id) const {
  if (!is_valid_job_id(id)) fail(ErrorCode::kNotFound, "no job '" + id + "'");
  return jobs_ / id;
}

void JobStore::save(const JobRecord& record) const {
  const fs::path dir = job_dir(record.spec.id);
  fs::create_directories(dir);
  write_file_atomic(dir / kRecordName, format_job_record(record));
}

std::optional<JobRecord> JobStore::load(const std::string& id) const {
  if (!is_valid_job_id(id)) return std::nullopt;
  const fs::path file = jobs_ / id / kRecordName;
  if (!fs::exists(file)) return std::nullopt;
  return parse_job_record(read_text_file(file));
}

std::vector<JobRecord> JobStore::load_all() const {
  std::vector<JobRecord> out;
  for (const auto& entry : fs::directory_iterator(jobs_)) {
    if (!entry.is_directory()) continue;
    try {
      if (auto r = load(entry.path().filename().string())) out.push_back(std::move(*r));
    } catch (const Error&) {
      // Unreadable records are left on disk for inspection.
    }
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
    return a.state.created_at != b.state.created_at ? a.state.created_at < b.state.created_at
                                                    : a.spec.id < b.spec.id;
  });
  return out;
}

void JobStore::remove(const std::string& id) const {
  std::error_code ec;
  fs::remove_all(job_dir(id), ec);
}

JobManager::JobManager(ServiceConfig config, interp::BackendRegistry& backends)
    : config_(std::move(config)), backends_(backends), store_(config_.data_dir) {
  if (config_.workers == 0) config_.workers = 1;
  for (auto& r : store_.load_all()) {
    if (r.state.status == JobStatus::kRunning || r.state.status == JobStatus::kQueued) {
      std::error_code ec;
      fs::remove_all(store_.job_dir(r.spec.id) / "result.tmp", ec);
      r.state.status = JobStatus::kQueued;
      r.state.progress = 0.0;
      r.state.started_at.reset();
      store_.save(r);
      queue_.push_back(r.spec.id);
    }
    jobs_.emplace(r.spec.id, std::move(r));
  }
  purge_expired(unix_now());
}

JobManager::~JobManager() { stop(); }

void JobManager::start() {
  std::lock_guard lock(mutex_);
  if (!workers_.empty() || stopping_) return;
  for (std::size_t i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
  janitor_ = std::thread([this] {
    const auto interval = std::clamp<std::chrono::seconds>(config_.ttl / 10, std::chrono::seconds(1),
                                                           std::chrono::seconds(60));
    std::unique_lock lock(mutex_);
    while (!stopping_) {
      wake_.wait_for(lock, interval, [&] { return stopping_; });
      if (stopping_) break;
      lock.unlock();
      purge_expired(unix_now());
      lock.lock();
    }
  });
}

void JobManager::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
  if (janitor_.joinable()) janitor_.join();
}

JobRecord JobManager::create(const CreateJobRequest& request) {
  interp::validate_exponent(request.exponent);
  backends_.get(request.backend);
  if (request.files.empty()) fail(ErrorCode::kValidation, "no media uploaded");
  if (request.files.size() > 2) {
    fail(ErrorCode::kValidation,
         "exactly two images required (or one video), got " + std::to_string(request.files.size()) + " files");
  }

  JobRecord record;
  record.spec.id = new_job_id();
  record.spec.exponent = request.exponent;
  record.spec.backend = request.backend;
  record.state.created_at = unix_now();

  // Everything is decoded before the job exists so bad uploads never queue.
  std::vector<std::pair<std::string, std::string>> inputs;  // name, bytes
  if (request.files.size() == 2) {
    record.spec.kind = InputKind::kImagePair;
    Frame frames[2];
    for (int i = 0; i < 2; ++i) {
      const auto& f = request.files[i];
      const auto bytes = as_bytes(f.content);
      if (media::sniff_image_format(bytes) == media::ImageFormat::kUnknown) {
        fail(ErrorCode::kUnsupportedFormat, "'" + f.filename + "' is not a PNG or JPEG image");
      }
      frames[i] = media::decode_image(bytes);
      inputs.emplace_back("image_" + std::to_string(i) + extension_of(f.filename, ".img"), f.content);
    }
    if (!frames[0].same_size(frames[1])) {
      fail(ErrorCode::kValidation, "images differ in size: " + std::to_string(frames[0].width()) + "x" +
                                       std::to_string(frames[0].height()) + " vs " +
                                       std::to_string(frames[1].width()) + "x" + std::to_string(frames[1].height()));
    }
  } else {
    record.spec.kind = InputKind::kVideo;
    const auto& f = request.files[0];
    const auto bytes = as_bytes(f.content);
    if (media::sniff_image_format(bytes) != media::ImageFormat::kUnknown) {
      fail(ErrorCode::kValidation, "a single image was uploaded; exactly two images required (or one video)");
    }
    std::string y4m;
    if (f.content.starts_with(media::kY4mSignature)) {
      validate_sequence(media::parse_y4m(bytes, config_.media.range));
      y4m = f.content;
      if (media::count_y4m_frames(bytes) < 2) fail(ErrorCode::kValidation, "video has fewer than 2 frames");
    } else {
      const fs::path tmp = fs::temp_directory_path() / ("slomo-upload-" + record.spec.id + extension_of(f.filename, ".bin"));
      write_file_atomic(tmp, bytes);
      FrameSequence seq;
      try {
        seq = media::decode_external(tmp, config_.media.decoder_command, config_.media.range);
      } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
      }
      std::error_code ec;
      fs::remove(tmp, ec);
      if (seq.size() < 2) fail(ErrorCode::kValidation, "video has fewer than 2 frames");
      const Chroma chroma = seq.y4m_header ? seq.y4m_header->chroma() : Chroma::k420;
      const auto out = media::emit_y4m(seq, chroma, config_.media.range);
      y4m.assign(out.begin(), out.end());
    }
    inputs.emplace_back("source.y4m", std::move(y4m));
  }

  const fs::path in_dir = store_.input_dir(record.spec.id);
  fs::create_directories(in_dir);
  for (const auto& [name, bytes] : inputs) {
    write_file_atomic(in_dir / name, as_bytes(bytes));
    record.spec.inputs.push_back(name);
  }
  store_.save(record);
  {
    std::lock_guard lock(mutex_);
    jobs_.emplace(record.spec.id, record);
    queue_.push_back(record.spec.id);
  }
  wake_.notify_one();
  return record;
}

std::optional<JobRecord> JobManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::size_t JobManager::running_count() const {
  std::lock_guard lock(mutex_);
  return running_;
}

std::size_t JobManager::purge_expired(double now) {
  std::vector<std::string> doomed;
  {
    std::lock_guard lock(mutex_);
    const double ttl = static_cast<double>(config_.ttl.count());
    for (auto it = jobs_.begin(); it != jobs_.end();) {
      const auto& st = it->second.state;
      const bool finished = st.status == JobStatus::kDone || st.status == JobStatus::kFailed;
      if (finished && st.finished_at && *st.finished_at + ttl < now) {
        doomed.push_back(it->first);
        it = jobs_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (const auto& id : doomed) store_.remove(id);
  return doomed.size();
}

bool JobManager::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return idle_.wait_for(lock, timeout, [&] { return queue_.empty() && running_ == 0; });
}

void JobManager::update(const std::string& id, const std::function<void(JobState&)>& fn) {
  std::lock_guard lock(mutex_);
  auto& rec = jobs_.at(id);
  fn(rec.state);
  store_.save(rec);
}

void JobManager::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      ++running_;
    }
    run_job(id);
    {
      std::lock_guard lock(mutex_);
      --running_;
    }
    idle_.notify_all();
  }
}

void JobManager::run_job(const std::string& id) {
  JobSpec spec;
  {
    std::lock_guard lock(mutex_);
    spec = jobs_.at(id).spec;
  }
  update(id, [](JobState& s) {
    s.status = JobStatus::kRunning;
    s.started_at = unix_now();
  });

  const fs::path staging = store_.job_dir(id) / "result.tmp";
  const fs::path final_dir = store_.result_dir(id);
  try {
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::remove_all(final_dir, ec);
    fs::create_directories(staging);

    FrameSequence input;
    const fs::path in_dir = store_.input_dir(id);
    if (spec.kind == InputKind::kImagePair) {
      for (const auto& name : spec.inputs) input.frames.push_back(media::read_image(in_dir / name));
    } else {
      input = media::read_y4m_file(in_dir / spec.inputs.at(0), config_.media.range);
    }

    interp::SlowmoOptions opts;
    opts.fps_policy = config_.fps_policy;
    opts.progress = [&](std::size_t done, std::size_t total) {
      const double p = total == 0 ? 1.0 : static_cast<double>(done) / static_cast<double>(total);
      std::lock_guard lock(mutex_);
      auto& st = jobs_.at(id).state;
      st.progress = std::max(st.progress, std::min(p, 1.0));
    };
    const FrameSequence out = interp::recursive_interpolate(input, spec.exponent, backends_.get(spec.backend), opts);

    JobResult result{out.size(), out.fps, false};
    if (spec.kind == InputKind::kImagePair) {
      media::write_frame_dir(staging / "frames", out);
    } else {
      const Chroma chroma = out.y4m_header ? out.y4m_header->chroma() : Chroma::k420;
      media::write_y4m_file(staging / "video.y4m", out, chroma, config_.media.range);
      if (!config_.media.encoder_command.empty()) {
        media::encode_external(out, config_.media.encoder_command, staging / ("video." + config_.container_extension),
                               config_.media.range);
        result.container = true;
      }
    }
    fs::rename(staging, final_dir);
    update(id, [&](JobState& s) {
      s.status = JobStatus::kDone;
      s.progress = 1.0;
      s.finished_at = unix_now();
      s.result = result;
    });
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::remove_all(final_dir, ec);
    const auto* err = dynamic_cast<const Error*>(&e);
    const std::string code(err ? error_code_name(err->code()) : "internal");
    update(id, [&](JobState& s) {
      s.status = JobStatus::kFailed;
      s.finished_at = unix_now();
      s.error_code = code;
      s.error_message = e.what();
    });
  }
}

}  // namespace slomo::service
