#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slomo/backend.hpp"
#include "slomo/dataset.hpp"
#include "slomo/metrics.hpp"

namespace slomo::bench {

/// Saturated (infinite) PSNR values enter the aggregates as this.
inline constexpr double kPsnrCap = 100.0;
inline constexpr double kMaxSkipFraction = 0.10;

/// Supplies the three frames of a triplet.
class TripletLoader {
 public:
  virtual ~TripletLoader() = default;
  /// Throws on any unloadable frame. Must be safe to call concurrently.
  virtual dataset::TripletFrames load(const dataset::Triplet& triplet) = 0;
};

/// Clips held in memory, keyed by clip id.
class MemoryTripletLoader final : public TripletLoader {
 public:
  explicit MemoryTripletLoader(std::map<std::string, FrameSequence> clips) : clips_(std::move(clips)) {}
  dataset::TripletFrames load(const dataset::Triplet& triplet) override;

 private:
  std::map<std::string, FrameSequence> clips_;
};

/// Frame directories of a corpus. A clip's source path is resolved against
/// `root` unless absolute; triplet index t maps to frame file t + 1.
class CorpusTripletLoader final : public TripletLoader {
 public:
  CorpusTripletLoader(std::filesystem::path root, const std::vector<dataset::ClipManifest>& clips);
  dataset::TripletFrames load(const dataset::Triplet& triplet) override;

 private:
  struct Clip {
    std::filesystem::path dir;
    std::uint32_t frame_count = 0;
  };
  std::filesystem::path root_;
  std::map<std::string, Clip> clips_;
};

struct TripletScore {
  std::string clip_id;
  std::uint32_t t = 0;
  double psnr = 0.0;  // may be +inf
  double ssim = 0.0;

  bool saturated() const noexcept;
  friend bool operator==(const TripletScore&, const TripletScore&) = default;
};

struct SkippedTriplet {
  std::string clip_id;
  std::uint32_t t = 0;
  std::string reason;
  friend bool operator==(const SkippedTriplet&, const SkippedTriplet&) = default;
};

struct EvalTiming {
  double wall_seconds = 0.0;
  interp::StageTimes stages;
};

struct EvalReport {
  std::string backend;
  std::vector<TripletScore> scores;  // ordered by (clip_id, t)
  std::vector<SkippedTriplet> skipped;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  std::size_t saturated = 0;
  /// Wall-clock data; excluded from equality and from the default JSON form.
  std::optional<EvalTiming> timing;

  std::size_t frames() const noexcept { return scores.size(); }
  friend bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.backend == b.backend && a.scores == b.scores && a.skipped == b.skipped &&
           a.psnr_mean == b.psnr_mean && a.psnr_std == b.psnr_std && a.ssim_mean == b.ssim_mean &&
           a.ssim_std == b.ssim_std && a.saturated == b.saturated;
  }
};

/// Mean and sample standard deviation (n - 1); std is 0 for fewer than 2 values.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(std::span<const double> values);

/// Recomputes the aggregate fields from `scores` (PSNR capped at kPsnrCap).
void aggregate(EvalReport& report);

struct EvalOptions {
  std::size_t workers = 1;
  metrics::SsimOptions ssim;
  double max_skip_fraction = kMaxSkipFraction;
  bool record_timing = false;
};

/// Synthesizes the middle frame of each triplet at t = 1/2 and scores it
/// against the ground truth. Unloadable triplets are skipped and recorded;
/// more than `max_skip_fraction` skipped is a hard failure (kValidation).
EvalReport evaluate_backend(interp::Backend& backend, std::vector<dataset::Triplet> triplets,
                            TripletLoader& loader, const EvalOptions& options = {});

enum class ReportFormat { kJson, kCsv, kMarkdown };
ReportFormat parse_report_format(std::string_view name);

struct WriteOptions {
  bool include_timing = false;
};

/// One document covering every report. JSON is an array of report objects;
/// CSV and markdown have one row per backend.
std::string write_report(std::span<const EvalReport> reports, ReportFormat format, const WriteOptions& options = {});
std::vector<EvalReport> parse_json_reports(const std::string& text);

inline constexpr const char* kCsvHeader = "backend,psnr_mean,psnr_std,ssim_mean,ssim_std,frames";

// --- throughput -------------------------------------------------------------

struct ThroughputStat {
  int width = 0;
  int height = 0;
  std::size_t frames = 0;
  double elapsed = 0.0;
  double fps = 0.0;
  interp::StageTimes stages;
};

struct ThroughputOptions {
  std::size_t frames = 10;
  std::size_t warmup = 1;
  std::uint64_t seed = 1;
};

/// Synthesizes `frames` midpoints on a deterministic textured pair shifted
/// by 4 px. Warmup iterations run first and are not timed.
ThroughputStat throughput_bench(interp::Backend& backend, int width, int height,
                                const ThroughputOptions& options = {});

struct ThroughputSummary {
  std::string backend;
  std::vector<ThroughputStat> runs;
  double fps_mean = 0.0;
  /// (max fps - min fps) / mean fps across runs.
  double fps_spread = 0.0;
};

ThroughputSummary throughput_runs(interp::Backend& backend, int width, int height, std::size_t repeats,
                                  const ThroughputOptions& options = {});

std::string write_throughput(const ThroughputSummary& summary, ReportFormat format);

}  // namespace slomo::bench
