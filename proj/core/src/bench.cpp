#include "slomo/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slomo/error.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/image_io.hpp"
#include "slomo/parallel.hpp"
#include "slomo/synthetic.hpp"

namespace slomo::bench {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

json stages_json(const interp::StageTimes& s) {
  return {{"flow", s.flow}, {"warp", s.warp}, {"blend", s.blend}, {"io", s.io}};
}

interp::StageTimes stages_from(const json& j) {
  return {j.at("flow").get<double>(), j.at("warp").get<double>(), j.at("blend").get<double>(),
          j.at("io").get<double>()};
}

json report_json(const EvalReport& r, bool include_timing) {
  json scores = json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"clip_id", s.clip_id},
                      {"t", s.t},
                      {"psnr", s.saturated() ? json(nullptr) : json(s.psnr)},
                      {"saturated", s.saturated()},
                      {"ssim", s.ssim}});
  }
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"clip_id", s.clip_id}, {"t", s.t}, {"reason", s.reason}});
  json j = json::object();
  j["backend"] = r.backend;
  j["frames"] = r.frames();
  j["psnr_mean"] = r.psnr_mean;
  j["psnr_std"] = r.psnr_std;
  j["ssim_mean"] = r.ssim_mean;
  j["ssim_std"] = r.ssim_std;
  j["saturated"] = r.saturated;
  j["scores"] = scores;
  j["skipped"] = skipped;
  if (include_timing && r.timing) {
    j["timing"] = {{"wall_seconds", r.timing->wall_seconds}, {"stages", stages_json(r.timing->stages)}};
  }
  return j;
}

EvalReport report_from(const json& j) {
  EvalReport r;
  r.backend = j.at("backend").get<std::string>();
  r.psnr_mean = j.at("psnr_mean").get<double>();
  r.psnr_std = j.at("psnr_std").get<double>();
  r.ssim_mean = j.at("ssim_mean").get<double>();
  r.ssim_std = j.at("ssim_std").get<double>();
  r.saturated = j.at("saturated").get<std::size_t>();
  for (const auto& s : j.at("scores")) {
    TripletScore ts;
    ts.clip_id = s.at("clip_id").get<std::string>();
    ts.t = s.at("t").get<std::uint32_t>();
    ts.psnr = s.at("psnr").is_null() ? metrics::kPsnrInfinite : s.at("psnr").get<double>();
    ts.ssim = s.at("ssim").get<double>();
    r.scores.push_back(std::move(ts));
  }
  for (const auto& s : j.at("skipped")) {
    r.skipped.push_back(
        {s.at("clip_id").get<std::string>(), s.at("t").get<std::uint32_t>(), s.at("reason").get<std::string>()});
  }
  if (j.at("frames").get<std::size_t>() != r.scores.size()) {
    fail(ErrorCode::kParse, "report for '" + r.backend + "': frames does not match the score list");
  }
  if (j.contains("timing")) {
    r.timing = EvalTiming{j.at("timing").at("wall_seconds").get<double>(), stages_from(j.at("timing").at("stages"))};
  }
  return r;
}

}  // namespace

dataset::TripletFrames MemoryTripletLoader::load(const dataset::Triplet& triplet) {
  const auto it = clips_.find(triplet.clip_id);
  if (it == clips_.end()) fail(ErrorCode::kNotFound, "unknown clip '" + triplet.clip_id + "'");
  const auto& frames = it->second.frames;
  if (triplet.last() >= frames.size()) throw MissingFrameError(triplet.last());
  return {frames[triplet.first()], frames[triplet.middle()], frames[triplet.last()]};
}

CorpusTripletLoader::CorpusTripletLoader(std::filesystem::path root, const std::vector<dataset::ClipManifest>& clips)
    : root_(std::move(root)) {
  for (const auto& c : clips) {
    std::filesystem::path dir = c.source_path.empty() ? std::filesystem::path(c.id) : std::filesystem::path(c.source_path);
    if (dir.is_relative()) dir = root_ / dir;
    clips_[c.id] = {dir, c.frame_count};
  }
}

dataset::TripletFrames CorpusTripletLoader::load(const dataset::Triplet& triplet) {
  const auto it = clips_.find(triplet.clip_id);
  if (it == clips_.end()) fail(ErrorCode::kNotFound, "unknown clip '" + triplet.clip_id + "'");
  const auto manifest = media::read_frame_dir_manifest(it->second.dir);
  auto read = [&](std::uint32_t index) {
    const auto path = media::frame_file(it->second.dir, manifest, index + 1);
    if (!std::filesystem::exists(path)) throw MissingFrameError(index + 1);
    return media::read_image(path);
  };
  dataset::TripletFrames out{read(triplet.first()), read(triplet.middle()), read(triplet.last())};
  require_same_size(out.first, out.middle, "triplet");
  require_same_size(out.first, out.last, "triplet");
  return out;
}

bool TripletScore::saturated() const noexcept { return std::isinf(psnr); }

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

void aggregate(EvalReport& report) {
  std::vector<double> p, s;
  report.saturated = 0;
  for (const auto& sc : report.scores) {
    if (sc.saturated()) ++report.saturated;
    p.push_back(std::min(sc.psnr, kPsnrCap));
    s.push_back(sc.ssim);
  }
  const auto mp = mean_std(p);
  const auto ms = mean_std(s);
  report.psnr_mean = mp.mean;
  report.psnr_std = mp.std;
  report.ssim_mean = ms.mean;
  report.ssim_std = ms.std;
}

EvalReport evaluate_backend(interp::Backend& backend, std::vector<dataset::Triplet> triplets, TripletLoader& loader,
                            const EvalOptions& options) {
  if (triplets.empty()) fail(ErrorCode::kValidation, "evaluation split has no triplets");
  std::sort(triplets.begin(), triplets.end());
  triplets.erase(std::unique(triplets.begin(), triplets.end()), triplets.end());

  const auto start = Clock::now();
  std::vector<std::optional<TripletScore>> scores(triplets.size());
  std::vector<std::string> skip_reason(triplets.size());
  std::vector<interp::StageTimes> times(triplets.size());

  parallel_for(triplets.size(), options.workers, [&](std::size_t i) {
    const auto& tr = triplets[i];
    dataset::TripletFrames frames;
    try {
      frames = loader.load(tr);
    } catch (const Error& e) {
      skip_reason[i] = e.what();
      return;
    }
    const Frame predicted = interp::interpolate(backend, frames.first, frames.last, interp::TimePoint::midpoint(),
                                                {&frames.middle, &times[i]});
    const auto score = metrics::score_pair(frames.middle, predicted, {}, options.ssim);
    scores[i] = TripletScore{tr.clip_id, tr.t, score.psnr, score.ssim};
  });

  EvalReport report;
  report.backend = backend.descriptor().name;
  interp::StageTimes total;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (scores[i]) {
      report.scores.push_back(*scores[i]);
    } else {
      report.skipped.push_back({triplets[i].clip_id, triplets[i].t, skip_reason[i]});
    }
    total += times[i];
  }
  const double fraction = static_cast<double>(report.skipped.size()) / static_cast<double>(triplets.size());
  if (fraction > options.max_skip_fraction) {
    fail(ErrorCode::kValidation, std::to_string(report.skipped.size()) + " of " + std::to_string(triplets.size()) +
                                     " triplets could not be loaded (limit " +
                                     fixed(options.max_skip_fraction * 100.0, 0) +
                                     "%); first: " + report.skipped.front().clip_id + "@" +
                                     std::to_string(report.skipped.front().t) + ": " + report.skipped.front().reason);
  }
  aggregate(report);
  if (options.record_timing) {
    report.timing = EvalTiming{std::chrono::duration<double>(Clock::now() - start).count(), total};
  }
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  fail(ErrorCode::kValidation, "unknown report format '" + std::string(name) + "' (json, csv, markdown)");
}

std::string write_report(std::span<const EvalReport> reports, ReportFormat format, const WriteOptions& options) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kJson: {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(report_json(r, options.include_timing));
      out << arr.dump(2) << "\n";
      break;
    }
    case ReportFormat::kCsv:
      out << kCsvHeader << "\n";
      for (const auto& r : reports) {
        out << r.backend << "," << shortest(r.psnr_mean) << "," << shortest(r.psnr_std) << ","
            << shortest(r.ssim_mean) << "," << shortest(r.ssim_std) << "," << r.frames() << "\n";
      }
      break;
    case ReportFormat::kMarkdown:
      out << "| Model | PSNR | SSIM |\n|---|---|---|\n";
      for (const auto& r : reports) {
        out << "| " << r.backend << " | " << fixed(r.psnr_mean, 1) << " | " << fixed(r.ssim_mean, 3) << " |\n";
      }
      break;
  }
  return out.str();
}

std::vector<EvalReport> parse_json_reports(const std::string& text) {
  std::vector<EvalReport> out;
  try {
    const json j = json::parse(text);
    if (!j.is_array()) fail(ErrorCode::kParse, "report document must be a JSON array");
    for (const auto& r : j) out.push_back(report_from(r));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("report: ") + e.what());
  }
  return out;
}

ThroughputStat throughput_bench(interp::Backend& backend, int width, int height, const ThroughputOptions& options) {
  if (options.frames < 1) fail(ErrorCode::kValidation, "throughput needs at least one frame");
  if (width < 1 || height < 1) fail(ErrorCode::kValidation, "throughput resolution must be positive");
  const Frame first = synthetic::texture_frame(options.seed, width, height, 0, 0);
  const Frame second = synthetic::texture_frame(options.seed, width, height, -4, 0);
  const Frame reference = synthetic::texture_frame(options.seed, width, height, -2, 0);
  const interp::InterpolationContext untimed{&reference, nullptr};
  for (std::size_t i = 0; i < options.warmup; ++i) {
    interp::interpolate(backend, first, second, interp::TimePoint::midpoint(), untimed);
  }
  ThroughputStat stat;
  stat.width = width;
  stat.height = height;
  stat.frames = options.frames;
  const auto start = Clock::now();
  for (std::size_t i = 0; i < options.frames; ++i) {
    interp::interpolate(backend, first, second, interp::TimePoint::midpoint(), {&reference, &stat.stages});
  }
  stat.elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  stat.fps = stat.elapsed > 0.0 ? static_cast<double>(stat.frames) / stat.elapsed : 0.0;
  return stat;
}

ThroughputSummary throughput_runs(interp::Backend& backend, int width, int height, std::size_t repeats,
                                  const ThroughputOptions& options) {
  if (repeats < 1) fail(ErrorCode::kValidation, "throughput needs at least one run");
  ThroughputSummary s;
  s.backend = backend.descriptor().name;
  std::vector<double> fps;
  for (std::size_t r = 0; r < repeats; ++r) {
    ThroughputOptions o = options;
    if (r > 0) o.warmup = 0;
    s.runs.push_back(throughput_bench(backend, width, height, o));
    fps.push_back(s.runs.back().fps);
  }
  s.fps_mean = mean_std(fps).mean;
  const auto [lo, hi] = std::minmax_element(fps.begin(), fps.end());
  s.fps_spread = s.fps_mean > 0.0 ? (*hi - *lo) / s.fps_mean : 0.0;
  return s;
}

std::string write_throughput(const ThroughputSummary& summary, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kJson: {
      json runs = json::array();
      for (const auto& r : summary.runs) {
        runs.push_back({{"width", r.width},
                        {"height", r.height},
                        {"frames", r.frames},
                        {"elapsed", r.elapsed},
                        {"fps", r.fps},
                        {"stages", stages_json(r.stages)}});
      }
      out << json{{"backend", summary.backend}, {"fps_mean", summary.fps_mean}, {"fps_spread", summary.fps_spread},
                  {"runs", runs}}
                 .dump(2)
          << "\n";
      break;
    }
    case ReportFormat::kCsv:
      out << "backend,run,width,height,frames,elapsed,fps,flow,warp,blend,io\n";
      for (std::size_t i = 0; i < summary.runs.size(); ++i) {
        const auto& r = summary.runs[i];
        out << summary.backend << "," << i << "," << r.width << "," << r.height << "," << r.frames << ","
            << shortest(r.elapsed) << "," << shortest(r.fps) << "," << shortest(r.stages.flow) << ","
            << shortest(r.stages.warp) << "," << shortest(r.stages.blend) << "," << shortest(r.stages.io) << "\n";
      }
      break;
    case ReportFormat::kMarkdown:
      out << "| Backend | Resolution | Frames | fps | flow s | warp s | blend s | io s |\n"
             "|---|---|---|---|---|---|---|---|\n";
      for (const auto& r : summary.runs) {
        out << "| " << summary.backend << " | " << r.width << "x" << r.height << " | " << r.frames << " | "
            << fixed(r.fps, 2) << " | " << fixed(r.stages.flow, 3) << " | " << fixed(r.stages.warp, 3) << " | "
            << fixed(r.stages.blend, 3) << " | " << fixed(r.stages.io, 3) << " |\n";
      }
      out << "\nfps mean " << fixed(summary.fps_mean, 2) << ", run-to-run spread " << fixed(summary.fps_spread * 100, 1)
          << "%\n";
      break;
  }
  return out.str();
}

}  // namespace slomo::bench
