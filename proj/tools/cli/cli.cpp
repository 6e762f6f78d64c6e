#include "cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "slomo/bench.hpp"
#include "slomo/dataset.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/image_io.hpp"
#include "slomo/media/y4m.hpp"
#include "slomo/service/server.hpp"

namespace slomo::cli {
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kBounds:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kConflict:
      return kExitUsage;
    case ErrorCode::kIo:
    case ErrorCode::kNotFound:
      return kExitIo;
    case ErrorCode::kParse:
    case ErrorCode::kTruncation:
    case ErrorCode::kUnsupportedFormat:
    case ErrorCode::kEmptySequence:
    case ErrorCode::kMissingFrame:
    case ErrorCode::kDecoder:
    case ErrorCode::kDegenerateInput:
      return kExitMedia;
    case ErrorCode::kCapability:
    case ErrorCode::kProtocol:
    case ErrorCode::kContractViolation:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kBackend:
      return kExitBackend;
    case ErrorCode::kConfiguration:
      return kExitConfig;
    case ErrorCode::kInternal:
      return kExitInternal;
  }
  return kExitInternal;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string fps_text(Rational r) { return std::to_string(r.num) + "/" + std::to_string(r.den); }

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    out.flush();
  } else {
    write_file_atomic(path, text);
  }
}

// Flags shared by several subcommands. Each keeps whether it was given so the
// layering can tell "set on the command line" from "left at default".
struct CommonFlags {
  std::string config;
  std::optional<std::size_t> workers;
  std::optional<std::string> backend_cmd;
  std::optional<std::string> decoder_cmd;
  std::optional<std::string> encoder_cmd;
  std::optional<std::string> range;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
    app.add_option("--backend-cmd", backend_cmd, "Command template of the external backend");
    app.add_option("--decoder-cmd", decoder_cmd, "Decoder command template; must write Y4M to stdout");
    app.add_option("--encoder-cmd", encoder_cmd, "Encoder command template; reads Y4M on stdin");
    app.add_option("--range", range, "YCbCr range of Y4M data: limited or full");
  }

  void apply(Settings& s) const {
    if (workers) s.workers = *workers;
    if (backend_cmd) s.backend.command = *backend_cmd;
    if (decoder_cmd) s.media.decoder_command = *decoder_cmd;
    if (encoder_cmd) s.media.encoder_command = *encoder_cmd;
    if (range) s.media.range = parse_color_range(*range);
  }
};

Settings layered_settings(const CommonFlags& common, const std::function<void(Settings&)>& flags,
                          const EnvLookup& env) {
  Settings s;
  if (!common.config.empty()) apply_config_file(s, common.config);
  common.apply(s);
  flags(s);
  apply_environment(s, env);
  return s;
}

interp::BackendConfig backend_named(const Settings& s, const std::string& name) {
  interp::BackendConfig cfg = s.backend;
  cfg.name = name;
  cfg.classical.flow.workers = 1;
  return cfg;
}

// --- slomo ------------------------------------------------------------------

enum class OutputKind { kY4m, kFrames, kContainer };

OutputKind output_kind(const std::string& output, const std::string& format) {
  if (format == "y4m") return OutputKind::kY4m;
  if (format == "frames") return OutputKind::kFrames;
  if (format == "container") return OutputKind::kContainer;
  if (!format.empty()) fail(ErrorCode::kValidation, "output format must be y4m, frames or container");
  if (output == "-") return OutputKind::kY4m;
  const fs::path p(output);
  if (p.extension() == ".y4m") return OutputKind::kY4m;
  if (p.extension().empty() || fs::is_directory(p)) return OutputKind::kFrames;
  return OutputKind::kContainer;
}

struct SlomoArgs {
  CommonFlags common;
  std::string input;
  std::string output;
  std::optional<int> exponent;
  std::optional<std::string> backend;
  std::optional<std::string> fps_policy;
  std::string format;
};

int cmd_slomo(const SlomoArgs& a, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  const Settings s = layered_settings(a.common, [&](Settings& st) {
    if (a.exponent) st.exponent = *a.exponent;
    if (a.backend) st.backend.name = *a.backend;
    if (a.fps_policy) st.fps_policy = parse_fps_policy(*a.fps_policy);
  }, env);
  interp::validate_exponent(s.exponent);
  const OutputKind kind = output_kind(a.output, a.format);
  if (kind == OutputKind::kContainer && s.media.encoder_command.empty()) {
    fail(ErrorCode::kConfiguration, "writing " + a.output + " needs an encoder (--encoder-cmd or " +
                                        media::kEncoderEnvVar + "); use .y4m or a directory instead");
  }
  if (a.output != "-" && kind != OutputKind::kFrames) {
    const fs::path parent = fs::path(a.output).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) fail(ErrorCode::kIo, "output directory " + parent.string() + " does not exist");
  }

  const FrameSequence input = media::load_media(a.input, s.media);
  auto backend = interp::make_backend(backend_named(s, s.backend.name));

  interp::SlowmoOptions opts;
  opts.workers = s.workers;
  opts.fps_policy = s.fps_policy;
  interp::StageTimes times;
  opts.times = &times;
  const auto start = Clock::now();
  const FrameSequence result = interp::recursive_interpolate(input, s.exponent, *backend, opts);
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

  const Chroma chroma = input.y4m_header ? input.y4m_header->chroma() : Chroma::k444;
  switch (kind) {
    case OutputKind::kY4m: {
      const auto bytes = media::emit_y4m(result, chroma, s.media.range);
      if (a.output == "-") {
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
      } else {
        write_file_atomic(a.output, bytes);
      }
      break;
    }
    case OutputKind::kFrames:
      media::write_frame_dir(a.output, result);
      break;
    case OutputKind::kContainer:
      media::encode_external(result, s.media.encoder_command, a.output, s.media.range);
      break;
  }

  std::ostream& report = a.output == "-" ? err : out;
  const std::size_t synthesized = result.size() - input.size();
  report << "input_frames=" << input.size() << " output_frames=" << result.size() << " exponent=" << s.exponent
         << " backend=" << backend->descriptor().name << " fps=" << fps_text(result.fps)
         << " elapsed_s=" << elapsed << " synth_fps=" << (elapsed > 0 ? synthesized / elapsed : 0.0) << "\n";
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  CommonFlags common;
  std::string corpus;
  std::string split_file;
  std::uint64_t seed = 0;
  std::string ratios = "0.8,0.1,0.1";
  std::string subset = "test";
  std::uint32_t stride = 1;
  std::vector<std::string> backends;
  std::string format = "json";
  std::string output;
  bool timing = false;
  std::string ssim_window = "uniform";
};

struct Corpus {
  fs::path root;
  std::vector<dataset::ClipManifest> clips;
};

Corpus load_corpus(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::kIo, "corpus " + path.string() + " does not exist");
  Corpus c;
  if (fs::is_directory(path)) {
    c.root = path;
    c.clips = dataset::scan_corpus_dir(path);
  } else {
    c.root = path.parent_path();
    c.clips = dataset::parse_corpus(read_text_file(path));
  }
  dataset::validate_corpus(c.clips);
  return c;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  const Settings s = layered_settings(a.common, [](Settings&) {}, env);
  const auto format = bench::parse_report_format(a.format);
  metrics::SsimOptions ssim;
  if (a.ssim_window == "gaussian") {
    ssim.window = metrics::SsimWindow::kGaussian11;
  } else if (a.ssim_window != "uniform") {
    fail(ErrorCode::kValidation, "ssim window must be uniform or gaussian");
  }
  const auto subset = dataset::parse_split(a.subset);
  const Corpus corpus = load_corpus(a.corpus);

  dataset::SplitAssignment split;
  if (!a.split_file.empty() && fs::exists(a.split_file)) {
    split = dataset::parse_split_file(read_text_file(a.split_file));
  } else {
    split = dataset::split_clips(corpus.clips, dataset::parse_ratios(a.ratios), a.seed);
    if (!a.split_file.empty()) write_file_atomic(a.split_file, dataset::format_split_file(split));
  }
  const auto index = dataset::build_triplet_index(corpus.clips, split, a.stride);
  for (const auto& w : index.warnings) err << "warning: " << one_line(w) << "\n";
  const auto triplets = index.in(subset);

  std::vector<std::string> names = a.backends;
  if (names.empty()) names.push_back(s.backend.name);
  bench::CorpusTripletLoader loader(corpus.root, corpus.clips);
  bench::EvalOptions opts;
  opts.workers = s.workers;
  opts.ssim = ssim;
  opts.record_timing = a.timing;
  std::vector<bench::EvalReport> reports;
  for (const auto& name : names) {
    auto backend = interp::make_backend(backend_named(s, name));
    reports.push_back(bench::evaluate_backend(*backend, triplets, loader, opts));
    for (const auto& sk : reports.back().skipped) {
      err << "warning: skipped " << sk.clip_id << "@" << sk.t << ": " << one_line(sk.reason) << "\n";
    }
  }
  write_output(a.output, bench::write_report(reports, format, {a.timing}), out);
  return kExitOk;
}

// --- dataset ----------------------------------------------------------------

struct DatasetArgs {
  CommonFlags common;
  std::string corpus_dir;
  std::string output;
  std::uint64_t seed = 0;
  std::string ratios = "0.8,0.1,0.1";
  std::uint32_t stride = 1;
  bool augment = false;
  std::string crop = "448x256";
};

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos) fail(ErrorCode::kValidation, "size must look like WxH, got '" + text + "'");
  try {
    std::size_t p1 = 0, p2 = 0;
    const int w = std::stoi(text.substr(0, x), &p1);
    const int h = std::stoi(text.substr(x + 1), &p2);
    if (p1 != x || p2 != text.size() - x - 1 || w < 1 || h < 1) throw std::invalid_argument("size");
    return {w, h};
  } catch (const std::logic_error&) {
    fail(ErrorCode::kValidation, "size must look like WxH, got '" + text + "'");
  }
}

int cmd_dataset(const DatasetArgs& a, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  layered_settings(a.common, [](Settings&) {}, env);
  const auto ratios = dataset::parse_ratios(a.ratios);
  const auto [crop_w, crop_h] = parse_size(a.crop);
  const Corpus corpus = load_corpus(a.corpus_dir);
  const auto split = dataset::split_clips(corpus.clips, ratios, a.seed);
  const auto index = dataset::build_triplet_index(corpus.clips, split, a.stride);

  fs::create_directories(a.output);
  const fs::path dir(a.output);
  write_file_atomic(dir / "corpus.json", dataset::format_corpus(corpus.clips));
  write_file_atomic(dir / "splits.json", dataset::format_split_file(split));
  write_file_atomic(dir / "triplets.json", dataset::format_triplet_index(index));
  for (const auto& w : index.warnings) err << "warning: " << one_line(w) << "\n";

  if (a.augment) {
    std::map<std::string, std::pair<int, int>> sizes;
    for (const auto& c : corpus.clips) {
      fs::path clip_dir = c.source_path.empty() ? fs::path(c.id) : fs::path(c.source_path);
      if (clip_dir.is_relative()) clip_dir = corpus.root / clip_dir;
      const auto m = media::read_frame_dir_manifest(clip_dir);
      sizes[c.id] = media::probe_image_size(media::frame_file(clip_dir, m, 1));
    }
    std::string lines;
    std::size_t skipped = 0;
    for (const auto& t : index.in(dataset::Split::kTrain)) {
      const auto [w, h] = sizes.at(t.clip_id);
      if (w < crop_w || h < crop_h) {
        ++skipped;
        continue;
      }
      const auto plan = dataset::plan_augmentation(w, h, dataset::derive_seed(a.seed, t.clip_id, t.t), crop_w, crop_h);
      lines += dataset::format_augmentation_line(t, plan) + "\n";
    }
    if (skipped > 0) err << "warning: " << skipped << " training triplet(s) smaller than the crop were not augmented\n";
    write_file_atomic(dir / "augmentations.jsonl", lines);
  }

  out << "clips=" << corpus.clips.size() << " train=" << split.clips_in(dataset::Split::kTrain).size()
      << " val=" << split.clips_in(dataset::Split::kVal).size()
      << " test=" << split.clips_in(dataset::Split::kTest).size() << " triplets=" << index.entries.size()
      << " warnings=" << index.warnings.size() << "\n";
  return kExitOk;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  CommonFlags common;
  std::optional<std::string> backend;
  std::string resolution = "448x256";
  std::size_t frames = 10;
  std::size_t warmup = 1;
  std::size_t repeats = 3;
  std::string format = "markdown";
  std::string output;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream&, const EnvLookup& env) {
  const Settings s = layered_settings(a.common, [&](Settings& st) {
    if (a.backend) st.backend.name = *a.backend;
  }, env);
  const auto format = bench::parse_report_format(a.format);
  const auto [w, h] = parse_size(a.resolution);
  auto backend = interp::make_backend(backend_named(s, s.backend.name));
  bench::ThroughputOptions opts;
  opts.frames = a.frames;
  opts.warmup = a.warmup;
  const auto summary = bench::throughput_runs(*backend, w, h, a.repeats, opts);
  write_output(a.output, bench::write_throughput(summary, format), out);
  return kExitOk;
}

// --- serve ------------------------------------------------------------------

struct ServeArgs {
  CommonFlags common;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::optional<std::size_t> upload_limit;
  std::optional<double> ttl_hours;
  std::optional<std::string> static_dir;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  const Settings s = layered_settings(a.common, [&](Settings& st) {
    if (a.host) st.host = *a.host;
    if (a.port) st.port = *a.port;
    if (a.data_dir) st.data_dir = *a.data_dir;
    if (a.upload_limit) st.upload_limit = *a.upload_limit;
    if (a.ttl_hours) st.ttl_hours = *a.ttl_hours;
    if (a.static_dir) st.static_dir = *a.static_dir;
    if (a.common.workers) st.service_workers = *a.common.workers;
  }, env);
  if (!(s.ttl_hours > 0)) fail(ErrorCode::kConfiguration, "ttl must be positive");

  // Signals are taken synchronously by a dedicated thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  interp::BackendConfig external = s.backend;
  external.classical.flow.workers = 1;
  auto registry = interp::BackendRegistry::with_builtins(external);

  service::ServiceConfig cfg;
  cfg.data_dir = s.data_dir;
  cfg.workers = s.service_workers;
  cfg.upload_limit = s.upload_limit;
  cfg.ttl = std::chrono::seconds(static_cast<long long>(s.ttl_hours * 3600));
  cfg.media = s.media;
  cfg.container_extension = s.container_extension;
  cfg.fps_policy = s.fps_policy;
  cfg.host = s.host;
  cfg.port = s.port;
  cfg.static_dir = s.static_dir;

  service::JobManager jobs(cfg, registry);
  service::Server server(jobs);
  const int port = server.bind();
  jobs.start();
  out << "listening on http://" << cfg.host << ":" << port << "\n";
  out.flush();

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  jobs.stop();
  err << "server stopped\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Slow-motion synthesis and evaluation toolkit", "slomo"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SlomoArgs slomo_args;
  auto* slomo = app.add_subcommand("slomo", "Insert 2^e - 1 frames between every input pair");
  slomo_args.common.attach(*slomo);
  slomo->add_option("input", slomo_args.input, "Y4M file, frame directory, or container (needs a decoder)")->required();
  slomo->add_option("-o,--output", slomo_args.output, "Output .y4m, directory, container file, or - for stdout")->required();
  slomo->add_option("-e,--exponent", slomo_args.exponent, "Number of midpoint passes, 1..5");
  slomo->add_option("-b,--backend", slomo_args.backend, "classical, blend or external");
  slomo->add_option("--fps-policy", slomo_args.fps_policy, "keep (slow motion) or upconvert");
  slomo->add_option("--format", slomo_args.format, "Force y4m, frames or container output");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score backends on a split of a corpus");
  eval_args.common.attach(*eval);
  eval->add_option("--corpus", eval_args.corpus, "Corpus directory or corpus.json")->required();
  eval->add_option("--split", eval_args.split_file, "Split file; created from --seed/--ratios if missing");
  eval->add_option("--seed", eval_args.seed, "Split seed");
  eval->add_option("--ratios", eval_args.ratios, "train,val,test ratios");
  eval->add_option("--subset", eval_args.subset, "Split to score: test, val or train");
  eval->add_option("--stride", eval_args.stride, "Triplet stride")->check(CLI::PositiveNumber);
  eval->add_option("-b,--backend", eval_args.backends, "Backend to score; repeat for a comparison table");
  eval->add_option("--format", eval_args.format, "json, csv or markdown");
  eval->add_option("-o,--output", eval_args.output, "Report path; stdout when omitted");
  eval->add_flag("--timing", eval_args.timing, "Record wall-clock timing in JSON reports");
  eval->add_option("--ssim-window", eval_args.ssim_window, "uniform (7x7) or gaussian (11x11, sigma 1.5)");

  DatasetArgs dataset_args;
  auto* ds = app.add_subcommand("dataset", "Write corpus, split and triplet index files");
  dataset_args.common.attach(*ds);
  ds->add_option("corpus", dataset_args.corpus_dir, "Directory of clip frame directories")->required();
  ds->add_option("-o,--output", dataset_args.output, "Output directory")->required();
  ds->add_option("--seed", dataset_args.seed, "Split seed");
  ds->add_option("--ratios", dataset_args.ratios, "train,val,test ratios");
  ds->add_option("--stride", dataset_args.stride, "Triplet stride")->check(CLI::PositiveNumber);
  ds->add_flag("--augment", dataset_args.augment, "Also write augmentations.jsonl for training triplets");
  ds->add_option("--crop", dataset_args.crop, "Augmentation crop size WxH");

  BenchArgs bench_args;
  auto* bn = app.add_subcommand("bench", "Measure synthesis throughput");
  bench_args.common.attach(*bn);
  bn->add_option("-b,--backend", bench_args.backend, "Backend to time");
  bn->add_option("--resolution", bench_args.resolution, "WxH");
  bn->add_option("--frames", bench_args.frames, "Frames per run")->check(CLI::PositiveNumber);
  bn->add_option("--warmup", bench_args.warmup, "Untimed frames before the first run");
  bn->add_option("--repeats", bench_args.repeats, "Timed runs")->check(CLI::PositiveNumber);
  bn->add_option("--format", bench_args.format, "json, csv or markdown");
  bn->add_option("-o,--output", bench_args.output, "Report path; stdout when omitted");

  ServeArgs serve_args;
  auto* sv = app.add_subcommand("serve", "Run the HTTP job service");
  serve_args.common.attach(*sv);
  sv->add_option("--host", serve_args.host, "Listen address");
  sv->add_option("--port", serve_args.port, "Listen port; 0 picks one");
  sv->add_option("--data-dir", serve_args.data_dir, "Job storage directory");
  sv->add_option("--upload-limit", serve_args.upload_limit, "Maximum request body in bytes");
  sv->add_option("--ttl-hours", serve_args.ttl_hours, "Finished jobs are deleted after this long");
  sv->add_option("--static-dir", serve_args.static_dir, "Serve web UI files from this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "slomo: error: usage: " << one_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (slomo->parsed()) return cmd_slomo(slomo_args, out, err, env);
    if (eval->parsed()) return cmd_eval(eval_args, out, err, env);
    if (ds->parsed()) return cmd_dataset(dataset_args, out, err, env);
    if (bn->parsed()) return cmd_bench(bench_args, out, err, env);
    if (sv->parsed()) return cmd_serve(serve_args, out, err, env);
  } catch (const Error& e) {
    err << "slomo: error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "slomo: error: internal: " << one_line(e.what()) << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace slomo::cli
