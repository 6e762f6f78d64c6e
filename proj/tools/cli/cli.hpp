#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slomo/backend.hpp"
#include "slomo/error.hpp"
#include "slomo/media/external_codec.hpp"
#include "slomo/slowmo.hpp"

namespace slomo::cli {

/// Process exit statuses. Stable; scripts may rely on them.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,     // bad flags or arguments, failed validation
  kExitIo = 3,        // missing or unwritable files
  kExitMedia = 4,     // undecodable or malformed input
  kExitBackend = 5,   // interpolation backend failure
  kExitConfig = 6,    // config file or external command setup
};

int exit_code_for(ErrorCode code) noexcept;

/// Every tunable value. Layered as defaults < config file < flags < environment.
struct Settings {
  media::MediaConfig media;
  std::string container_extension = "mp4";
  interp::BackendConfig backend;
  std::size_t workers = 1;
  int exponent = 2;
  interp::FpsPolicy fps_policy = interp::FpsPolicy::kKeep;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t service_workers = 1;
  std::size_t upload_limit = 512u << 20;
  double ttl_hours = 24.0;
  std::filesystem::path data_dir = "slomo-data";
  std::filesystem::path static_dir;
};

/// INI file with [media], [backend], [interp] and [service] sections.
/// Unknown keys are a configuration error.
void apply_config_file(Settings& settings, const std::filesystem::path& path);
void apply_config_text(Settings& settings, const std::string& text);

/// SLOMO_DECODER_CMD, SLOMO_ENCODER_CMD, SLOMO_BACKEND, SLOMO_BACKEND_CMD, SLOMO_WORKERS.
using EnvLookup = std::function<std::optional<std::string>(const char*)>;
void apply_environment(Settings& settings, const EnvLookup& lookup);
std::optional<std::string> process_env(const char* name);

interp::FpsPolicy parse_fps_policy(const std::string& text);
ColorRange parse_color_range(const std::string& text);

/// Runs the command line. Data streams go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const EnvLookup& env = process_env);

}  // namespace slomo::cli
