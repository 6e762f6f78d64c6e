#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "slomo/io_util.hpp"

namespace slomo::cli {
namespace {

namespace pt = boost::property_tree;

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) fail(ErrorCode::kConfiguration, key + ": '" + text + "' is not a number");
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  const auto v = parse_number<std::size_t>(text, key);
  if (v == 0) fail(ErrorCode::kConfiguration, key + " must be >= 1");
  return v;
}

}  // namespace

interp::FpsPolicy parse_fps_policy(const std::string& text) {
  if (text == "keep") return interp::FpsPolicy::kKeep;
  if (text == "upconvert") return interp::FpsPolicy::kUpconvert;
  fail(ErrorCode::kValidation, "fps policy must be keep or upconvert, got '" + text + "'");
}

ColorRange parse_color_range(const std::string& text) {
  if (text == "limited" || text == "tv") return ColorRange::kLimited;
  if (text == "full" || text == "pc") return ColorRange::kFull;
  fail(ErrorCode::kValidation, "color range must be limited or full, got '" + text + "'");
}

void apply_config_text(Settings& s, const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfiguration, std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      fail(ErrorCode::kConfiguration, "config: key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string v = node.data();
      const std::string name = section + "." + key;
      try {
        if (section == "media") {
          if (key == "decoder_cmd") s.media.decoder_command = v;
          else if (key == "encoder_cmd") s.media.encoder_command = v;
          else if (key == "range") s.media.range = parse_color_range(v);
          else if (key == "container_ext") s.container_extension = v;
          else fail(ErrorCode::kConfiguration, "config: unknown key " + name);
        } else if (section == "backend") {
          if (key == "name") s.backend.name = v;
          else if (key == "command") s.backend.command = v;
          else if (key == "pool_size") s.backend.pool_size = parse_count(v, name);
          else if (key == "visibility_sigma") s.backend.classical.visibility_sigma = parse_number<double>(v, name);
          else if (key == "block_size") s.backend.classical.flow.block_size = parse_number<int>(v, name);
          else if (key == "search_radius") s.backend.classical.flow.search_radius = parse_number<int>(v, name);
          else if (key == "levels") s.backend.classical.flow.levels = parse_number<int>(v, name);
          else fail(ErrorCode::kConfiguration, "config: unknown key " + name);
        } else if (section == "interp") {
          if (key == "exponent") s.exponent = parse_number<int>(v, name);
          else if (key == "fps_policy") s.fps_policy = parse_fps_policy(v);
          else if (key == "workers") s.workers = parse_count(v, name);
          else fail(ErrorCode::kConfiguration, "config: unknown key " + name);
        } else if (section == "service") {
          if (key == "host") s.host = v;
          else if (key == "port") s.port = parse_number<int>(v, name);
          else if (key == "workers") s.service_workers = parse_count(v, name);
          else if (key == "upload_limit") s.upload_limit = parse_count(v, name);
          else if (key == "ttl_hours") s.ttl_hours = parse_number<double>(v, name);
          else if (key == "data_dir") s.data_dir = v;
          else if (key == "static_dir") s.static_dir = v;
          else fail(ErrorCode::kConfiguration, "config: unknown key " + name);
        } else {
          fail(ErrorCode::kConfiguration, "config: unknown section [" + section + "]");
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfiguration) throw;
        fail(ErrorCode::kConfiguration, "config: " + name + ": " + e.what());
      }
    }
  }
}

void apply_config_file(Settings& settings, const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kConfiguration, std::string("config: ") + e.what());
  }
  apply_config_text(settings, text);
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v) return std::nullopt;
  return std::string(v);
}

void apply_environment(Settings& s, const EnvLookup& lookup) {
  if (auto v = lookup(media::kDecoderEnvVar)) s.media.decoder_command = *v;
  if (auto v = lookup(media::kEncoderEnvVar)) s.media.encoder_command = *v;
  if (auto v = lookup("SLOMO_BACKEND")) s.backend.name = *v;
  if (auto v = lookup("SLOMO_BACKEND_CMD")) s.backend.command = *v;
  if (auto v = lookup("SLOMO_WORKERS")) s.workers = parse_count(*v, "SLOMO_WORKERS");
}

}  // namespace slomo::cli
