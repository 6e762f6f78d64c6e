#include "slomo/media/external_codec.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "slomo/error.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/y4m.hpp"
#include "slomo/subprocess.hpp"

namespace slomo::media {
namespace {

std::vector<std::string> command_for(const std::string& command_template, const char* placeholder,
                                     const std::string& value) {
  auto argv = split_command(command_template);
  if (argv.empty()) fail(ErrorCode::kConfiguration, "empty command template");
  const std::string key = std::string("{") + placeholder + "}";
  const bool has_placeholder =
      std::any_of(argv.begin(), argv.end(), [&](const auto& a) { return a.find(key) != std::string::npos; });
  if (!has_placeholder) argv.push_back(key);
  return expand_command(argv, {{placeholder, value}});
}

std::string trim_diagnostics(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text.empty() ? "(no diagnostics)" : text;
}

}  // namespace

bool looks_like_y4m(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".y4m") return true;
  std::ifstream in(path, std::ios::binary);
  char head[9] = {};
  in.read(head, sizeof head);
  return in.gcount() == 9 && std::memcmp(head, "YUV4MPEG2", 9) == 0;
}

FrameSequence decode_external(const std::filesystem::path& input, const std::string& decoder_command,
                              ColorRange range) {
  if (!std::filesystem::exists(input)) fail(ErrorCode::kIo, "no such file: " + input.string());
  if (looks_like_y4m(input)) return read_y4m_file(input, range);
  if (decoder_command.empty()) {
    fail(ErrorCode::kConfiguration,
         "no decoder configured for " + input.filename().string() +
             "; set --decoder-cmd, [media] decoder_cmd or " + kDecoderEnvVar);
  }
  const auto result = run_command(command_for(decoder_command, "input", input.string()));
  if (result.status != 0) {
    fail(ErrorCode::kDecoder, "decoder exited with status " + std::to_string(result.status) + ": " +
                                  trim_diagnostics(result.diagnostics));
  }
  try {
    return parse_y4m(result.output, range);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("decoder output: ") + e.what());
  }
}

FrameSequence load_media(const std::filesystem::path& input, const MediaConfig& config) {
  if (std::filesystem::is_directory(input)) return read_frame_dir(input);
  return decode_external(input, config.decoder_command, config.range);
}

void encode_external(const FrameSequence& seq, const std::string& encoder_command,
                     const std::filesystem::path& output, ColorRange range) {
  if (encoder_command.empty()) fail(ErrorCode::kConfiguration, "no encoder configured");
  const auto stream = emit_y4m(seq, Chroma::k420, range);
  const auto result = run_command(command_for(encoder_command, "output", output.string()), stream);
  if (result.status != 0) {
    fail(ErrorCode::kDecoder, "encoder exited with status " + std::to_string(result.status) + ": " +
                                  trim_diagnostics(result.diagnostics));
  }
}

}  // namespace slomo::media
