#pragma once

#include <filesystem>
#include <string>

#include "slomo/frame.hpp"

namespace slomo::media {

inline constexpr const char* kDecoderEnvVar = "SLOMO_DECODER_CMD";
inline constexpr const char* kEncoderEnvVar = "SLOMO_ENCODER_CMD";

/// Container formats are never parsed in-process. A decoder command template
/// (placeholder {input}) must write Y4M to stdout; an encoder template
/// (placeholder {output}) reads Y4M from stdin.
struct MediaConfig {
  std::string decoder_command;
  std::string encoder_command;
  ColorRange range = ColorRange::kLimited;
};

bool looks_like_y4m(const std::filesystem::path& path);

/// Y4M inputs are parsed natively; anything else goes through the decoder.
/// Throws kConfiguration when no decoder is configured or the executable is
/// missing, kDecoder when the child exits nonzero.
FrameSequence decode_external(const std::filesystem::path& input, const std::string& decoder_command,
                              ColorRange range = ColorRange::kLimited);

/// Directory -> frame dir, Y4M -> native, otherwise decode_external.
FrameSequence load_media(const std::filesystem::path& input, const MediaConfig& config);

/// Pipes the sequence as 4:2:0 Y4M into the encoder command.
void encode_external(const FrameSequence& seq, const std::string& encoder_command,
                     const std::filesystem::path& output, ColorRange range = ColorRange::kLimited);

}  // namespace slomo::media
