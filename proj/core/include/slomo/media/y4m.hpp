#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo {

/// YUV4MPEG2 stream header. Optional tokens remember whether they were
/// present so that a parsed header re-emits unchanged.
struct Y4mHeader {
  int width = 0;
  int height = 0;
  Rational fps{30, 1};
  std::optional<char> interlace;           // I token: p, t, b, m or ?
  std::optional<Rational> pixel_aspect;    // A token; 0:0 means unknown
  std::optional<std::string> chroma_tag;   // C token without the leading 'C'
  std::vector<std::string> extensions;     // X tokens, verbatim

  /// Subsampling implied by the C token (absent means 4:2:0).
  Chroma chroma() const;

  friend bool operator==(const Y4mHeader&, const Y4mHeader&) = default;
};

}  // namespace slomo

namespace slomo::media {

inline constexpr std::string_view kY4mSignature = "YUV4MPEG2";
inline constexpr std::string_view kY4mFrameMarker = "FRAME";

/// Parses the header line (without the trailing newline).
Y4mHeader parse_y4m_header(std::string_view line);
std::string format_y4m_header(const Y4mHeader& header);

/// Decodes a whole Y4M stream into RGB frames. Each frame keeps its source
/// planes so an unmodified sequence re-emits byte-identically.
FrameSequence parse_y4m(std::span<const std::uint8_t> bytes,
                        ColorRange range = ColorRange::kLimited);

/// Counts FRAME sections without converting pixels.
std::size_t count_y4m_frames(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> emit_y4m(const FrameSequence& seq, Chroma chroma,
                                   ColorRange range = ColorRange::kLimited);

FrameSequence read_y4m_file(const std::filesystem::path& path,
                            ColorRange range = ColorRange::kLimited);
void write_y4m_file(const std::filesystem::path& path, const FrameSequence& seq, Chroma chroma,
                    ColorRange range = ColorRange::kLimited);

}  // namespace slomo::media
