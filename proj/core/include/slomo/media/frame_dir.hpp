#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "slomo/frame.hpp"

namespace slomo::media {

inline constexpr const char* kFrameDirManifestName = "manifest.json";
inline constexpr const char* kDefaultFramePattern = "%06d.png";

/// Sidecar manifest of a frame directory: {fps_num, fps_den, count, pattern}.
/// Frames are numbered from 1; `pattern` holds one printf-style %d / %0Nd.
struct FrameDirManifest {
  Rational fps{30, 1};
  std::uint32_t count = 0;
  std::string pattern = kDefaultFramePattern;

  friend bool operator==(const FrameDirManifest&, const FrameDirManifest&) = default;
};

FrameDirManifest parse_frame_dir_manifest(const std::string& json_text);
std::string format_frame_dir_manifest(const FrameDirManifest& manifest);

/// Reads <dir>/manifest.json; a directory without one gets the defaults
/// with count taken from the files present.
FrameDirManifest read_frame_dir_manifest(const std::filesystem::path& dir);

std::filesystem::path frame_file(const std::filesystem::path& dir, const FrameDirManifest& manifest,
                                 std::uint32_t index);

/// Loads frames 1..N in index order. Throws kEmptySequence for a directory
/// with no matching files, MissingFrameError on a gap, kDimensionMismatch on
/// mixed sizes.
FrameSequence read_frame_dir(const std::filesystem::path& dir, const FrameDirManifest& manifest);
FrameSequence read_frame_dir(const std::filesystem::path& dir);

/// Writes PNG frames plus the manifest. Creates the directory if needed.
void write_frame_dir(const std::filesystem::path& dir, const FrameSequence& seq,
                     const std::string& pattern = kDefaultFramePattern);

}  // namespace slomo::media
