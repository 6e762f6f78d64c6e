#include "slomo/media/frame_dir.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <set>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/image_io.hpp"

namespace slomo::media {
namespace {

using nlohmann::json;

struct PatternParts {
  std::string prefix;
  std::string suffix;
  int width = 0;  // zero-pad width; 0 = no padding
};

PatternParts split_pattern(const std::string& pattern) {
  const auto pct = pattern.find('%');
  if (pct == std::string::npos || pattern.find('%', pct + 1) != std::string::npos) {
    fail(ErrorCode::kValidation, "frame pattern needs exactly one %d: '" + pattern + "'");
  }
  PatternParts parts;
  parts.prefix = pattern.substr(0, pct);
  std::size_t i = pct + 1;
  if (i < pattern.size() && pattern[i] == '0') {
    std::size_t j = i + 1;
    while (j < pattern.size() && pattern[j] >= '0' && pattern[j] <= '9') ++j;
    std::from_chars(pattern.data() + i + 1, pattern.data() + j, parts.width);
    i = j;
  }
  if (i >= pattern.size() || pattern[i] != 'd') {
    fail(ErrorCode::kValidation, "frame pattern needs %d or %0Nd: '" + pattern + "'");
  }
  parts.suffix = pattern.substr(i + 1);
  return parts;
}

std::string format_index(const PatternParts& parts, std::uint32_t index) {
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < parts.width) {
    digits.insert(0, static_cast<std::size_t>(parts.width) - digits.size(), '0');
  }
  return parts.prefix + digits + parts.suffix;
}

std::set<std::uint32_t> scan_indices(const std::filesystem::path& dir, const PatternParts& parts) {
  std::set<std::uint32_t> found;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() <= parts.prefix.size() + parts.suffix.size()) continue;
    if (name.compare(0, parts.prefix.size(), parts.prefix) != 0) continue;
    if (name.compare(name.size() - parts.suffix.size(), parts.suffix.size(), parts.suffix) != 0) {
      continue;
    }
    const std::string_view digits(name.data() + parts.prefix.size(),
                                  name.size() - parts.prefix.size() - parts.suffix.size());
    std::uint32_t index = 0;
    auto [ptr, err] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (err != std::errc{} || ptr != digits.data() + digits.size()) continue;
    if (format_index(parts, index) != name) continue;
    found.insert(index);
  }
  if (ec) fail(ErrorCode::kIo, "cannot list " + dir.string() + ": " + ec.message());
  return found;
}

}  // namespace

FrameDirManifest parse_frame_dir_manifest(const std::string& json_text) {
  try {
    const json j = json::parse(json_text);
    FrameDirManifest m;
    m.fps = {j.at("fps_num").get<std::uint32_t>(), j.at("fps_den").get<std::uint32_t>()};
    m.count = j.at("count").get<std::uint32_t>();
    m.pattern = j.value("pattern", std::string(kDefaultFramePattern));
    if (m.fps.num == 0 || m.fps.den == 0) fail(ErrorCode::kValidation, "manifest fps terms must be >= 1");
    split_pattern(m.pattern);
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("frame manifest: ") + e.what());
  }
}

std::string format_frame_dir_manifest(const FrameDirManifest& m) {
  json j;
  j["fps_num"] = m.fps.num;
  j["fps_den"] = m.fps.den;
  j["count"] = m.count;
  j["pattern"] = m.pattern;
  return j.dump(2) + "\n";
}

FrameDirManifest read_frame_dir_manifest(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::kIo, dir.string() + " is not a directory");
  const auto path = dir / kFrameDirManifestName;
  if (std::filesystem::exists(path)) return parse_frame_dir_manifest(read_text_file(path));
  FrameDirManifest m;
  const auto indices = scan_indices(dir, split_pattern(m.pattern));
  m.count = indices.empty() ? 0 : *indices.rbegin();
  return m;
}

std::filesystem::path frame_file(const std::filesystem::path& dir, const FrameDirManifest& manifest,
                                 std::uint32_t index) {
  return dir / format_index(split_pattern(manifest.pattern), index);
}

FrameSequence read_frame_dir(const std::filesystem::path& dir, const FrameDirManifest& manifest) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::kIo, dir.string() + " is not a directory");
  const PatternParts parts = split_pattern(manifest.pattern);
  const auto indices = scan_indices(dir, parts);
  if (indices.empty()) fail(ErrorCode::kEmptySequence, "no frames in " + dir.string());

  const std::uint32_t last = std::max(*indices.rbegin(), manifest.count);
  std::uint32_t expected = 1;
  for (const auto index : indices) {
    if (index != expected) throw MissingFrameError(expected);
    ++expected;
  }
  if (expected <= last) throw MissingFrameError(expected);

  FrameSequence seq;
  seq.fps = manifest.fps;
  seq.frames.reserve(last);
  for (std::uint32_t i = 1; i <= last; ++i) {
    Frame frame = read_image(dir / format_index(parts, i));
    if (!seq.frames.empty() && !frame.same_size(seq.frames.front())) {
      fail(ErrorCode::kDimensionMismatch,
           "frame " + std::to_string(i) + " is " + std::to_string(frame.width()) + "x" +
               std::to_string(frame.height()) + ", expected " +
               std::to_string(seq.frames.front().width()) + "x" +
               std::to_string(seq.frames.front().height()));
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

FrameSequence read_frame_dir(const std::filesystem::path& dir) {
  return read_frame_dir(dir, read_frame_dir_manifest(dir));
}

void write_frame_dir(const std::filesystem::path& dir, const FrameSequence& seq,
                     const std::string& pattern) {
  validate_sequence(seq);
  const PatternParts parts = split_pattern(pattern);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    write_png(dir / format_index(parts, static_cast<std::uint32_t>(i + 1)), seq.frames[i]);
  }
  FrameDirManifest m;
  m.fps = seq.fps;
  m.count = static_cast<std::uint32_t>(seq.frames.size());
  m.pattern = pattern;
  write_file_atomic(dir / kFrameDirManifestName, format_frame_dir_manifest(m));
}

}  // namespace slomo::media
