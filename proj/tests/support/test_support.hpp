#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Frame random_frame(int width, int height, std::uint64_t seed);

/// Writes <root>/<id>/ frame directories of textured clips translating by
/// (vx, vy) px per frame. Returns the clip ids.
std::vector<std::string> write_translation_corpus(const std::filesystem::path& root, int clips, int frames,
                                                  int width, int height, int vx, int vy,
                                                  std::uint64_t seed = 7);

/// Path of a tool built alongside the tests.
std::filesystem::path tool_path(const std::string& name);

/// Runs a shell-free command line and returns (status, stdout, stderr).
struct Run {
  int status = 0;
  std::string out;
  std::string err;
};
Run run_tool(const std::vector<std::string>& argv, const std::string& input = {});

}  // namespace slomo::test
