#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo::flow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Per-pixel displacement (dx, dy), interleaved, at frame resolution.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);
  static FlowField constant(int width, int height, float dx, float dy);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  float dx(int x, int y) const noexcept { return data_[index(x, y)]; }
  float dy(int x, int y) const noexcept { return data_[index(x, y) + 1]; }
  void set(int x, int y, float dx, float dy) noexcept {
    data_[index(x, y)] = dx;
    data_[index(x, y) + 1] = dy;
  }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> mutable_data() noexcept { return data_; }

  /// Bilinear sample with clamp-to-edge outside the grid.
  Vec2 sample(double x, double y) const noexcept;

  bool same_size(const FlowField& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 2;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Single-channel real-valued map (consistency error, visibility).
struct ScalarMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Block-matching parameters. Defaults are the documented estimator:
/// 4-level box pyramid, 16x16 blocks, +-8 px search per level, SAD cost,
/// parabolic subpixel refinement, 3x3 median on each component.
struct FlowOptions {
  int levels = 4;
  int block_size = 16;
  int search_radius = 8;
  bool subpixel = true;
  bool median = true;
  std::size_t workers = 1;
};

/// Flow mapping each pixel of `from` toward its match in `to`.
/// Throws kDimensionMismatch for unequal sizes and kDegenerateInput when a
/// frame is smaller than one block.
FlowField estimate_flow(const Frame& from, const Frame& to, const FlowOptions& options = {});

/// e(p) = |F01(p) + F10(p + F01(p))|, bilinear sampling of F10, clamped.
ScalarMap flow_consistency_error(const FlowField& forward, const FlowField& backward);

/// (77 R + 150 G + 29 B + 128) >> 8
std::vector<std::uint8_t> luma_plane(const Frame& frame);

// Debug dump: "FLO1", u32 width, u32 height, then row-major (dx, dy) f32,
// all little-endian.
std::vector<std::uint8_t> encode_flo1(const FlowField& flow);
FlowField decode_flo1(std::span<const std::uint8_t> bytes);
void write_flo1(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo1(const std::filesystem::path& path);

}  // namespace slomo::flow
