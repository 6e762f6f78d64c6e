#include "slomo/synthetic.hpp"

#include <algorithm>

#include "slomo/error.hpp"

namespace slomo::synthetic {
namespace {

std::uint64_t mix(std::uint64_t v) noexcept {
  // splitmix64 finalizer
  v += 0x9e3779b97f4a7c15ull;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
  return v ^ (v >> 31);
}

std::uint64_t hash(std::uint64_t seed, std::int64_t x, std::int64_t y, int c) noexcept {
  return mix(seed ^ mix(static_cast<std::uint64_t>(x) ^ mix(static_cast<std::uint64_t>(y) + 31u * c)));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

std::uint8_t texture_sample(std::uint64_t seed, std::int64_t x, std::int64_t y, int c) noexcept {
  constexpr std::int64_t cell = 8;
  const std::int64_t gx = floor_div(x, cell);
  const std::int64_t gy = floor_div(y, cell);
  const std::int64_t fx = x - gx * cell;
  const std::int64_t fy = y - gy * cell;
  auto node = [&](std::int64_t i, std::int64_t j) {
    return static_cast<std::int64_t>(hash(seed, i, j, c) % 200) + 28;
  };
  const std::int64_t top = node(gx, gy) * (cell - fx) + node(gx + 1, gy) * fx;
  const std::int64_t bot = node(gx, gy + 1) * (cell - fx) + node(gx + 1, gy + 1) * fx;
  const std::int64_t coarse = (top * (cell - fy) + bot * fy) / (cell * cell);
  const std::int64_t grain = static_cast<std::int64_t>(hash(seed + 1, x, y, c) % 49) - 24;
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(coarse + grain, 0, 255));
}

Frame texture_frame(std::uint64_t seed, int width, int height, std::int64_t origin_x, std::int64_t origin_y) {
  Frame f(width, height);
  auto px = f.mutable_pixels();
  std::size_t i = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) px[i++] = texture_sample(seed, origin_x + x, origin_y + y, c);
    }
  }
  return f;
}

FrameSequence translation_clip(std::uint64_t seed, int width, int height, int frames, int vx, int vy,
                               Rational fps) {
  if (frames < 1) fail(ErrorCode::kValidation, "translation_clip needs at least one frame");
  FrameSequence seq;
  seq.fps = fps;
  for (int i = 0; i < frames; ++i) {
    seq.frames.push_back(texture_frame(seed, width, height, -static_cast<std::int64_t>(i) * vx,
                                       -static_cast<std::int64_t>(i) * vy));
  }
  return seq;
}

}  // namespace slomo::synthetic
