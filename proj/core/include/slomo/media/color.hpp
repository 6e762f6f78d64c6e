#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo::media {

// BT.601 with Kr = 0.299, Kb = 0.114. Limited range maps luma to [16,235]
// and chroma to [16,240]; full range uses all 256 codes for both.

struct YCbCr {
  std::uint8_t y = 0;
  std::uint8_t cb = 128;
  std::uint8_t cr = 128;
  friend bool operator==(const YCbCr&, const YCbCr&) = default;
};

std::array<std::uint8_t, 3> ycbcr_to_rgb(YCbCr yuv, ColorRange range) noexcept;

/// Chooses, among the floor/ceil neighbours of the exact YCbCr value, the
/// code whose decode lands closest to the input. Keeps rgb->ycbcr->rgb
/// within +-1 per channel for every 8-bit color in both ranges.
YCbCr rgb_to_ycbcr(std::uint8_t r, std::uint8_t g, std::uint8_t b, ColorRange range) noexcept;

struct PlaneView {
  std::span<const std::uint8_t> data;
  int width = 0;
  int height = 0;
};

inline int chroma_width(int width, Chroma chroma) {
  return chroma == Chroma::k444 ? width : (width + 1) / 2;
}
inline int chroma_height(int height, Chroma chroma) {
  return chroma == Chroma::k444 ? height : (height + 1) / 2;
}

/// Converts planar YCbCr to RGB. 4:2:0 chroma is upsampled nearest-neighbour.
Frame yuv_to_rgb(PlaneView y, PlaneView cb, PlaneView cr, Chroma chroma, ColorRange range);

struct YuvPlanes {
  int width = 0;
  int height = 0;
  Chroma chroma = Chroma::k444;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> cb;
  std::vector<std::uint8_t> cr;
};

/// 4:2:0 chroma is the mean of each 2x2 block (partial blocks at odd edges).
YuvPlanes rgb_to_yuv(const Frame& frame, Chroma chroma, ColorRange range);

}  // namespace slomo::media
