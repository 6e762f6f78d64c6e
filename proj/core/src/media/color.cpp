#include "slomo/media/color.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slomo/error.hpp"

namespace slomo::media {
namespace {

constexpr double kKr = 0.299;
constexpr double kKb = 0.114;
constexpr double kKg = 1.0 - kKr - kKb;

struct RangeScale {
  double luma_scale;    // code units per RGB unit
  double chroma_scale;
  double luma_offset;
};

constexpr RangeScale scale_for(ColorRange range) {
  return range == ColorRange::kLimited ? RangeScale{219.0 / 255.0, 224.0 / 255.0, 16.0}
                                       : RangeScale{1.0, 1.0, 0.0};
}

std::uint8_t clamp_round(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

struct Exact {
  double y, cb, cr;
};

Exact exact_ycbcr(double r, double g, double b, ColorRange range) noexcept {
  const auto s = scale_for(range);
  const double luma = kKr * r + kKg * g + kKb * b;
  return {s.luma_offset + s.luma_scale * luma,
          128.0 + s.chroma_scale * (b - luma) / (2.0 * (1.0 - kKb)),
          128.0 + s.chroma_scale * (r - luma) / (2.0 * (1.0 - kKr))};
}

}  // namespace

std::array<std::uint8_t, 3> ycbcr_to_rgb(YCbCr yuv, ColorRange range) noexcept {
  const auto s = scale_for(range);
  const double luma = (yuv.y - s.luma_offset) / s.luma_scale;
  const double pb = (yuv.cb - 128.0) / s.chroma_scale;
  const double pr = (yuv.cr - 128.0) / s.chroma_scale;
  const double r = luma + 2.0 * (1.0 - kKr) * pr;
  const double b = luma + 2.0 * (1.0 - kKb) * pb;
  const double g = (luma - kKr * r - kKb * b) / kKg;
  return {clamp_round(r), clamp_round(g), clamp_round(b)};
}

YCbCr rgb_to_ycbcr(std::uint8_t r, std::uint8_t g, std::uint8_t b, ColorRange range) noexcept {
  const Exact e = exact_ycbcr(r, g, b, range);
  const YCbCr rounded{clamp_round(e.y), clamp_round(e.cb), clamp_round(e.cr)};

  auto score = [&](YCbCr c) {
    const auto back = ycbcr_to_rgb(c, range);
    const int dr = std::abs(back[0] - r);
    const int dg = std::abs(back[1] - g);
    const int db = std::abs(back[2] - b);
    return std::pair{std::max({dr, dg, db}), dr * dr + dg * dg + db * db};
  };

  YCbCr best = rounded;
  auto best_score = score(rounded);
  if (best_score.first == 0) return best;

  const double lo[3] = {std::floor(e.y), std::floor(e.cb), std::floor(e.cr)};
  for (int mask = 0; mask < 8; ++mask) {
    const YCbCr c{clamp_round(lo[0] + (mask & 1)), clamp_round(lo[1] + ((mask >> 1) & 1)),
                  clamp_round(lo[2] + ((mask >> 2) & 1))};
    const auto sc = score(c);
    if (sc < best_score) {
      best = c;
      best_score = sc;
    }
  }
  return best;
}

Frame yuv_to_rgb(PlaneView y, PlaneView cb, PlaneView cr, Chroma chroma, ColorRange range) {
  const int cw = chroma_width(y.width, chroma);
  const int ch = chroma_height(y.height, chroma);
  auto check = [](const PlaneView& p, int w, int h, const char* name) {
    if (p.width != w || p.height != h ||
        p.data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
      fail(ErrorCode::kDimensionMismatch,
           std::string(name) + " plane is " + std::to_string(p.width) + "x" +
               std::to_string(p.height) + " (" + std::to_string(p.data.size()) +
               " bytes), expected " + std::to_string(w) + "x" + std::to_string(h));
    }
  };
  check(y, y.width, y.height, "Y");
  check(cb, cw, ch, "Cb");
  check(cr, cw, ch, "Cr");

  Frame out(y.width, y.height);
  auto px = out.mutable_pixels();
  const int shift = chroma == Chroma::k420 ? 1 : 0;
  for (int row = 0; row < y.height; ++row) {
    const std::size_t crow = static_cast<std::size_t>(row >> shift) * cw;
    for (int col = 0; col < y.width; ++col) {
      const std::size_t ci = crow + (col >> shift);
      const auto rgb =
          ycbcr_to_rgb({y.data[static_cast<std::size_t>(row) * y.width + col], cb.data[ci],
                        cr.data[ci]},
                       range);
      const std::size_t o = (static_cast<std::size_t>(row) * y.width + col) * 3;
      px[o] = rgb[0];
      px[o + 1] = rgb[1];
      px[o + 2] = rgb[2];
    }
  }
  return out;
}

YuvPlanes rgb_to_yuv(const Frame& frame, Chroma chroma, ColorRange range) {
  YuvPlanes planes;
  planes.width = frame.width();
  planes.height = frame.height();
  planes.chroma = chroma;
  const auto w = static_cast<std::size_t>(frame.width());
  const auto h = static_cast<std::size_t>(frame.height());
  planes.y.resize(w * h);
  const auto px = frame.pixels();

  if (chroma == Chroma::k444) {
    planes.cb.resize(w * h);
    planes.cr.resize(w * h);
    for (std::size_t i = 0; i < w * h; ++i) {
      const auto c = rgb_to_ycbcr(px[3 * i], px[3 * i + 1], px[3 * i + 2], range);
      planes.y[i] = c.y;
      planes.cb[i] = c.cb;
      planes.cr[i] = c.cr;
    }
    return planes;
  }

  const auto cw = static_cast<std::size_t>(chroma_width(frame.width(), chroma));
  const auto ch = static_cast<std::size_t>(chroma_height(frame.height(), chroma));
  planes.cb.resize(cw * ch);
  planes.cr.resize(cw * ch);
  std::vector<double> sum_cb(cw * ch, 0.0), sum_cr(cw * ch, 0.0);
  std::vector<int> count(cw * ch, 0);
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t i = row * w + col;
      const Exact e = exact_ycbcr(px[3 * i], px[3 * i + 1], px[3 * i + 2], range);
      planes.y[i] = clamp_round(e.y);
      const std::size_t ci = (row / 2) * cw + col / 2;
      sum_cb[ci] += e.cb;
      sum_cr[ci] += e.cr;
      ++count[ci];
    }
  }
  for (std::size_t ci = 0; ci < cw * ch; ++ci) {
    planes.cb[ci] = clamp_round(sum_cb[ci] / count[ci]);
    planes.cr[ci] = clamp_round(sum_cr[ci] / count[ci]);
  }
  return planes;
}

}  // namespace slomo::media
