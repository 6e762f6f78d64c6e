#include "slomo/interp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slomo/error.hpp"

namespace slomo::interp {
namespace {

using flow::FlowField;

void require_flow_matches(const Frame& frame, const FlowField& f, const char* context) {
  if (frame.width() != f.width() || frame.height() != f.height()) {
    fail(ErrorCode::kDimensionMismatch, std::string(context) + ": flow is " + std::to_string(f.width()) +
                                            "x" + std::to_string(f.height()) + ", frame is " +
                                            std::to_string(frame.width()) + "x" +
                                            std::to_string(frame.height()));
  }
}

void require_map_matches(const RealImage& img, const VisibilityMap& v, const char* context) {
  if (img.width != v.width || img.height != v.height) {
    fail(ErrorCode::kDimensionMismatch, std::string(context) + ": visibility map size differs");
  }
}

}  // namespace

TimePoint::TimePoint(double t) : t_(t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::kValidation, "interpolation time must lie in [0, 1], got " + std::to_string(t));
  }
}

std::uint8_t quantize(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
}

IntermediateFlows approximate_intermediate_flow(const FlowField& forward, const FlowField& backward,
                                                TimePoint time) {
  if (!forward.same_size(backward)) {
    fail(ErrorCode::kDimensionMismatch, "approximate_intermediate_flow: flow fields differ in size");
  }
  const double t = time.value();
  const double a0 = -(1.0 - t) * t;
  const double b0 = t * t;
  const double a1 = (1.0 - t) * (1.0 - t);
  const double b1 = -t * (1.0 - t);

  IntermediateFlows out{FlowField(forward.width(), forward.height()),
                        FlowField(forward.width(), forward.height())};
  const auto f = forward.data();
  const auto b = backward.data();
  auto t0 = out.to_first.mutable_data();
  auto t1 = out.to_second.mutable_data();
  for (std::size_t i = 0; i < f.size(); ++i) {
    t0[i] = static_cast<float>(a0 * f[i] + b0 * b[i]);
    t1[i] = static_cast<float>(a1 * f[i] + b1 * b[i]);
  }
  return out;
}

RealImage backward_warp_real(const Frame& frame, const FlowField& f) {
  require_flow_matches(frame, f, "backward_warp");
  const int w = frame.width();
  const int h = frame.height();
  RealImage out{w, h, {}};
  out.px.resize(static_cast<std::size_t>(w) * h * 3);
  const auto src = frame.pixels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp(x + static_cast<double>(f.dx(x, y)), 0.0, static_cast<double>(w - 1));
      const double sy = std::clamp(y + static_cast<double>(f.dy(x, y)), 0.0, static_cast<double>(h - 1));
      const int x0 = static_cast<int>(sx);
      const int y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      const auto* p00 = src.data() + (static_cast<std::size_t>(y0) * w + x0) * 3;
      const auto* p10 = src.data() + (static_cast<std::size_t>(y0) * w + x1) * 3;
      const auto* p01 = src.data() + (static_cast<std::size_t>(y1) * w + x0) * 3;
      const auto* p11 = src.data() + (static_cast<std::size_t>(y1) * w + x1) * 3;
      auto* dst = out.px.data() + (static_cast<std::size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] * (1.0 - fx) + p10[c] * fx;
        const double bot = p01[c] * (1.0 - fx) + p11[c] * fx;
        dst[c] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Frame backward_warp(const Frame& frame, const FlowField& f) {
  const RealImage real = backward_warp_real(frame, f);
  Frame out(real.width, real.height);
  auto px = out.mutable_pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize(real.px[i]);
  return out;
}

VisibilityPair visibility_from_consistency(const FlowField& forward, const FlowField& backward, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::kValidation, "visibility sigma must be > 0");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  auto kernel = [&](flow::ScalarMap e) {
    for (auto& v : e.values) v = static_cast<float>(std::exp(-static_cast<double>(v) * v * inv));
    return e;
  };
  return {kernel(flow::flow_consistency_error(forward, backward)),
          kernel(flow::flow_consistency_error(backward, forward))};
}

Frame blend_warped(const RealImage& warped_first, const RealImage& warped_second, TimePoint time,
                   const VisibilityMap& vis_first, const VisibilityMap& vis_second) {
  if (warped_first.width != warped_second.width || warped_first.height != warped_second.height) {
    fail(ErrorCode::kDimensionMismatch, "blend_warped: warped images differ in size");
  }
  require_map_matches(warped_first, vis_first, "blend_warped");
  require_map_matches(warped_first, vis_second, "blend_warped");
  const double t = time.value();
  Frame out(warped_first.width, warped_first.height);
  auto px = out.mutable_pixels();
  const std::size_t n = static_cast<std::size_t>(out.width()) * out.height();
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = (1.0 - t) * vis_first.values[i];
    const double x1 = t * vis_second.values[i];
    const double total = x0 + x1;
    double w0 = 1.0 - t;
    double w1 = t;
    if (total >= kSynthesisEpsilon) {
      w0 = x0 / total;
      w1 = x1 / total;
    }
    for (std::size_t c = 0; c < 3; ++c) {
      px[3 * i + c] = quantize(w0 * warped_first.px[3 * i + c] + w1 * warped_second.px[3 * i + c]);
    }
  }
  return out;
}

Frame synthesize_frame(const Frame& first, const Frame& second, TimePoint t, const FlowField& flow_t0,
                       const FlowField& flow_t1, const VisibilityMap& vis_first,
                       const VisibilityMap& vis_second) {
  require_same_size(first, second, "synthesize_frame");
  return blend_warped(backward_warp_real(first, flow_t0), backward_warp_real(second, flow_t1), t, vis_first,
                      vis_second);
}

Frame blend_frames(const Frame& first, const Frame& second, TimePoint time) {
  require_same_size(first, second, "blend_frames");
  const double t = time.value();
  Frame out(first.width(), first.height());
  auto px = out.mutable_pixels();
  const auto a = first.pixels();
  const auto b = second.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize((1.0 - t) * a[i] + t * b[i]);
  return out;
}

}  // namespace slomo::interp
