#pragma once

#include <vector>

#include "slomo/flow.hpp"
#include "slomo/frame.hpp"

namespace slomo::interp {

/// Position of a synthesized frame between its two inputs, in [0, 1].
class TimePoint {
 public:
  /// Throws kValidation outside [0, 1] or for NaN.
  explicit TimePoint(double t);
  static TimePoint midpoint() { return TimePoint(0.5); }
  double value() const noexcept { return t_; }

 private:
  double t_;
};

/// Per-pixel weight in [0, 1] expressing how visible a source frame is.
using VisibilityMap = flow::ScalarMap;

struct IntermediateFlows {
  flow::FlowField to_first;   // F_t->0
  flow::FlowField to_second;  // F_t->1
};

/// Quadratic-in-t combination of the bidirectional flows:
///   F_t->0 = -(1-t) t F01 + t^2 F10
///   F_t->1 = (1-t)^2 F01 - t (1-t) F10
IntermediateFlows approximate_intermediate_flow(const flow::FlowField& forward,
                                                const flow::FlowField& backward, TimePoint t);

/// Real-valued interleaved RGB image; warps are kept unrounded until the final blend.
struct RealImage {
  int width = 0;
  int height = 0;
  std::vector<double> px;
};

/// out(p) = bilinear(frame, p + flow(p)), clamp-to-edge.
RealImage backward_warp_real(const Frame& frame, const flow::FlowField& flow);
Frame backward_warp(const Frame& frame, const flow::FlowField& flow);

struct VisibilityPair {
  VisibilityMap first;
  VisibilityMap second;
};

inline constexpr double kDefaultVisibilitySigma = 2.0;

/// V(p) = exp(-e(p)^2 / (2 sigma^2)) from forward-backward consistency error,
/// V0 from (F01, F10) and V1 from (F10, F01).
VisibilityPair visibility_from_consistency(const flow::FlowField& forward, const flow::FlowField& backward,
                                           double sigma = kDefaultVisibilitySigma);

/// Below this total weight the blend falls back to plain (1-t)/t mixing.
inline constexpr double kSynthesisEpsilon = 1e-4;

/// Visibility-weighted blend of two warped images, rounded half-to-even once.
Frame blend_warped(const RealImage& warped_first, const RealImage& warped_second, TimePoint t,
                   const VisibilityMap& vis_first, const VisibilityMap& vis_second);

Frame synthesize_frame(const Frame& first, const Frame& second, TimePoint t,
                       const flow::FlowField& flow_t0, const flow::FlowField& flow_t1,
                       const VisibilityMap& vis_first, const VisibilityMap& vis_second);

/// (1-t) * first + t * second per sample, rounded half-to-even.
Frame blend_frames(const Frame& first, const Frame& second, TimePoint t);

/// Round half-to-even and clamp to [0, 255].
std::uint8_t quantize(double v) noexcept;

}  // namespace slomo::interp
