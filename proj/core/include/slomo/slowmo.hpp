#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "slomo/backend.hpp"
#include "slomo/frame.hpp"

namespace slomo::interp {

inline constexpr int kMinExponent = 1;
inline constexpr int kMaxExponent = 5;

/// kKeep plays the result at the source rate (duration grows by 2^e);
/// kUpconvert multiplies the rate by 2^e so duration is unchanged.
enum class FpsPolicy : std::uint8_t { kKeep, kUpconvert };

struct SlowmoOptions {
  std::size_t workers = 1;
  FpsPolicy fps_policy = FpsPolicy::kKeep;
  /// Called with (pairs synthesized, total pairs); values never decrease.
  std::function<void(std::size_t, std::size_t)> progress;
  StageTimes* times = nullptr;
};

/// Throws kValidation unless kMinExponent <= e <= kMaxExponent.
void validate_exponent(int e);

/// (n - 1) * 2^e + 1
std::size_t slowmo_frame_count(std::size_t n, int e);
/// Midpoint syntheses needed for n input frames: (n - 1) * (2^e - 1).
std::size_t slowmo_pair_count(std::size_t n, int e);

/// e midpoint passes; each inserts interpolate(a, b, 1/2) between every
/// adjacent pair. Input frames appear unmodified at stride 2^e.
FrameSequence recursive_interpolate(const FrameSequence& seq, int e, Backend& backend,
                                    const SlowmoOptions& options = {});

}  // namespace slomo::interp
