#include "slomo/slowmo.hpp"

#include <mutex>
#include <string>

#include "slomo/error.hpp"
#include "slomo/parallel.hpp"

namespace slomo::interp {

void validate_exponent(int e) {
  if (e < kMinExponent || e > kMaxExponent) {
    fail(ErrorCode::kValidation, "exponent must be in [" + std::to_string(kMinExponent) + ", " +
                                     std::to_string(kMaxExponent) + "], got " + std::to_string(e));
  }
}

std::size_t slowmo_frame_count(std::size_t n, int e) {
  return n < 2 ? n : (n - 1) * (std::size_t{1} << e) + 1;
}

std::size_t slowmo_pair_count(std::size_t n, int e) {
  return n < 2 ? 0 : (n - 1) * ((std::size_t{1} << e) - 1);
}

FrameSequence recursive_interpolate(const FrameSequence& seq, int e, Backend& backend,
                                    const SlowmoOptions& options) {
  validate_exponent(e);
  if (seq.size() < 2) {
    fail(ErrorCode::kValidation, "slow motion needs at least 2 frames, got " + std::to_string(seq.size()));
  }
  validate_sequence(seq);

  const std::size_t total = slowmo_pair_count(seq.size(), e);
  std::size_t done = 0;
  std::mutex progress_mutex;
  std::mutex times_mutex;
  if (options.progress) options.progress(0, total);

  std::vector<Frame> frames = seq.frames;
  for (int pass = 0; pass < e; ++pass) {
    const std::size_t pairs = frames.size() - 1;
    std::vector<Frame> mids(pairs);
    parallel_for(pairs, options.workers, [&](std::size_t i) {
      StageTimes local;
      mids[i] = interpolate(backend, frames[i], frames[i + 1], TimePoint::midpoint(),
                            {nullptr, options.times ? &local : nullptr});
      if (options.times) {
        std::lock_guard lock(times_mutex);
        *options.times += local;
      }
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(++done, total);
      }
    });
    std::vector<Frame> next;
    next.reserve(frames.size() + pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
      next.push_back(std::move(frames[i]));
      next.push_back(std::move(mids[i]));
    }
    next.push_back(std::move(frames.back()));
    frames = std::move(next);
  }

  FrameSequence out;
  out.frames = std::move(frames);
  out.fps = seq.fps;
  if (options.fps_policy == FpsPolicy::kUpconvert) out.fps.num *= 1u << e;
  out.y4m_header = seq.y4m_header;
  return out;
}

}  // namespace slomo::interp
