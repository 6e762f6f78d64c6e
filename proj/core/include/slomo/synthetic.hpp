#pragma once

#include <cstdint>

#include "slomo/frame.hpp"

namespace slomo::synthetic {

/// Deterministic unbounded texture: smooth value noise on an 8 px lattice
/// plus fine per-pixel grain. A sample depends only on (seed, x, y, c), so
/// windows at different origins are exact integer translations.
std::uint8_t texture_sample(std::uint64_t seed, std::int64_t x, std::int64_t y, int c) noexcept;

/// Window of the texture whose top-left corner is (origin_x, origin_y).
Frame texture_frame(std::uint64_t seed, int width, int height, std::int64_t origin_x = 0,
                    std::int64_t origin_y = 0);

/// Content moving by (vx, vy) px per frame: frame i is the window at -i * v.
FrameSequence translation_clip(std::uint64_t seed, int width, int height, int frames, int vx, int vy,
                               Rational fps = {30, 1});

}  // namespace slomo::synthetic
