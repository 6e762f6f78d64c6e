#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace slomo {

/// Frame rate or aspect ratio as an exact fraction.
struct Rational {
  std::uint32_t num = 1;
  std::uint32_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / den; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class ColorRange : std::uint8_t { kLimited, kFull };
enum class Chroma : std::uint8_t { k420, k444 };

/// Planar YCbCr payload a frame was decoded from. Lets an untouched frame be
/// re-emitted byte-for-byte.
struct YuvSource {
  Chroma chroma = Chroma::k444;
  ColorRange range = ColorRange::kLimited;
  std::vector<std::uint8_t> planes;  // Y, then Cb, then Cr
  std::string frame_params;          // bytes between "FRAME" and the newline
};

/// 8-bit interleaved RGB raster, row-major. A default-constructed frame is an
/// empty placeholder; every real frame has width, height >= 1.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height);
  Frame(int width, int height, std::vector<std::uint8_t> pixels);

  static Frame filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  static Frame gray(int width, int height, std::uint8_t level) {
    return filled(width, height, level, level, level);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t sample_count() const noexcept { return pixels_.size(); }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  /// Mutable access detaches any YCbCr provenance.
  std::span<std::uint8_t> mutable_pixels() noexcept {
    source_.reset();
    return pixels_;
  }

  std::uint8_t at(int x, int y, int c) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  void set(int x, int y, int c, std::uint8_t v) noexcept {
    source_.reset();
    pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c] = v;
  }

  bool same_size(const Frame& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  const YuvSource* yuv_source() const noexcept { return source_.get(); }
  void attach_yuv_source(std::shared_ptr<const YuvSource> source) noexcept {
    source_ = std::move(source);
  }

  /// Pixel equality; provenance is ignored.
  friend bool operator==(const Frame& a, const Frame& b) noexcept {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::shared_ptr<const YuvSource> source_;
};

struct Y4mHeader;

struct FrameSequence {
  std::vector<Frame> frames;
  Rational fps{30, 1};
  /// Header of the Y4M stream this sequence came from, if any.
  std::shared_ptr<const Y4mHeader> y4m_header;

  std::size_t size() const noexcept { return frames.size(); }
  bool empty() const noexcept { return frames.empty(); }
};

/// Throws kDimensionMismatch unless the frames share width and height.
void require_same_size(const Frame& a, const Frame& b, const char* context);

/// Throws on an invalid sequence: empty, mixed dimensions, or a zero fps term.
void validate_sequence(const FrameSequence& seq);

}  // namespace slomo
