#include "slomo/frame.hpp"

#include "slomo/error.hpp"

namespace slomo {
namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    fail(ErrorCode::kValidation, "frame dimensions must be >= 1, got " + std::to_string(width) +
                                     "x" + std::to_string(height));
  }
}

}  // namespace

Frame::Frame(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  pixels_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dims(width, height);
  const auto expected = static_cast<std::size_t>(width) * height * 3;
  if (pixels_.size() != expected) {
    fail(ErrorCode::kDimensionMismatch, "pixel buffer has " + std::to_string(pixels_.size()) +
                                            " bytes, expected " + std::to_string(expected));
  }
}

Frame Frame::filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Frame f(width, height);
  auto px = f.mutable_pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  }
  return f;
}

void require_same_size(const Frame& a, const Frame& b, const char* context) {
  if (!a.same_size(b)) {
    fail(ErrorCode::kDimensionMismatch,
         std::string(context) + ": frame sizes differ (" + std::to_string(a.width()) + "x" +
             std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
             std::to_string(b.height()) + ")");
  }
}

void validate_sequence(const FrameSequence& seq) {
  if (seq.frames.empty()) fail(ErrorCode::kEmptySequence, "frame sequence is empty");
  if (seq.fps.num == 0 || seq.fps.den == 0) {
    fail(ErrorCode::kValidation, "fps terms must be >= 1");
  }
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (!seq.frames[i].same_size(seq.frames[0])) {
      fail(ErrorCode::kDimensionMismatch,
           "frame " + std::to_string(i) + " differs in size from frame 0");
    }
  }
}

}  // namespace slomo
