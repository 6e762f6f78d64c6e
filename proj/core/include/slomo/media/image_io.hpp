#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "slomo/frame.hpp"

namespace slomo::media {

enum class ImageFormat { kUnknown, kPng, kJpeg };

ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG (any bit depth / color type, alpha dropped, 16-bit truncated)
/// or baseline/progressive JPEG into 8-bit RGB.
Frame decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Frame& frame);

Frame read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);

/// Reads only the image header. Returns {width, height}.
std::pair<int, int> probe_image_size(const std::filesystem::path& path);

}  // namespace slomo::media
