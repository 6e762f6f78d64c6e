#include "slomo/media/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"

namespace slomo::media {
namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->bytes.size() - state->pos < length) png_error(png, "truncated PNG data");
  std::memcpy(out, state->bytes.data() + state->pos, length);
  state->pos += length;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngErrorState {
  char message[256] = {};
};

void png_record_error(png_structp png, png_const_charp message) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof state->message, "%s", message);
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// libpng reports errors by longjmp; every local with a destructor is
// constructed before setjmp so nothing is skipped on the way back.
Frame decode_png(std::span<const std::uint8_t> bytes) {
  PngErrorState err;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_record_error, png_warn);
  if (!png) fail(ErrorCode::kInternal, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngReadState state{bytes};
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kParse, std::string("PNG: ") + err.message);
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 3) {
    png_error(png, "could not convert to RGB24");
  }
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return Frame(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Frame decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  // Locals with destructors are constructed before setjmp.
  std::vector<std::uint8_t> pixels;
  int width = 0;
  int height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kParse, std::string("JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Frame(width, height, std::move(pixels));
}

}  // namespace

ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes) noexcept {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0) return ImageFormat::kPng;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return ImageFormat::kJpeg;
  }
  return ImageFormat::kUnknown;
}

Frame decode_image(std::span<const std::uint8_t> bytes) {
  switch (sniff_image_format(bytes)) {
    case ImageFormat::kPng: return decode_png(bytes);
    case ImageFormat::kJpeg: return decode_jpeg(bytes);
    case ImageFormat::kUnknown: break;
  }
  fail(ErrorCode::kUnsupportedFormat, "not a PNG or JPEG image");
}

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  PngErrorState err;
  std::vector<std::uint8_t> out;
  const auto px = frame.pixels();
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_record_error, png_warn);
  if (!png) fail(ErrorCode::kInternal, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kInternal, std::string("PNG encode: ") + err.message);
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width()),
               static_cast<png_uint_32>(frame.height()), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  for (int y = 0; y < frame.height(); ++y) {
    // libpng takes a non-const row pointer but only reads it.
    png_write_row(png, const_cast<png_bytep>(px.data() +
                                             static_cast<std::size_t>(y) * frame.width() * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Frame read_image(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const Frame& frame) {
  write_file_atomic(path, encode_png(frame));
}

std::pair<int, int> probe_image_size(const std::filesystem::path& path) {
  // PNG IHDR sits at a fixed offset; anything else is decoded fully.
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::uint8_t head[24];
  const auto n = std::fread(head, 1, sizeof head, f);
  std::fclose(f);
  if (n == sizeof head && std::memcmp(head, kPngMagic, 8) == 0) {
    auto be32 = [&](int at) {
      return (std::uint32_t{head[at]} << 24) | (std::uint32_t{head[at + 1]} << 16) |
             (std::uint32_t{head[at + 2]} << 8) | std::uint32_t{head[at + 3]};
    };
    return {static_cast<int>(be32(16)), static_cast<int>(be32(20))};
  }
  const Frame frame = read_image(path);
  return {frame.width(), frame.height()};
}

}  // namespace slomo::media
