#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/color.hpp"
#include "slomo/media/external_codec.hpp"
#include "slomo/media/frame_dir.hpp"
#include "slomo/media/image_io.hpp"
#include "slomo/media/y4m.hpp"
#include "test_support.hpp"

using namespace slomo;
using namespace slomo::media;

namespace {

// Published BT.601 limited-range decode matrix, evaluated in double.
std::array<double, 3> reference_decode_limited(int y, int cb, int cr) {
  const double l = 255.0 / 219.0 * (y - 16);
  return {l + 1.596027 * (cr - 128), l - 0.391762 * (cb - 128) - 0.812968 * (cr - 128),
          l + 2.017232 * (cb - 128)};
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

// Hand-built stream with uniform planes.
std::string y4m_stream(int w, int h, const char* chroma, int frames, std::uint8_t y, std::uint8_t cb,
                       std::uint8_t cr) {
  const bool c420 = std::string(chroma).rfind("420", 0) == 0;
  const int cw = c420 ? (w + 1) / 2 : w;
  const int chh = c420 ? (h + 1) / 2 : h;
  std::string s = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F30:1 Ip A1:1 C" + chroma + "\n";
  for (int f = 0; f < frames; ++f) {
    s += "FRAME\n";
    s += std::string(static_cast<std::size_t>(w) * h, static_cast<char>(y));
    s += std::string(static_cast<std::size_t>(cw) * chh, static_cast<char>(cb));
    s += std::string(static_cast<std::size_t>(cw) * chh, static_cast<char>(cr));
  }
  return s;
}

std::string random_y4m(std::mt19937_64& rng, int w, int h, const char* chroma, int frames) {
  const bool c420 = std::string(chroma) == "420";
  const std::size_t payload =
      static_cast<std::size_t>(w) * h + 2 * static_cast<std::size_t>(c420 ? (w + 1) / 2 : w) * (c420 ? (h + 1) / 2 : h);
  std::string s = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F25:1 C" + chroma + "\n";
  for (int f = 0; f < frames; ++f) {
    s += "FRAME\n";
    for (std::size_t i = 0; i < payload; ++i) s += static_cast<char>(rng() & 0xff);
  }
  return s;
}

}  // namespace

TEST_SUITE("color") {
  TEST_CASE("limited range reference points") {
    CHECK(ycbcr_to_rgb({235, 128, 128}, ColorRange::kLimited) == std::array<std::uint8_t, 3>{255, 255, 255});
    CHECK(ycbcr_to_rgb({16, 128, 128}, ColorRange::kLimited) == std::array<std::uint8_t, 3>{0, 0, 0});
    CHECK(ycbcr_to_rgb({128, 128, 128}, ColorRange::kFull) == std::array<std::uint8_t, 3>{128, 128, 128});
  }

  TEST_CASE("decode agrees with the published matrix") {
    int worst = 0;
    for (int y = 0; y < 256; y += 3) {
      for (int cb = 0; cb < 256; cb += 5) {
        for (int cr = 0; cr < 256; cr += 7) {
          const auto got = ycbcr_to_rgb({static_cast<std::uint8_t>(y), static_cast<std::uint8_t>(cb),
                                         static_cast<std::uint8_t>(cr)},
                                        ColorRange::kLimited);
          const auto ref = reference_decode_limited(y, cb, cr);
          for (int c = 0; c < 3; ++c) {
            const int expect = static_cast<int>(std::clamp(std::round(ref[c]), 0.0, 255.0));
            worst = std::max(worst, std::abs(got[c] - expect));
          }
        }
      }
    }
    CHECK(worst <= 1);
  }

  TEST_CASE("every gray level round trips within one code") {
    for (auto range : {ColorRange::kLimited, ColorRange::kFull}) {
      for (int v = 0; v < 256; ++v) {
        const auto g = static_cast<std::uint8_t>(v);
        const auto back = ycbcr_to_rgb(rgb_to_ycbcr(g, g, g, range), range);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(back[c] - v) <= 1);
      }
    }
  }

  TEST_CASE("sampled colors round trip within one code") {
    std::mt19937_64 rng(2024);
    for (auto range : {ColorRange::kLimited, ColorRange::kFull}) {
      int worst = 0;
      for (int i = 0; i < 200000; ++i) {
        const auto v = rng();
        const std::uint8_t r = v & 0xff, g = (v >> 8) & 0xff, b = (v >> 16) & 0xff;
        const auto back = ycbcr_to_rgb(rgb_to_ycbcr(r, g, b, range), range);
        worst = std::max({worst, std::abs(back[0] - r), std::abs(back[1] - g), std::abs(back[2] - b)});
      }
      CHECK(worst <= 1);
    }
  }

  TEST_CASE("plane size mismatch names the plane") {
    std::vector<std::uint8_t> y(4, 16), c(1, 128);
    try {
      (void)yuv_to_rgb({y, 2, 2}, {c, 1, 1}, {c, 1, 1}, Chroma::k444, ColorRange::kLimited);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
      CHECK(std::string(e.what()).find("Cb") != std::string::npos);
    }
  }
}

TEST_SUITE("y4m") {
  TEST_CASE("two 2x2 4:4:4 frames") {
    const auto s = bytes_of(y4m_stream(2, 2, "444", 2, 128, 128, 128));
    const auto seq = parse_y4m(s);
    CHECK(seq.size() == 2);
    CHECK(seq.frames[0].width() == 2);
    CHECK(seq.frames[0].height() == 2);
    CHECK(seq.fps == Rational{30, 1});
  }

  TEST_CASE("black 4:2:0 stream decodes to zero RGB") {
    const auto seq = parse_y4m(bytes_of(y4m_stream(6, 4, "420", 3, 16, 128, 128)));
    REQUIRE(seq.size() == 3);
    for (const auto& f : seq.frames) CHECK(f == Frame::gray(6, 4, 0));
  }

  TEST_CASE("byte-identical re-emission") {
    std::mt19937_64 rng(5);
    for (const char* chroma : {"444", "420"}) {
      for (auto [w, h] : {std::pair{2, 2}, {5, 3}, {16, 9}}) {
        const auto s = bytes_of(random_y4m(rng, w, h, chroma, 3));
        const auto seq = parse_y4m(s);
        const Chroma c = std::string(chroma) == "444" ? Chroma::k444 : Chroma::k420;
        CHECK(emit_y4m(seq, c) == s);
      }
    }
  }

  TEST_CASE("header round trip") {
    const Y4mHeader h = parse_y4m_header("YUV4MPEG2 W720 H480 F30000:1001 It A10:11 C420jpeg XYSCSS=420JPEG");
    CHECK(h.width == 720);
    CHECK(h.fps == Rational{30000, 1001});
    CHECK(h.interlace == 't');
    CHECK(parse_y4m_header(format_y4m_header(h)) == h);
  }

  TEST_CASE("emit then parse keeps RGB within one code for 4:4:4") {
    FrameSequence seq;
    seq.fps = {24, 1};
    seq.frames.push_back(test::random_frame(13, 7, 1));
    seq.frames.push_back(test::random_frame(13, 7, 2));
    const auto bytes = emit_y4m(seq, Chroma::k444);
    CHECK(count_y4m_frames(bytes) == 2);
    const auto back = parse_y4m(bytes);
    CHECK(back.fps == seq.fps);
    int worst = 0;
    for (std::size_t f = 0; f < 2; ++f) {
      const auto a = seq.frames[f].pixels();
      const auto b = back.frames[f].pixels();
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    CHECK(worst <= 1);
  }

  TEST_CASE("one frame emits one marker") {
    FrameSequence seq;
    seq.frames.push_back(Frame::gray(4, 4, 10));
    const auto bytes = emit_y4m(seq, Chroma::k444);
    const std::string text(bytes.begin(), bytes.end());
    std::size_t markers = 0;
    for (auto p = text.find("FRAME"); p != std::string::npos; p = text.find("FRAME", p + 1)) ++markers;
    CHECK(markers == 1);
  }

  TEST_CASE("empty sequence cannot be emitted") {
    try {
      (void)emit_y4m(FrameSequence{}, Chroma::k420);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptySequence);
    }
  }

  TEST_CASE("frame count equals marker count for random headers") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 40; ++i) {
      const int w = 1 + static_cast<int>(rng() % 9), h = 1 + static_cast<int>(rng() % 9);
      const int n = static_cast<int>(rng() % 5);
      const auto s = bytes_of(random_y4m(rng, w, h, rng() % 2 ? "444" : "420", n));
      CHECK(parse_y4m(s).size() == static_cast<std::size_t>(n));
      CHECK(count_y4m_frames(s) == static_cast<std::size_t>(n));
    }
  }

  TEST_CASE("malformed signature reports offset 0") {
    try {
      (void)parse_y4m(bytes_of("YUV4MPEG W2 H2 F30:1\n"));
      FAIL("no throw");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }

  TEST_CASE("bad frame marker reports its offset") {
    std::string s = y4m_stream(2, 2, "444", 1, 16, 128, 128);
    const auto at = s.size();
    s += "FRAMX\n";
    try {
      (void)parse_y4m(bytes_of(s));
      FAIL("no throw");
    } catch (const ParseError& e) {
      CHECK(e.offset() == at);
    }
  }

  TEST_CASE("truncated payload names expected and actual sizes") {
    std::string s = y4m_stream(4, 4, "420", 1, 16, 128, 128);
    s.resize(s.size() - 3);
    try {
      (void)parse_y4m(bytes_of(s));
      FAIL("no throw");
    } catch (const TruncationError& e) {
      CHECK(e.expected() == 24);
      CHECK(e.actual() == 21);
    }
  }

  TEST_CASE("unknown chroma tag is unsupported") {
    try {
      (void)parse_y4m(bytes_of("YUV4MPEG2 W2 H2 F30:1 C422\nFRAME\n"));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnsupportedFormat);
    }
  }
}

TEST_SUITE("image_io") {
  TEST_CASE("png round trip is lossless") {
    const Frame f = test::random_frame(17, 11, 3);
    const auto png = encode_png(f);
    CHECK(sniff_image_format(png) == ImageFormat::kPng);
    CHECK(decode_image(png) == f);
  }

  TEST_CASE("files and probing") {
    test::TempDir dir;
    const Frame f = test::random_frame(9, 5, 4);
    write_png(dir / "a.png", f);
    CHECK(read_image(dir / "a.png") == f);
    CHECK(probe_image_size(dir / "a.png") == std::pair{9, 5});
  }

  TEST_CASE("garbage is not an image") {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(sniff_image_format(junk) == ImageFormat::kUnknown);
    CHECK_THROWS_AS(decode_image(junk), Error);
  }

  TEST_CASE("jpeg magic is recognised") {
    const std::vector<std::uint8_t> head{0xFF, 0xD8, 0xFF, 0xE0};
    CHECK(sniff_image_format(head) == ImageFormat::kJpeg);
  }
}

TEST_SUITE("frame_dir") {
  TEST_CASE("nine frames load in index order") {
    test::TempDir dir;
    FrameSequence seq;
    seq.fps = {60, 1};
    for (int i = 0; i < 9; ++i) seq.frames.push_back(Frame::gray(4, 3, static_cast<std::uint8_t>(i * 10)));
    write_frame_dir(dir.path(), seq);
    CHECK(std::filesystem::exists(dir / "000001.png"));
    CHECK(std::filesystem::exists(dir / "000009.png"));
    const auto back = read_frame_dir(dir.path());
    REQUIRE(back.size() == 9);
    CHECK(back.fps == Rational{60, 1});
    for (int i = 0; i < 9; ++i) CHECK(back.frames[i] == seq.frames[i]);
  }

  TEST_CASE("gap in numbering is a missing frame") {
    test::TempDir dir;
    write_png(dir / "000001.png", Frame::gray(2, 2, 1));
    write_png(dir / "000003.png", Frame::gray(2, 2, 3));
    try {
      (void)read_frame_dir(dir.path());
      FAIL("no throw");
    } catch (const MissingFrameError& e) {
      CHECK(e.index() == 2);
    }
  }

  TEST_CASE("empty directory") {
    test::TempDir dir;
    try {
      (void)read_frame_dir(dir.path());
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptySequence);
    }
  }

  TEST_CASE("mixed sizes") {
    test::TempDir dir;
    write_png(dir / "000001.png", Frame::gray(2, 2, 1));
    write_png(dir / "000002.png", Frame::gray(3, 2, 1));
    try {
      (void)read_frame_dir(dir.path());
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }

  TEST_CASE("manifest json round trip") {
    const FrameDirManifest m{{30000, 1001}, 12, "frame_%04d.png"};
    CHECK(parse_frame_dir_manifest(format_frame_dir_manifest(m)) == m);
    CHECK(frame_file("d", m, 7) == std::filesystem::path("d") / "frame_0007.png");
  }
}

TEST_SUITE("external_codec") {
  TEST_CASE("y4m input bypasses the decoder") {
    test::TempDir dir;
    const auto s = y4m_stream(2, 2, "444", 2, 16, 128, 128);
    write_file_atomic(dir / "in.y4m", s);
    const auto seq = decode_external(dir / "in.y4m", "");
    CHECK(seq.size() == 2);
  }

  TEST_CASE("unconfigured decoder for a container") {
    test::TempDir dir;
    write_file_atomic(dir / "in.mp4", std::string("not really"));
    try {
      (void)decode_external(dir / "in.mp4", "");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfiguration);
      CHECK(std::string(e.what()).find("decoder") != std::string::npos);
    }
  }

  TEST_CASE("decoder output is parsed as y4m") {
    test::TempDir dir;
    write_file_atomic(dir / "in.mp4", std::string("opaque container bytes"));
    write_file_atomic(dir / "decoded.y4m", y4m_stream(4, 2, "420", 3, 16, 128, 128));
    const auto seq = decode_external(dir / "in.mp4", "sh -c 'cat \"$0\"' " + (dir / "decoded.y4m").string() + " {input}");
    CHECK(seq.size() == 3);
    CHECK(seq.frames[0] == Frame::gray(4, 2, 0));
  }

  TEST_CASE("missing executable is a configuration error") {
    test::TempDir dir;
    write_file_atomic(dir / "in.mp4", std::string("x"));
    try {
      (void)decode_external(dir / "in.mp4", "/nonexistent/decoder {input}");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfiguration);
    }
  }

  TEST_CASE("nonzero exit is a decoder error with diagnostics") {
    test::TempDir dir;
    write_file_atomic(dir / "in.mp4", std::string("x"));
    try {
      (void)decode_external(dir / "in.mp4", "sh -c 'echo broken-input >&2; exit 3' {input}");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDecoder);
      CHECK(std::string(e.what()).find("broken-input") != std::string::npos);
    }
  }

  TEST_CASE("encoder receives y4m on stdin") {
    test::TempDir dir;
    FrameSequence seq;
    seq.frames = {Frame::gray(4, 4, 0), Frame::gray(4, 4, 255)};
    encode_external(seq, "sh -c 'cat > \"$0\"' {output}", dir / "out.bin");
    const auto back = parse_y4m(read_binary_file(dir / "out.bin"));
    CHECK(back.size() == 2);
  }
}
