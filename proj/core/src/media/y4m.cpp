#include "slomo/media/y4m.hpp"

#include <charconv>
#include <memory>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"
#include "slomo/media/color.hpp"

namespace slomo {

Chroma Y4mHeader::chroma() const {
  if (!chroma_tag) return Chroma::k420;
  const std::string& tag = *chroma_tag;
  if (tag == "444") return Chroma::k444;
  if (tag == "420" || tag == "420jpeg" || tag == "420paldv" || tag == "420mpeg2") {
    return Chroma::k420;
  }
  fail(ErrorCode::kUnsupportedFormat, "unsupported Y4M chroma tag C" + tag);
}

}  // namespace slomo

namespace slomo::media {
namespace {

constexpr std::size_t kMaxHeaderLength = 4096;

std::uint32_t parse_uint(std::string_view text, std::size_t offset, const char* what) {
  std::uint32_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ParseError(offset, std::string("invalid ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

Rational parse_ratio(std::string_view text, std::size_t offset, const char* what) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError(offset, std::string("invalid ") + what + " '" + std::string(text) + "'");
  }
  return {parse_uint(text.substr(0, colon), offset, what),
          parse_uint(text.substr(colon + 1), offset + colon + 1, what)};
}

std::string ratio_text(Rational r) { return std::to_string(r.num) + ":" + std::to_string(r.den); }

std::size_t frame_payload_size(const Y4mHeader& h) {
  const Chroma chroma = h.chroma();
  const auto luma = static_cast<std::size_t>(h.width) * h.height;
  const auto chroma_plane = static_cast<std::size_t>(chroma_width(h.width, chroma)) *
                            chroma_height(h.height, chroma);
  return luma + 2 * chroma_plane;
}

struct StreamCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  std::size_t remaining() const { return bytes.size() - pos; }

  // Returns the line starting at pos (without newline) and advances past it.
  std::string_view line(std::size_t max_length, const char* what) {
    const auto start = pos;
    const auto limit = std::min(bytes.size(), start + max_length);
    for (std::size_t i = start; i < limit; ++i) {
      if (bytes[i] == '\n') {
        pos = i + 1;
        return {reinterpret_cast<const char*>(bytes.data() + start), i - start};
      }
    }
    if (limit == bytes.size()) {
      throw ParseError(start, std::string(what) + " line is not newline-terminated");
    }
    throw ParseError(start, std::string(what) + " line exceeds " + std::to_string(max_length) +
                                " bytes");
  }
};

Y4mHeader parse_header_at(std::string_view line) {
  if (line.substr(0, kY4mSignature.size()) != kY4mSignature ||
      (line.size() > kY4mSignature.size() && line[kY4mSignature.size()] != ' ')) {
    throw ParseError(0, "missing YUV4MPEG2 signature");
  }
  Y4mHeader h;
  bool have_w = false, have_h = false, have_f = false;
  std::size_t pos = kY4mSignature.size();
  while (pos < line.size()) {
    if (line[pos] == ' ') {
      ++pos;
      continue;
    }
    const auto end = std::min(line.find(' ', pos), line.size());
    const std::string_view token = line.substr(pos, end - pos);
    const std::string_view value = token.substr(1);
    const std::size_t voff = pos + 1;
    switch (token[0]) {
      case 'W':
        h.width = static_cast<int>(parse_uint(value, voff, "width"));
        have_w = true;
        break;
      case 'H':
        h.height = static_cast<int>(parse_uint(value, voff, "height"));
        have_h = true;
        break;
      case 'F':
        h.fps = parse_ratio(value, voff, "frame rate");
        if (h.fps.num == 0 || h.fps.den == 0) throw ParseError(voff, "frame rate terms must be >= 1");
        have_f = true;
        break;
      case 'I':
        if (value.size() != 1) throw ParseError(voff, "invalid interlace tag");
        h.interlace = value[0];
        break;
      case 'A':
        h.pixel_aspect = parse_ratio(value, voff, "pixel aspect");
        break;
      case 'C':
        h.chroma_tag = std::string(value);
        break;
      case 'X':
        h.extensions.emplace_back(token);
        break;
      default:
        throw ParseError(pos, "unknown header token '" + std::string(token) + "'");
    }
    pos = end;
  }
  if (!have_w || !have_h) throw ParseError(line.size(), "header lacks W or H");
  if (h.width < 1 || h.height < 1) throw ParseError(0, "frame dimensions must be >= 1");
  if (!have_f) throw ParseError(line.size(), "header lacks F");
  return h;
}

}  // namespace

Y4mHeader parse_y4m_header(std::string_view line) {
  Y4mHeader h = parse_header_at(line);
  (void)h.chroma();
  return h;
}

std::string format_y4m_header(const Y4mHeader& h) {
  std::string out(kY4mSignature);
  out += " W" + std::to_string(h.width);
  out += " H" + std::to_string(h.height);
  out += " F" + ratio_text(h.fps);
  if (h.interlace) out += std::string(" I") + *h.interlace;
  if (h.pixel_aspect) out += " A" + ratio_text(*h.pixel_aspect);
  if (h.chroma_tag) out += " C" + *h.chroma_tag;
  for (const auto& x : h.extensions) out += " " + x;
  return out;
}

FrameSequence parse_y4m(std::span<const std::uint8_t> bytes, ColorRange range) {
  StreamCursor cur{bytes};
  if (bytes.size() < kY4mSignature.size() ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), kY4mSignature.size()) !=
          kY4mSignature) {
    throw ParseError(0, "missing YUV4MPEG2 signature");
  }
  auto header = std::make_shared<Y4mHeader>(parse_y4m_header(cur.line(kMaxHeaderLength, "header")));
  const Chroma chroma = header->chroma();
  const std::size_t payload = frame_payload_size(*header);
  const auto luma_size = static_cast<std::size_t>(header->width) * header->height;
  const int cw = chroma_width(header->width, chroma);
  const int ch = chroma_height(header->height, chroma);
  const auto chroma_size = static_cast<std::size_t>(cw) * ch;

  FrameSequence seq;
  seq.fps = header->fps;
  while (cur.remaining() > 0) {
    const std::size_t marker_at = cur.pos;
    const std::string_view marker = cur.line(kMaxHeaderLength, "frame marker");
    if (marker.substr(0, kY4mFrameMarker.size()) != kY4mFrameMarker ||
        (marker.size() > kY4mFrameMarker.size() && marker[kY4mFrameMarker.size()] != ' ')) {
      throw ParseError(marker_at, "expected FRAME marker");
    }
    if (cur.remaining() < payload) {
      throw TruncationError(cur.pos, payload, cur.remaining(),
                            "frame " + std::to_string(seq.frames.size()) + " payload");
    }
    auto source = std::make_shared<YuvSource>();
    source->chroma = chroma;
    source->range = range;
    source->frame_params = std::string(marker.substr(kY4mFrameMarker.size()));
    source->planes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos),
                          bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos + payload));
    cur.pos += payload;

    const std::span<const std::uint8_t> planes(source->planes);
    Frame frame = yuv_to_rgb({planes.subspan(0, luma_size), header->width, header->height},
                             {planes.subspan(luma_size, chroma_size), cw, ch},
                             {planes.subspan(luma_size + chroma_size, chroma_size), cw, ch},
                             chroma, range);
    frame.attach_yuv_source(std::move(source));
    seq.frames.push_back(std::move(frame));
  }
  seq.y4m_header = std::move(header);
  return seq;
}

std::size_t count_y4m_frames(std::span<const std::uint8_t> bytes) {
  StreamCursor cur{bytes};
  const Y4mHeader header = parse_y4m_header(cur.line(kMaxHeaderLength, "header"));
  const std::size_t payload = frame_payload_size(header);
  std::size_t count = 0;
  while (cur.remaining() > 0) {
    const std::size_t marker_at = cur.pos;
    const std::string_view marker = cur.line(kMaxHeaderLength, "frame marker");
    if (marker.substr(0, kY4mFrameMarker.size()) != kY4mFrameMarker) {
      throw ParseError(marker_at, "expected FRAME marker");
    }
    if (cur.remaining() < payload) {
      throw TruncationError(cur.pos, payload, cur.remaining(), "frame payload");
    }
    cur.pos += payload;
    ++count;
  }
  return count;
}

std::vector<std::uint8_t> emit_y4m(const FrameSequence& seq, Chroma chroma, ColorRange range) {
  validate_sequence(seq);
  const Frame& first = seq.frames.front();

  Y4mHeader header;
  if (seq.y4m_header && seq.y4m_header->chroma() == chroma) {
    header = *seq.y4m_header;
  } else {
    header.interlace = 'p';
    header.pixel_aspect = Rational{1, 1};
    header.chroma_tag = chroma == Chroma::k444 ? "444" : "420jpeg";
  }
  header.width = first.width();
  header.height = first.height();
  header.fps = seq.fps;

  std::vector<std::uint8_t> out;
  const std::string head = format_y4m_header(header) + "\n";
  out.reserve(head.size() + seq.frames.size() * (frame_payload_size(header) + 6));
  out.insert(out.end(), head.begin(), head.end());

  for (const Frame& frame : seq.frames) {
    const YuvSource* src = frame.yuv_source();
    if (src && src->chroma == chroma && src->range == range) {
      out.insert(out.end(), kY4mFrameMarker.begin(), kY4mFrameMarker.end());
      out.insert(out.end(), src->frame_params.begin(), src->frame_params.end());
      out.push_back('\n');
      out.insert(out.end(), src->planes.begin(), src->planes.end());
      continue;
    }
    const YuvPlanes planes = rgb_to_yuv(frame, chroma, range);
    out.insert(out.end(), kY4mFrameMarker.begin(), kY4mFrameMarker.end());
    out.push_back('\n');
    out.insert(out.end(), planes.y.begin(), planes.y.end());
    out.insert(out.end(), planes.cb.begin(), planes.cb.end());
    out.insert(out.end(), planes.cr.begin(), planes.cr.end());
  }
  return out;
}

FrameSequence read_y4m_file(const std::filesystem::path& path, ColorRange range) {
  const auto bytes = read_binary_file(path);
  return parse_y4m(bytes, range);
}

void write_y4m_file(const std::filesystem::path& path, const FrameSequence& seq, Chroma chroma,
                    ColorRange range) {
  write_file_atomic(path, emit_y4m(seq, chroma, range));
}

}  // namespace slomo::media
