#include "slomo/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "slomo/error.hpp"
#include "slomo/io_util.hpp"
#include "slomo/parallel.hpp"

namespace slomo::flow {
namespace {

struct Plane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> px;

  std::uint8_t clamped(int x, int y) const noexcept {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return px[static_cast<std::size_t>(y) * width + x];
  }
};

Plane downsample(const Plane& in) {
  Plane out{in.width / 2, in.height / 2, {}};
  out.px.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    const auto* r0 = in.px.data() + static_cast<std::size_t>(2 * y) * in.width;
    const auto* r1 = r0 + in.width;
    for (int x = 0; x < out.width; ++x) {
      const int sum = r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
      out.px[static_cast<std::size_t>(y) * out.width + x] = static_cast<std::uint8_t>((sum + 2) / 4);
    }
  }
  return out;
}

struct BlockVector {
  double dx = 0.0;
  double dy = 0.0;
};

struct BlockGrid {
  int cols = 0;
  int rows = 0;
  std::vector<BlockVector> v;
  BlockVector& at(int bx, int by) { return v[static_cast<std::size_t>(by) * cols + bx]; }
  const BlockVector& at(int bx, int by) const { return v[static_cast<std::size_t>(by) * cols + bx]; }
};

// Sum of absolute differences between the block at (x0, y0) in `a` and the
// block displaced by (dx, dy) in `b`. Stops early once `bound` is exceeded.
std::uint32_t block_sad(const Plane& a, const Plane& b, int x0, int y0, int w, int h, int dx, int dy,
                        std::uint32_t bound) {
  std::uint32_t sad = 0;
  const bool inside = x0 + dx >= 0 && y0 + dy >= 0 && x0 + dx + w <= b.width && y0 + dy + h <= b.height;
  for (int y = 0; y < h; ++y) {
    const auto* ra = a.px.data() + static_cast<std::size_t>(y0 + y) * a.width + x0;
    if (inside) {
      const auto* rb = b.px.data() + static_cast<std::size_t>(y0 + y + dy) * b.width + x0 + dx;
      for (int x = 0; x < w; ++x) sad += static_cast<std::uint32_t>(std::abs(ra[x] - rb[x]));
    } else {
      for (int x = 0; x < w; ++x) {
        sad += static_cast<std::uint32_t>(std::abs(ra[x] - b.clamped(x0 + x + dx, y0 + y + dy)));
      }
    }
    if (sad > bound) return sad;
  }
  return sad;
}

// Ordering for equal SAD: smaller |d|^2, then lexicographic (dx, dy).
bool preferred(int dx, int dy, int bx, int by) {
  const int m = dx * dx + dy * dy;
  const int mb = bx * bx + by * by;
  if (m != mb) return m < mb;
  if (dx != bx) return dx < bx;
  return dy < by;
}

double parabola_offset(double minus, double center, double plus) {
  const double denom = minus - 2.0 * center + plus;
  if (denom <= 0.0) return 0.0;
  return std::clamp((minus - plus) / (2.0 * denom), -0.5, 0.5);
}

void search_level(const Plane& a, const Plane& b, const BlockGrid* coarse, BlockGrid& grid,
                  const FlowOptions& opt, bool refine) {
  const int B = opt.block_size;
  const int R = opt.search_radius;
  grid.cols = (a.width + B - 1) / B;
  grid.rows = (a.height + B - 1) / B;
  grid.v.assign(static_cast<std::size_t>(grid.cols) * grid.rows, {});

  parallel_for(static_cast<std::size_t>(grid.rows), opt.workers, [&](std::size_t row) {
    const int by = static_cast<int>(row);
    for (int bx = 0; bx < grid.cols; ++bx) {
      const int x0 = bx * B;
      const int y0 = by * B;
      const int w = std::min(B, a.width - x0);
      const int h = std::min(B, a.height - y0);

      int px = 0, py = 0;
      if (coarse) {
        const int cbx = std::min((x0 + B / 2) / 2 / B, coarse->cols - 1);
        const int cby = std::min((y0 + B / 2) / 2 / B, coarse->rows - 1);
        px = 2 * static_cast<int>(std::lround(coarse->at(cbx, cby).dx));
        py = 2 * static_cast<int>(std::lround(coarse->at(cbx, cby).dy));
      }

      std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
      int best_dx = 0, best_dy = 0;
      for (int dy = py - R; dy <= py + R; ++dy) {
        for (int dx = px - R; dx <= px + R; ++dx) {
          const auto sad = block_sad(a, b, x0, y0, w, h, dx, dy, best);
          if (sad < best || (sad == best && preferred(dx, dy, best_dx, best_dy))) {
            best = sad;
            best_dx = dx;
            best_dy = dy;
          }
        }
      }

      BlockVector vec{static_cast<double>(best_dx), static_cast<double>(best_dy)};
      if (refine && best > 0) {
        const auto nomax = std::numeric_limits<std::uint32_t>::max();
        if (best_dx - 1 >= px - R && best_dx + 1 <= px + R) {
          vec.dx += parabola_offset(block_sad(a, b, x0, y0, w, h, best_dx - 1, best_dy, nomax), best,
                                    block_sad(a, b, x0, y0, w, h, best_dx + 1, best_dy, nomax));
        }
        if (best_dy - 1 >= py - R && best_dy + 1 <= py + R) {
          vec.dy += parabola_offset(block_sad(a, b, x0, y0, w, h, best_dx, best_dy - 1, nomax), best,
                                    block_sad(a, b, x0, y0, w, h, best_dx, best_dy + 1, nomax));
        }
      }
      grid.at(bx, by) = vec;
    }
  });
}

double median9(double* v) {
  std::nth_element(v, v + 4, v + 9);
  return v[4];
}

void median_filter(BlockGrid& grid) {
  BlockGrid out = grid;
  for (int by = 0; by < grid.rows; ++by) {
    for (int bx = 0; bx < grid.cols; ++bx) {
      double xs[9], ys[9];
      int n = 0;
      for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
          const auto& v = grid.at(std::clamp(bx + i, 0, grid.cols - 1), std::clamp(by + j, 0, grid.rows - 1));
          xs[n] = v.dx;
          ys[n] = v.dy;
          ++n;
        }
      }
      out.at(bx, by) = {median9(xs), median9(ys)};
    }
  }
  grid = std::move(out);
}

FlowField densify(const BlockGrid& grid, int width, int height, int B) {
  FlowField out(width, height);
  for (int y = 0; y < height; ++y) {
    const double gy = std::clamp((y + 0.5) / B - 0.5, 0.0, static_cast<double>(grid.rows - 1));
    const int y0 = static_cast<int>(gy);
    const int y1 = std::min(y0 + 1, grid.rows - 1);
    const double fy = gy - y0;
    for (int x = 0; x < width; ++x) {
      const double gx = std::clamp((x + 0.5) / B - 0.5, 0.0, static_cast<double>(grid.cols - 1));
      const int x0 = static_cast<int>(gx);
      const int x1 = std::min(x0 + 1, grid.cols - 1);
      const double fx = gx - x0;
      auto lerp2 = [&](auto member) {
        const double top = grid.at(x0, y0).*member * (1 - fx) + grid.at(x1, y0).*member * fx;
        const double bot = grid.at(x0, y1).*member * (1 - fx) + grid.at(x1, y1).*member * fx;
        return top * (1 - fy) + bot * fy;
      };
      out.set(x, y, static_cast<float>(lerp2(&BlockVector::dx)), static_cast<float>(lerp2(&BlockVector::dy)));
    }
  }
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + static_cast<std::size_t>(i)]} << (8 * i);
  return v;
}

}  // namespace

FlowField::FlowField(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) fail(ErrorCode::kValidation, "flow field dimensions must be >= 1");
  data_.assign(static_cast<std::size_t>(width) * height * 2, 0.0f);
}

FlowField FlowField::constant(int width, int height, float dx, float dy) {
  FlowField f(width, height);
  for (std::size_t i = 0; i < f.data_.size(); i += 2) {
    f.data_[i] = dx;
    f.data_[i + 1] = dy;
  }
  return f;
}

Vec2 FlowField::sample(double x, double y) const noexcept {
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  auto lerp = [&](int c) {
    const double top = data_[index(x0, y0) + c] * (1 - fx) + data_[index(x1, y0) + c] * fx;
    const double bot = data_[index(x0, y1) + c] * (1 - fx) + data_[index(x1, y1) + c] * fx;
    return top * (1 - fy) + bot * fy;
  };
  return {lerp(0), lerp(1)};
}

std::vector<std::uint8_t> luma_plane(const Frame& frame) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(frame.width()) * frame.height());
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((77 * px[3 * i] + 150 * px[3 * i + 1] + 29 * px[3 * i + 2] + 128) >> 8);
  }
  return out;
}

FlowField estimate_flow(const Frame& from, const Frame& to, const FlowOptions& options) {
  require_same_size(from, to, "estimate_flow");
  const int B = options.block_size;
  if (B < 2 || options.search_radius < 1 || options.levels < 1) {
    fail(ErrorCode::kValidation, "invalid flow options");
  }
  if (from.width() < B || from.height() < B) {
    fail(ErrorCode::kDegenerateInput, "frame " + std::to_string(from.width()) + "x" +
                                          std::to_string(from.height()) + " is smaller than one " +
                                          std::to_string(B) + "x" + std::to_string(B) + " block");
  }

  std::vector<Plane> pyr_a{{from.width(), from.height(), luma_plane(from)}};
  std::vector<Plane> pyr_b{{to.width(), to.height(), luma_plane(to)}};
  while (static_cast<int>(pyr_a.size()) < options.levels && pyr_a.back().width / 2 >= B &&
         pyr_a.back().height / 2 >= B) {
    pyr_a.push_back(downsample(pyr_a.back()));
    pyr_b.push_back(downsample(pyr_b.back()));
  }

  BlockGrid coarse;
  bool have_coarse = false;
  for (int level = static_cast<int>(pyr_a.size()) - 1; level >= 0; --level) {
    BlockGrid grid;
    const auto l = static_cast<std::size_t>(level);
    search_level(pyr_a[l], pyr_b[l], have_coarse ? &coarse : nullptr, grid, options,
                 options.subpixel && level == 0);
    if (options.median) median_filter(grid);
    coarse = std::move(grid);
    have_coarse = true;
  }
  return densify(coarse, from.width(), from.height(), B);
}

ScalarMap flow_consistency_error(const FlowField& forward, const FlowField& backward) {
  if (!forward.same_size(backward)) {
    fail(ErrorCode::kDimensionMismatch, "flow_consistency_error: flow fields differ in size");
  }
  ScalarMap out{forward.width(), forward.height(), {}};
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double fx = forward.dx(x, y);
      const double fy = forward.dy(x, y);
      const Vec2 back = backward.sample(x + fx, y + fy);
      out.values[static_cast<std::size_t>(y) * out.width + x] =
          static_cast<float>(std::hypot(fx + back.x, fy + back.y));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_flo1(const FlowField& flow) {
  std::vector<std::uint8_t> out{'F', 'L', 'O', '1'};
  out.reserve(12 + flow.data().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (const float v : flow.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FlowField decode_flo1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FLO1", 4) != 0) {
    throw ParseError(0, "missing FLO1 magic");
  }
  const auto w = get_u32(bytes, 4);
  const auto h = get_u32(bytes, 8);
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) throw ParseError(4, "invalid flow dimensions");
  const std::size_t expected = 12 + std::size_t{w} * h * 8;
  if (bytes.size() < expected) {
    throw TruncationError(12, expected - 12, bytes.size() - 12, "flow payload");
  }
  if (bytes.size() > expected) throw ParseError(expected, "trailing bytes after flow payload");
  FlowField flow(static_cast<int>(w), static_cast<int>(h));
  auto data = flow.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, 12 + 4 * i));
    if (!std::isfinite(data[i])) throw ParseError(12 + 4 * i, "non-finite flow component");
  }
  return flow;
}

void write_flo1(const std::filesystem::path& path, const FlowField& flow) {
  write_file_atomic(path, encode_flo1(flow));
}

FlowField read_flo1(const std::filesystem::path& path) { return decode_flo1(read_binary_file(path)); }

}  // namespace slomo::flow
