#include "slomo/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slomo/error.hpp"

namespace slomo::metrics {
namespace {

constexpr double kPeak = 255.0;
constexpr double kC1 = (0.01 * kPeak) * (0.01 * kPeak);
constexpr double kC2 = (0.03 * kPeak) * (0.03 * kPeak);

void require_comparable(const Frame& a, const Frame& b, const char* what) {
  if (a.empty() || b.empty()) fail(ErrorCode::kValidation, std::string(what) + ": empty frame");
  require_same_size(a, b, what);
}

double ssim_index(double ux, double uy, double vx, double vy, double vxy) {
  const double num = (2.0 * ux * uy + kC1) * (2.0 * vxy + kC2);
  const double den = (ux * ux + uy * uy + kC1) * (vx + vy + kC2);
  return num / den;
}

// Summed-area tables of x, y, x^2, y^2, xy for one channel. Integer sums are exact.
struct Integrals {
  int w1 = 0;
  std::vector<std::int64_t> sx, sy, sxx, syy, sxy;

  Integrals(const Frame& a, const Frame& b, int c) : w1(a.width() + 1) {
    const std::size_t n = static_cast<std::size_t>(w1) * (a.height() + 1);
    for (auto* v : {&sx, &sy, &sxx, &syy, &sxy}) v->assign(n, 0);
    for (int y = 0; y < a.height(); ++y) {
      std::int64_t rx = 0, ry = 0, rxx = 0, ryy = 0, rxy = 0;
      for (int x = 0; x < a.width(); ++x) {
        const std::int64_t p = a.at(x, y, c);
        const std::int64_t q = b.at(x, y, c);
        rx += p;
        ry += q;
        rxx += p * p;
        ryy += q * q;
        rxy += p * q;
        const std::size_t i = static_cast<std::size_t>(y + 1) * w1 + x + 1;
        const std::size_t up = i - w1;
        sx[i] = sx[up] + rx;
        sy[i] = sy[up] + ry;
        sxx[i] = sxx[up] + rxx;
        syy[i] = syy[up] + ryy;
        sxy[i] = sxy[up] + rxy;
      }
    }
  }

  std::int64_t box(const std::vector<std::int64_t>& s, int x0, int y0, int x1, int y1) const {
    return s[static_cast<std::size_t>(y1) * w1 + x1] - s[static_cast<std::size_t>(y0) * w1 + x1] -
           s[static_cast<std::size_t>(y1) * w1 + x0] + s[static_cast<std::size_t>(y0) * w1 + x0];
  }
};

double ssim_uniform_channel(const Frame& a, const Frame& b, int c) {
  const Integrals I(a, b, c);
  const int k = kSsimWindow;
  const double np = k * k;
  const double cov_norm = np / (np - 1.0);
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + k <= a.height(); ++y) {
    for (int x = 0; x + k <= a.width(); ++x) {
      const double ux = I.box(I.sx, x, y, x + k, y + k) / np;
      const double uy = I.box(I.sy, x, y, x + k, y + k) / np;
      const double uxx = I.box(I.sxx, x, y, x + k, y + k) / np;
      const double uyy = I.box(I.syy, x, y, x + k, y + k) / np;
      const double uxy = I.box(I.sxy, x, y, x + k, y + k) / np;
      total += ssim_index(ux, uy, cov_norm * (uxx - ux * ux), cov_norm * (uyy - uy * uy),
                          cov_norm * (uxy - ux * uy));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

std::vector<double> gaussian_kernel(int radius, double sigma) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

double ssim_gaussian_channel(const Frame& a, const Frame& b, int c) {
  constexpr int radius = 5;
  const auto g = gaussian_kernel(radius, 1.5);
  const int w = a.width();
  const int h = a.height();
  const int ow = w - 2 * radius;
  // Horizontal pass over the valid columns, then vertical on the valid rows.
  std::vector<double> hx(static_cast<std::size_t>(ow) * h * 5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double m[5] = {0, 0, 0, 0, 0};
      for (int i = 0; i <= 2 * radius; ++i) {
        const double p = a.at(x + i, y, c);
        const double q = b.at(x + i, y, c);
        m[0] += g[i] * p;
        m[1] += g[i] * q;
        m[2] += g[i] * (p * p);
        m[3] += g[i] * (q * q);
        m[4] += g[i] * (p * q);
      }
      for (int j = 0; j < 5; ++j) hx[(static_cast<std::size_t>(y) * ow + x) * 5 + j] = m[j];
    }
  }
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + 2 * radius < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double m[5] = {0, 0, 0, 0, 0};
      for (int i = 0; i <= 2 * radius; ++i) {
        for (int j = 0; j < 5; ++j) m[j] += g[i] * hx[(static_cast<std::size_t>(y + i) * ow + x) * 5 + j];
      }
      total += ssim_index(m[0], m[1], m[2] - m[0] * m[0], m[3] - m[1] * m[1], m[4] - m[0] * m[1]);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

double mse(const Frame& reference, const Frame& test) {
  require_comparable(reference, test, "mse");
  const auto a = reference.pixels();
  const auto b = test.pixels();
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    sum += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(sum) / static_cast<double>(a.size());
}

double psnr(const Frame& reference, const Frame& test) {
  const double e = mse(reference, test);
  if (e == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(kPeak * kPeak / e);
}

double ssim(const Frame& reference, const Frame& test, const SsimOptions& options) {
  require_comparable(reference, test, "ssim");
  const int win = options.window == SsimWindow::kUniform7 ? kSsimWindow : 11;
  if (reference.width() < win || reference.height() < win) {
    fail(ErrorCode::kValidation, "ssim: frame " + std::to_string(reference.width()) + "x" +
                                     std::to_string(reference.height()) + " is smaller than the " +
                                     std::to_string(win) + "x" + std::to_string(win) + " window");
  }
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    sum += options.window == SsimWindow::kUniform7 ? ssim_uniform_channel(reference, test, c)
                                                   : ssim_gaussian_channel(reference, test, c);
  }
  return sum / 3.0;
}

FramePairScore score_pair(const Frame& reference, const Frame& test, std::string frame_id,
                          const SsimOptions& options) {
  return {std::move(frame_id), psnr(reference, test), ssim(reference, test, options)};
}

}  // namespace slomo::metrics
