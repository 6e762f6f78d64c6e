#include <doctest.h>

#include <cmath>
#include <random>

#include "slomo/error.hpp"
#include "slomo/metrics.hpp"
#include "slomo/synthetic.hpp"
#include "test_support.hpp"

using namespace slomo;
using namespace slomo::metrics;

namespace {

// Direct per-window evaluation: 7x7 box, unbiased variance, mean over
// windows then over channels.
double naive_ssim(const Frame& a, const Frame& b) {
  const double c1 = (0.01 * 255) * (0.01 * 255), c2 = (0.03 * 255) * (0.03 * 255);
  const int n = 7;
  const double np = n * n;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    int windows = 0;
    for (int y0 = 0; y0 + n <= a.height(); ++y0) {
      for (int x0 = 0; x0 + n <= a.width(); ++x0) {
        double ma = 0, mb = 0;
        for (int y = y0; y < y0 + n; ++y) {
          for (int x = x0; x < x0 + n; ++x) {
            ma += a.at(x, y, c);
            mb += b.at(x, y, c);
          }
        }
        ma /= np;
        mb /= np;
        double va = 0, vb = 0, cov = 0;
        for (int y = y0; y < y0 + n; ++y) {
          for (int x = x0; x < x0 + n; ++x) {
            const double da = a.at(x, y, c) - ma, db = b.at(x, y, c) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
          }
        }
        va /= np - 1;
        vb /= np - 1;
        cov /= np - 1;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++windows;
      }
    }
    total += sum / windows;
  }
  return total / 3;
}

Frame add_noise(const Frame& f, int amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-amplitude, amplitude);
  Frame out = f;
  for (auto& v : out.mutable_pixels()) v = static_cast<std::uint8_t>(std::clamp(v + d(rng), 0, 255));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("psnr examples") {
    CHECK(std::isinf(psnr(Frame::gray(8, 8, 3), Frame::gray(8, 8, 3))));
    CHECK(psnr(Frame::gray(8, 8, 0), Frame::gray(8, 8, 255)) == doctest::Approx(0.0));
    CHECK(std::abs(psnr(Frame::gray(8, 8, 0), Frame::gray(8, 8, 16)) - 24.0484) <= 1e-3);
    CHECK(mse(Frame::gray(2, 2, 0), Frame::gray(2, 2, 16)) == 256.0);
    CHECK_THROWS_AS(psnr(Frame::gray(2, 2, 0), Frame::gray(2, 3, 0)), Error);
  }

  TEST_CASE("ssim examples") {
    CHECK(ssim(Frame::gray(16, 16, 0), Frame::gray(16, 16, 255)) == doctest::Approx(6.5025 / 65031.5025).epsilon(1e-9));
    CHECK(std::abs(ssim(Frame::gray(16, 16, 0), Frame::gray(16, 16, 255)) - 9.999e-5) <= 1e-6);
    for (int c : {0, 17, 128, 255}) CHECK(ssim(Frame::gray(9, 9, c), Frame::gray(9, 9, c)) == 1.0);
    const Frame f = test::random_frame(20, 20, 1);
    CHECK(ssim(f, f) == 1.0);
  }

  TEST_CASE("ssim matches a direct window evaluation") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Frame a = test::random_frame(19, 13, seed);
      const Frame b = add_noise(a, 40, seed + 10);
      CHECK(ssim(a, b) == doctest::Approx(naive_ssim(a, b)).epsilon(1e-12));
    }
    const Frame t = synthetic::texture_frame(4, 30, 24);
    const Frame u = synthetic::texture_frame(4, 30, 24, 1, 0);
    CHECK(ssim(t, u) == doctest::Approx(naive_ssim(t, u)).epsilon(1e-12));
  }

  TEST_CASE("symmetry and bounds") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Frame a = test::random_frame(16, 12, seed), b = test::random_frame(16, 12, seed + 50);
      CHECK(ssim(a, b) == ssim(b, a));
      CHECK(psnr(a, b) == psnr(b, a));
      CHECK(ssim(a, b) >= -1.0);
      CHECK(ssim(a, b) < 1.0);
      const SsimOptions g{SsimWindow::kGaussian11};
      CHECK(ssim(a, b, g) == ssim(b, a, g));
    }
  }

  TEST_CASE("psnr is monotone in noise amplitude") {
    const Frame f = synthetic::texture_frame(9, 64, 64);
    double last = kPsnrInfinite;
    for (int amp : {1, 2, 4, 8, 16, 32, 64}) {
      const double p = psnr(f, add_noise(f, amp, 3));
      CHECK(p <= last);
      last = p;
    }
  }

  TEST_CASE("a one pixel shift lowers both metrics") {
    const Frame a = synthetic::texture_frame(2, 48, 48);
    const Frame b = synthetic::texture_frame(2, 48, 48, 1, 0);
    CHECK(psnr(a, b) < kPsnrInfinite);
    CHECK(ssim(a, b) < 1.0);
  }

  TEST_CASE("window size limits") {
    try {
      (void)ssim(Frame::gray(6, 20, 0), Frame::gray(6, 20, 0));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kValidation);
    }
    CHECK_THROWS_AS(ssim(Frame::gray(10, 10, 0), Frame::gray(10, 10, 0), {SsimWindow::kGaussian11}), Error);
    CHECK(ssim(Frame::gray(11, 11, 5), Frame::gray(11, 11, 5), {SsimWindow::kGaussian11}) == 1.0);
  }

  TEST_CASE("score_pair") {
    const Frame a = Frame::gray(8, 8, 50);
    const auto perfect = score_pair(a, a, "f0");
    CHECK(perfect.saturated());
    CHECK(perfect.ssim == 1.0);
    CHECK(perfect.frame_id == "f0");
    const auto mixed = score_pair(Frame::gray(8, 8, 150), a);
    CHECK_FALSE(mixed.saturated());
    CHECK(mixed.ssim < 1.0);
  }
}
