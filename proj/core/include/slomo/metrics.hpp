#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "slomo/frame.hpp"

namespace slomo::metrics {

/// PSNR of identical frames.
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();
inline constexpr int kSsimWindow = 7;

/// Mean squared error over every RGB sample.
double mse(const Frame& reference, const Frame& test);

/// 10 log10(255^2 / MSE) in dB; kPsnrInfinite when MSE is 0.
double psnr(const Frame& reference, const Frame& test);

enum class SsimWindow {
  kUniform7,    // 7x7 box, sample covariance
  kGaussian11,  // 11x11 Gaussian, sigma 1.5, population covariance
};

struct SsimOptions {
  SsimWindow window = SsimWindow::kUniform7;
};

/// Mean SSIM over all windows lying fully inside the frame, computed per RGB
/// channel and averaged. K1 = 0.01, K2 = 0.03, L = 255.
/// Throws kValidation when the frame is smaller than the window.
double ssim(const Frame& reference, const Frame& test, const SsimOptions& options = {});

struct FramePairScore {
  std::string frame_id;
  double psnr = 0.0;
  double ssim = 0.0;

  bool saturated() const noexcept { return std::isinf(psnr); }
  friend bool operator==(const FramePairScore&, const FramePairScore&) = default;
};

FramePairScore score_pair(const Frame& reference, const Frame& test, std::string frame_id = {},
                          const SsimOptions& options = {});

}  // namespace slomo::metrics
