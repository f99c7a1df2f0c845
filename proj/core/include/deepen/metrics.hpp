#pragma once

#include <vector>

#include "deepen/complex_grid.hpp"

namespace deepen {

/// PSNR in dB on magnitude images, peak = max magnitude of ref. Identical
/// inputs return the 99 dB sentinel; every result is capped there.
double psnr(const ComplexGrid& ref, const ComplexGrid& rec);

/// Single-scale SSIM on magnitude images: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, averaged over windows that fit entirely inside the
/// image. dynamic_range <= 0 selects the ref peak.
double ssim(const ComplexGrid& ref, const ComplexGrid& rec, double dynamic_range = -1.0);

struct MetricsEntry {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Per-image metrics plus mean +/- standard deviation aggregates.
struct MetricsReport {
  std::vector<MetricsEntry> per_image;
  double psnr_mean = 0.0, psnr_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;

  void finalize();
};

double median(std::vector<double> values);

}  // namespace deepen
