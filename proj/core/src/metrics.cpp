#include "deepen/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "deepen/errors.hpp"

namespace deepen {

namespace {
constexpr double kPsnrSentinel = 99.0;

void require_same_dims(const ComplexGrid& a, const ComplexGrid& b) {
  if (!a.same_shape(b)) throw ValidationError("metrics: image dimensions differ");
}
}  // namespace

double psnr(const ComplexGrid& ref, const ComplexGrid& rec) {
  require_same_dims(ref, rec);
  const double peak = max_abs(ref);
  if (peak == 0.0) throw ValidationError("psnr: reference image is zero");

  double mse = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const double d = std::abs(ref.values[i]) - std::abs(rec.values[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(ref.size());
  if (mse == 0.0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, 20.0 * std::log10(peak / std::sqrt(mse)));
}

double ssim(const ComplexGrid& ref, const ComplexGrid& rec, double dynamic_range) {
  require_same_dims(ref, rec);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kK1 = 0.01, kK2 = 0.03;
  if (ref.height < kWin || ref.width < kWin) {
    throw ValidationError("ssim: image smaller than the 11x11 window");
  }

  const double L = dynamic_range > 0.0 ? dynamic_range : max_abs(ref);
  const double c1 = (kK1 * L) * (kK1 * L);
  const double c2 = (kK2 * L) * (kK2 * L);

  // normalized Gaussian window
  double win[kWin][kWin];
  double wsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - kWin / 2, dx = j - kWin / 2;
      win[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
      wsum += win[i][j];
    }
  }
  for (auto& row : win)
    for (double& v : row) v /= wsum;

  const RealGrid a = magnitude(ref);
  const RealGrid b = magnitude(rec);

  double total = 0.0;
  int windows = 0;
  for (int y = 0; y + kWin <= ref.height; ++y) {
    for (int x = 0; x + kWin <= ref.width; ++x) {
      double ma = 0.0, mb = 0.0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          ma += win[i][j] * a.at(y + i, x + j);
          mb += win[i][j] * b.at(y + i, x + j);
        }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double da = a.at(y + i, x + j) - ma;
          const double db = b.at(y + i, x + j) - mb;
          va += win[i][j] * da * da;
          vb += win[i][j] * db * db;
          cov += win[i][j] * da * db;
        }
      const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
      const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
      total += num / den;
      ++windows;
    }
  }
  return total / windows;
}

void MetricsReport::finalize() {
  const int n = static_cast<int>(per_image.size());
  if (n == 0) return;
  double ps = 0.0, ss = 0.0;
  for (const auto& e : per_image) {
    ps += e.psnr_db;
    ss += e.ssim;
  }
  psnr_mean = ps / n;
  ssim_mean = ss / n;
  double pv = 0.0, sv = 0.0;
  for (const auto& e : per_image) {
    pv += (e.psnr_db - psnr_mean) * (e.psnr_db - psnr_mean);
    sv += (e.ssim - ssim_mean) * (e.ssim - ssim_mean);
  }
  psnr_std = n > 1 ? std::sqrt(pv / (n - 1)) : 0.0;
  ssim_std = n > 1 ? std::sqrt(sv / (n - 1)) : 0.0;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace deepen
