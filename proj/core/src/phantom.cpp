#include "deepen/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "deepen/errors.hpp"
#include "deepen/fft.hpp"

namespace deepen {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Ellipse {
  double cy, cx, a, b, angle, intensity;

  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = (c * dx + s * dy) / a;
    const double v = (-s * dx + c * dy) / b;
    return u * u + v * v <= 1.0;
  }
};

}  // namespace

ComplexGrid gen_phantom(const PhantomSpec& spec) {
  if (!is_power_of_two(spec.size)) throw ValidationError("gen_phantom: size must be a power of two");
  if (spec.n_ellipses < 0) throw ValidationError("gen_phantom: n_ellipses must be >= 0");
  if (!(spec.intensity_lo <= spec.intensity_hi)) {
    throw ValidationError("gen_phantom: intensity range inverted");
  }

  const int n = spec.size;
  ComplexGrid out(n, n);
  if (spec.n_ellipses == 0) return out;

  RngStream rng(spec.seed);
  std::vector<Ellipse> ellipses;
  for (int e = 0; e < spec.n_ellipses; ++e) {
    Ellipse el;
    if (e == 0) {
      // big bright body so max magnitude stays >= 0.5 after clamping
      el.cy = n * (0.5 + 0.08 * (rng.uniform01() - 0.5));
      el.cx = n * (0.5 + 0.08 * (rng.uniform01() - 0.5));
      el.a = n * (0.28 + 0.10 * rng.uniform01());
      el.b = n * (0.28 + 0.10 * rng.uniform01());
      el.intensity = 0.55 + 0.25 * rng.uniform01();
    } else {
      el.cy = n * (0.15 + 0.7 * rng.uniform01());
      el.cx = n * (0.15 + 0.7 * rng.uniform01());
      el.a = n * (0.05 + 0.18 * rng.uniform01());
      el.b = n * (0.05 + 0.18 * rng.uniform01());
      el.intensity = spec.intensity_lo +
                     (spec.intensity_hi - spec.intensity_lo) * rng.uniform01();
      if (rng.uniform01() < 0.35) el.intensity = -el.intensity;  // darker inclusions
    }
    el.angle = kPi * rng.uniform01();
    ellipses.push_back(el);
  }

  // smooth random phase field: three broad Gaussian bumps plus a ramp,
  // normalized to peak 1 and scaled by the requested amplitude
  const double bump_cy[3] = {n * rng.uniform01(), n * rng.uniform01(), n * rng.uniform01()};
  const double bump_cx[3] = {n * rng.uniform01(), n * rng.uniform01(), n * rng.uniform01()};
  const double bump_s[3] = {n * (0.3 + 0.3 * rng.uniform01()), n * (0.3 + 0.3 * rng.uniform01()),
                            n * (0.3 + 0.3 * rng.uniform01())};
  const double bump_w[3] = {rng.uniform01() - 0.5, rng.uniform01() - 0.5, rng.uniform01() - 0.5};
  const double ramp_y = rng.uniform01() - 0.5, ramp_x = rng.uniform01() - 0.5;

  RealGrid phase(n, n);
  double peak = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double p = ramp_y * (y - n / 2.0) / n + ramp_x * (x - n / 2.0) / n;
      for (int k = 0; k < 3; ++k) {
        const double dy = y - bump_cy[k], dx = x - bump_cx[k];
        p += bump_w[k] * std::exp(-(dy * dy + dx * dx) / (2.0 * bump_s[k] * bump_s[k]));
      }
      phase.at(y, x) = p;
      peak = std::max(peak, std::abs(p));
    }
  }
  const double phase_scale = peak > 0.0 ? spec.phase_amplitude / peak : 0.0;

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double mag = 0.0;
      for (const auto& el : ellipses) {
        if (el.contains(y, x)) mag += el.intensity;
      }
      mag = std::clamp(mag, 0.0, 1.0);
      out.at(y, x) = std::polar(mag, phase_scale * phase.at(y, x));
    }
  }
  return out;
}

}  // namespace deepen
