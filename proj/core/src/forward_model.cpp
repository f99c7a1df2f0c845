#include "deepen/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepen/errors.hpp"
#include "deepen/fft.hpp"

namespace deepen {

int SamplingMask::ones() const {
  return static_cast<int>(std::count(pattern.begin(), pattern.end(), std::uint8_t{1}));
}

double SamplingMask::acceleration() const {
  const int n = ones();
  if (n == 0) return 0.0;
  return static_cast<double>(height) * width / n;
}

namespace {

void require_image_match(const ForwardOperator& op, const ComplexGrid& x) {
  if (x.height != op.height() || x.width != op.width()) {
    throw ValidationError("forward operator: image is " + std::to_string(x.height) + "x" +
                          std::to_string(x.width) + ", operator expects " +
                          std::to_string(op.height()) + "x" + std::to_string(op.width()));
  }
  if (op.mask.height != op.csm.height() || op.mask.width != op.csm.width()) {
    throw ValidationError("forward operator: mask and coil maps disagree on dimensions");
  }
}

void apply_mask(ComplexGrid& g, const SamplingMask& m) {
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    if (!m.pattern[i]) g.values[i] = cplx(0.0, 0.0);
  }
}

}  // namespace

KspaceData apply_A(const ForwardOperator& op, const ComplexGrid& x) {
  require_image_match(op, x);
  KspaceData out;
  out.coils.reserve(op.num_coils());
  for (int c = 0; c < op.num_coils(); ++c) {
    ComplexGrid plane = fft2(hadamard(op.csm.maps[c], x));
    apply_mask(plane, op.mask);
    out.coils.push_back(std::move(plane));
  }
  return out;
}

ComplexGrid apply_AH(const ForwardOperator& op, const KspaceData& y) {
  if (y.num_coils() != op.num_coils()) {
    throw ValidationError("apply_AH: k-space has " + std::to_string(y.num_coils()) +
                          " coils, operator expects " + std::to_string(op.num_coils()));
  }
  ComplexGrid out(op.height(), op.width());
  for (int c = 0; c < op.num_coils(); ++c) {
    if (y.coils[c].height != op.height() || y.coils[c].width != op.width()) {
      throw ValidationError("apply_AH: coil plane dimension mismatch");
    }
    ComplexGrid plane = y.coils[c];
    apply_mask(plane, op.mask);
    out += conj_hadamard(op.csm.maps[c], ifft2(plane));
  }
  return out;
}

ComplexGrid normal_op(const ForwardOperator& op, const ComplexGrid& x) {
  require_image_match(op, x);
  ComplexGrid out(op.height(), op.width());
  for (int c = 0; c < op.num_coils(); ++c) {
    ComplexGrid plane = fft2(hadamard(op.csm.maps[c], x));
    apply_mask(plane, op.mask);
    out += conj_hadamard(op.csm.maps[c], ifft2(plane));
  }
  return out;
}

KspaceData simulate_measurements(const ForwardOperator& op, const ComplexGrid& x, RngStream& rng) {
  if (!std::isfinite(op.noise_std) || op.noise_std < 0.0) {
    throw ValidationError("simulate_measurements: noise_std must be finite and >= 0");
  }
  KspaceData b = apply_A(op, x);
  for (auto& plane : b.coils) {
    for (std::size_t i = 0; i < plane.values.size(); ++i) {
      if (!op.mask.pattern[i]) continue;
      const auto [re, im] = rng.normal_pair();
      plane.values[i] += cplx(op.noise_std * re, op.noise_std * im);
    }
  }
  return b;
}

ComplexGrid sense_init(const ForwardOperator& op, const KspaceData& b, double lambda) {
  if (lambda <= 0.0) throw ValidationError("sense_init: lambda must be > 0");
  const ComplexGrid rhs = apply_AH(op, b);
  const LinearOp system = [&op, lambda](const ComplexGrid& v) {
    ComplexGrid out = normal_op(op, v);
    axpy(lambda, v, out);
    return out;
  };
  return cg_solve(system, rhs, 1e-8, 200).x;
}

namespace {

// Weighted sampling without replacement via exponential clocks: the k
// smallest keys -log(u)/w are a weighted sample of size k.
std::vector<int> weighted_sample(const std::vector<double>& weights, int k, RngStream& rng) {
  std::vector<std::pair<double, int>> keys;
  keys.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double u = 1.0 - rng.uniform01();  // (0, 1]
    keys.emplace_back(-std::log(u) / weights[i], static_cast<int>(i));
  }
  std::partial_sort(keys.begin(), keys.begin() + k, keys.end());
  std::vector<int> chosen(k);
  for (int i = 0; i < k; ++i) chosen[i] = keys[i].second;
  return chosen;
}

}  // namespace

SamplingMask gen_mask(MaskKind kind, int h, int w, double acceleration, int acs_lines,
                      RngStream& rng) {
  if (acceleration < 1.0) throw ValidationError("gen_mask: acceleration must be >= 1");
  if (acs_lines < 1 || acs_lines >= std::min(h, w) / 2) {
    throw ValidationError("gen_mask: acs_lines must be in [1, min(h,w)/2)");
  }

  SamplingMask mask;
  mask.kind = kind;
  mask.height = h;
  mask.width = w;
  mask.pattern.assign(static_cast<std::size_t>(h) * w, 0);

  if (kind == MaskKind::oneD) {
    const int target_cols = std::max(1, static_cast<int>(std::llround(w / acceleration)));
    const int acs_start = (w - acs_lines) / 2;
    if (acs_lines > target_cols) {
      throw ValidationError("gen_mask: acceleration too high for ACS size (need " +
                            std::to_string(acs_lines) + " ACS columns, budget " +
                            std::to_string(target_cols) + ")");
    }
    std::vector<std::uint8_t> col_on(w, 0);
    for (int c = acs_start; c < acs_start + acs_lines; ++c) col_on[c] = 1;

    std::vector<double> weights;
    std::vector<int> candidates;
    const double sigma = 0.25 * w;
    for (int c = 0; c < w; ++c) {
      if (col_on[c]) continue;
      const double d = c - (w - 1) / 2.0;
      weights.push_back(std::exp(-d * d / (2.0 * sigma * sigma)) + 0.01);
      candidates.push_back(c);
    }
    const int extra = std::min<int>(target_cols - acs_lines, static_cast<int>(candidates.size()));
    for (int idx : weighted_sample(weights, extra, rng)) col_on[candidates[idx]] = 1;

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) mask.pattern[static_cast<std::size_t>(y) * w + x] = col_on[x];
    }
  } else {
    const int target = std::max(1, static_cast<int>(std::llround(h * static_cast<double>(w) /
                                                                 acceleration)));
    const int ys = (h - acs_lines) / 2, xs = (w - acs_lines) / 2;
    if (acs_lines * acs_lines > target) {
      throw ValidationError("gen_mask: acceleration too high for ACS size (ACS block " +
                            std::to_string(acs_lines * acs_lines) + " points, budget " +
                            std::to_string(target) + ")");
    }
    for (int y = ys; y < ys + acs_lines; ++y) {
      for (int x = xs; x < xs + acs_lines; ++x) mask.pattern[static_cast<std::size_t>(y) * w + x] = 1;
    }

    std::vector<double> weights;
    std::vector<int> candidates;
    const double sigma = 0.30 * std::min(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (mask.pattern[i]) continue;
        const double dy = y - (h - 1) / 2.0, dx = x - (w - 1) / 2.0;
        const double r2 = dy * dy + dx * dx;
        weights.push_back(std::exp(-r2 / (2.0 * sigma * sigma)) + 0.01);
        candidates.push_back(static_cast<int>(i));
      }
    }
    const int extra =
        std::min<int>(target - acs_lines * acs_lines, static_cast<int>(candidates.size()));
    for (int idx : weighted_sample(weights, extra, rng)) mask.pattern[candidates[idx]] = 1;
  }
  return mask;
}

CoilSensitivities gen_csm(int num_coils, int h, int w, RngStream& rng) {
  if (num_coils < 1) throw ValidationError("gen_csm: num_coils must be >= 1");
  constexpr double kPi = 3.14159265358979323846;

  CoilSensitivities csm;
  csm.maps.reserve(num_coils);
  const double ring = 0.35 * std::min(h, w);
  for (int c = 0; c < num_coils; ++c) {
    const double jitter = 0.4 * (rng.uniform01() - 0.5);
    const double theta = 2.0 * kPi * (c + jitter) / num_coils;
    const double cy = h / 2.0 + ring * std::sin(theta);
    const double cx = w / 2.0 + ring * std::cos(theta);
    const double sigma = (0.6 + 0.2 * rng.uniform01()) * std::min(h, w);
    const double pa = kPi * (rng.uniform01() - 0.5);  // linear phase ramps
    const double pb = kPi * (rng.uniform01() - 0.5);
    const double pc = 2.0 * kPi * rng.uniform01();

    ComplexGrid m(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double mag = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        const double phase = pa * (x - cx) / w + pb * (y - cy) / h + pc;
        m.at(y, x) = std::polar(mag, phase);
      }
    }
    csm.maps.push_back(std::move(m));
  }

  // pixelwise sum-of-squares normalization
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (const auto& m : csm.maps) s += std::norm(m.at(y, x));
      const double inv = 1.0 / std::sqrt(s);
      for (auto& m : csm.maps) m.at(y, x) *= inv;
    }
  }
  return csm;
}

}  // namespace deepen
