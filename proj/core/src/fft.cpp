#include "deepen/fft.hpp"

#include <cmath>
#include <vector>

#include "deepen/errors.hpp"

namespace deepen {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

constexpr double kPi = 3.14159265358979323846;

// In-place iterative radix-2 Cooley-Tukey on a strided sequence.
// sign = -1: forward kernel, sign = +1: inverse kernel. No scaling here.
void fft1d(cplx* data, int n, int stride, int sign) {
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * kPi / len;
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        cplx* u = data + (i + k) * stride;
        cplx* v = data + (i + k + len / 2) * stride;
        const cplx t = *v * w;
        *v = *u - t;
        *u += t;
        w *= wlen;
      }
    }
  }
}

// Swap quadrants so the center sample moves to the origin. Self-inverse for
// even dimensions (always the case here).
ComplexGrid shift_half(const ComplexGrid& g) {
  ComplexGrid out(g.height, g.width);
  const int hh = g.height / 2, hw = g.width / 2;
  for (int y = 0; y < g.height; ++y) {
    const int ys = (y + hh) % g.height;
    for (int x = 0; x < g.width; ++x) {
      out.at(y, x) = g.at(ys, (x + hw) % g.width);
    }
  }
  return out;
}

ComplexGrid transform(const ComplexGrid& g, int sign) {
  if (!is_power_of_two(g.height) || !is_power_of_two(g.width)) {
    throw ValidationError("fft2: dimensions must be powers of two, got " +
                          std::to_string(g.height) + "x" + std::to_string(g.width));
  }
  ComplexGrid work = shift_half(g);
  for (int y = 0; y < work.height; ++y) fft1d(&work.at(y, 0), work.width, 1, sign);
  for (int x = 0; x < work.width; ++x) fft1d(&work.at(0, x), work.height, work.width, sign);
  work *= 1.0 / std::sqrt(static_cast<double>(work.height) * work.width);
  return shift_half(work);
}

}  // namespace

ComplexGrid fft2(const ComplexGrid& g) { return transform(g, -1); }
ComplexGrid ifft2(const ComplexGrid& g) { return transform(g, +1); }

}  // namespace deepen
