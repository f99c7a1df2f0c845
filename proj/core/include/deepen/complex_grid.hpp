#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "deepen/rng.hpp"

namespace deepen {

using cplx = std::complex<double>;

/// H x W complex raster, row-major. The workhorse for images and per-coil
/// k-space planes. Value semantics; all free functions below are pure.
struct ComplexGrid {
  int height = 0;
  int width = 0;
  std::vector<cplx> values;

  ComplexGrid() = default;
  ComplexGrid(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w) {}

  std::size_t size() const { return values.size(); }

  cplx& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  const cplx& at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool same_shape(const ComplexGrid& o) const { return height == o.height && width == o.width; }

  ComplexGrid& operator+=(const ComplexGrid& o);
  ComplexGrid& operator-=(const ComplexGrid& o);
  ComplexGrid& operator*=(double s);
  ComplexGrid& operator*=(cplx s);
};

/// Real-valued H x W raster (variance maps, magnitudes, window weights).
struct RealGrid {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  RealGrid() = default;
  RealGrid(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

ComplexGrid operator+(ComplexGrid a, const ComplexGrid& b);
ComplexGrid operator-(ComplexGrid a, const ComplexGrid& b);
ComplexGrid operator*(ComplexGrid a, double s);
ComplexGrid operator*(ComplexGrid a, cplx s);

/// Elementwise product a.*b.
ComplexGrid hadamard(const ComplexGrid& a, const ComplexGrid& b);
/// Elementwise conj(a).*b.
ComplexGrid conj_hadamard(const ComplexGrid& a, const ComplexGrid& b);

/// Complex inner product sum(conj(a) * b).
cplx dot(const ComplexGrid& a, const ComplexGrid& b);
/// Re(dot(a, b)); the inner product of the real channel-pair embedding.
double rdot(const ComplexGrid& a, const ComplexGrid& b);

double squared_norm(const ComplexGrid& g);
double norm(const ComplexGrid& g);
double max_abs(const ComplexGrid& g);
bool all_finite(const ComplexGrid& g);

/// y += s * x.
void axpy(cplx s, const ComplexGrid& x, ComplexGrid& y);

RealGrid magnitude(const ComplexGrid& g);

/// Grid of complex Gaussians; real and imaginary parts independent, each
/// N(0, std^2). Always advances rng (also when std == 0).
ComplexGrid gaussian_grid(RngStream& rng, int h, int w, double std);

}  // namespace deepen
