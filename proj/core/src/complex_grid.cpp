#include "deepen/complex_grid.hpp"

#include <cmath>

#include "deepen/errors.hpp"

namespace deepen {

namespace {
void require_same_shape(const ComplexGrid& a, const ComplexGrid& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("grid shape mismatch: " + std::to_string(a.height) + "x" +
                          std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                          std::to_string(b.width));
  }
}
}  // namespace

ComplexGrid& ComplexGrid::operator+=(const ComplexGrid& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
  return *this;
}

ComplexGrid& ComplexGrid::operator-=(const ComplexGrid& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
  return *this;
}

ComplexGrid& ComplexGrid::operator*=(double s) {
  for (auto& v : values) v *= s;
  return *this;
}

ComplexGrid& ComplexGrid::operator*=(cplx s) {
  for (auto& v : values) v *= s;
  return *this;
}

ComplexGrid operator+(ComplexGrid a, const ComplexGrid& b) { return a += b; }
ComplexGrid operator-(ComplexGrid a, const ComplexGrid& b) { return a -= b; }
ComplexGrid operator*(ComplexGrid a, double s) { return a *= s; }
ComplexGrid operator*(ComplexGrid a, cplx s) { return a *= s; }

ComplexGrid hadamard(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a, b);
  ComplexGrid out(a.height, a.width);
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
  return out;
}

ComplexGrid conj_hadamard(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a, b);
  ComplexGrid out(a.height, a.width);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    out.values[i] = std::conj(a.values[i]) * b.values[i];
  return out;
}

cplx dot(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a, b);
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += std::conj(a.values[i]) * b.values[i];
  return s;
}

double rdot(const ComplexGrid& a, const ComplexGrid& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    s += a.values[i].real() * b.values[i].real() + a.values[i].imag() * b.values[i].imag();
  }
  return s;
}

double squared_norm(const ComplexGrid& g) {
  double s = 0.0;
  for (const auto& v : g.values) s += v.real() * v.real() + v.imag() * v.imag();
  return s;
}

double norm(const ComplexGrid& g) { return std::sqrt(squared_norm(g)); }

double max_abs(const ComplexGrid& g) {
  double m = 0.0;
  for (const auto& v : g.values) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const ComplexGrid& g) {
  for (const auto& v : g.values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

void axpy(cplx s, const ComplexGrid& x, ComplexGrid& y) {
  require_same_shape(x, y);
  for (std::size_t i = 0; i < x.values.size(); ++i) y.values[i] += s * x.values[i];
}

RealGrid magnitude(const ComplexGrid& g) {
  RealGrid out(g.height, g.width);
  for (std::size_t i = 0; i < g.values.size(); ++i) out.values[i] = std::abs(g.values[i]);
  return out;
}

ComplexGrid gaussian_grid(RngStream& rng, int h, int w, double std) {
  if (std < 0.0) throw ValidationError("gaussian_grid: std must be >= 0");
  ComplexGrid out(h, w);
  for (auto& v : out.values) {
    const auto [re, im] = rng.normal_pair();
    v = cplx(std * re, std * im);
  }
  return out;
}

}  // namespace deepen
