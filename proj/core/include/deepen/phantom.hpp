#pragma once

#include <cstdint>

#include "deepen/complex_grid.hpp"

namespace deepen {

/// Randomized overlapping-ellipse phantom. The first ellipse is large and
/// bright (magnitude >= 0.5 guaranteed); magnitudes are clamped to [0, 1];
/// the phase is a smooth random field scaled by phase_amplitude.
struct PhantomSpec {
  int size = 32;              // power of two
  int n_ellipses = 6;
  double intensity_lo = 0.15;
  double intensity_hi = 0.55;
  double phase_amplitude = 0.7;  // radians
  std::uint64_t seed = 1;
};

ComplexGrid gen_phantom(const PhantomSpec& spec);

}  // namespace deepen
