#pragma once

#include "deepen/complex_grid.hpp"

namespace deepen {

/// Centered orthonormal 2D DFT: DC lands at (H/2, W/2), total scaling
/// 1/sqrt(H*W), so the transform is unitary and ifft2(fft2(x)) == x.
/// Dimensions must be powers of two. Throws ValidationError otherwise.
ComplexGrid fft2(const ComplexGrid& g);
ComplexGrid ifft2(const ComplexGrid& g);

bool is_power_of_two(int n);

}  // namespace deepen
