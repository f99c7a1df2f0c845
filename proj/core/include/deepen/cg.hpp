#pragma once

#include <functional>

#include "deepen/complex_grid.hpp"

namespace deepen {

/// A self-adjoint positive-definite map on grids.
using LinearOp = std::function<ComplexGrid(const ComplexGrid&)>;

struct CgResult {
  ComplexGrid x;
  bool converged = false;
  int iterations = 0;
  double rel_residual = 0.0;
};

/// Conjugate gradients for op(x) = rhs, starting from zero. Stops when
/// ||op(x) - rhs|| <= tol * ||rhs|| or after max_iter iterations (best
/// iterate returned with converged = false). Throws DivergenceError on a
/// non-finite residual or a non-positive curvature p'op(p), both of which
/// signal a non-SPD operator.
CgResult cg_solve(const LinearOp& op, const ComplexGrid& rhs, double tol, int max_iter);

}  // namespace deepen
