#include "deepen/cg.hpp"

#include <cmath>

#include "deepen/errors.hpp"

namespace deepen {

CgResult cg_solve(const LinearOp& op, const ComplexGrid& rhs, double tol, int max_iter) {
  if (tol <= 0.0) throw ValidationError("cg_solve: tol must be > 0");

  const double rhs_norm = norm(rhs);
  CgResult res;
  res.x = ComplexGrid(rhs.height, rhs.width);
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }

  ComplexGrid r = rhs;  // residual of x = 0
  ComplexGrid p = r;
  double rr = squared_norm(r);

  for (int k = 0; k < max_iter; ++k) {
    const ComplexGrid ap = op(p);
    const double p_ap = rdot(p, ap);
    if (!std::isfinite(p_ap) || p_ap <= 0.0) {
      throw DivergenceError("cg_solve: non-SPD operator (p'Ap = " + std::to_string(p_ap) +
                            " at iteration " + std::to_string(k) + ")");
    }
    const double alpha = rr / p_ap;
    axpy(alpha, p, res.x);
    axpy(-alpha, ap, r);
    const double rr_new = squared_norm(r);
    if (!std::isfinite(rr_new)) {
      throw DivergenceError("cg_solve: non-finite residual at iteration " + std::to_string(k));
    }
    res.iterations = k + 1;
    res.rel_residual = std::sqrt(rr_new) / rhs_norm;
    if (res.rel_residual <= tol) {
      res.converged = true;
      return res;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    // p = r + beta * p
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = r.values[i] + beta * p.values[i];
  }
  return res;
}

}  // namespace deepen
