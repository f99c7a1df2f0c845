#pragma once

#include <vector>

#include "deepen/complex_grid.hpp"
#include "deepen/energy_model.hpp"
#include "deepen/forward_model.hpp"

namespace deepen {

struct MmConfig {
  enum class LipschitzMode { kPowerIteration, kBacktracking, kFixed };

  double rel_tol = 1e-6;
  int max_outer = 500;
  double cg_tol = 1e-8;
  int cg_max = 50;
  LipschitzMode lipschitz_mode = LipschitzMode::kPowerIteration;
  double fixed_l = 1.0;        // used by kFixed
  int power_iters = 10;        // power-iteration count per estimate
  int reestimate_every = 10;   // outer iterations between estimates
  double sense_lambda = 1e-2;  // initialization regularizer

  void validate() const;
};

struct ReconResult {
  ComplexGrid image;
  std::vector<double> cost_trace;  // posterior cost per outer iteration, cost_trace[0] at init
  bool converged = false;
  int outer_iterations = 0;
};

/// Posterior cost 0.5 ||Ax - b||^2 + E(x). The constant log-partition term is
/// omitted; it does not affect optimization.
double posterior_cost(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                      const ComplexGrid& x);

/// Spectral norm of the energy Hessian at x, estimated by power iteration on
/// central-difference Hessian-vector products (step 1e-4), times a 1.1 safety
/// factor. Returns the floor 1e-3 when the Hessian action degenerates.
double estimate_lipschitz(const EnergyModel& model, const ComplexGrid& x, int n_power);

/// One majorize-minimize step: solves (A^H A + L I) x = A^H b + L x_n - score(x_n)
/// by conjugate gradients.
ComplexGrid mm_step(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                    const ComplexGrid& x_n, double L, const MmConfig& cfg);

/// MAP estimate by MM iteration from the SENSE initialization. The cost trace
/// is non-increasing (within 1e-9 slack) by construction: any step that
/// raises the cost is retried with L doubled, which restores the surrogate's
/// majorization property. Aborts with DivergenceError after 40 doublings.
ReconResult map_reconstruct(const EnergyModel& model, const ForwardOperator& op,
                            const KspaceData& b, const MmConfig& cfg);

/// Plug-and-play ISTA with a pre-trained denoiser:
///   q = x - alpha/eta^2 * A^H(Ax - b); x' = D(q)
/// Stops on relative iterate change <= cfg.rel_tol or cfg.max_outer
/// iterations. cost_trace holds the iterate-change norms (this method has no
/// energy).
ReconResult pnp_ista_reconstruct(const ImageNet& denoiser, const ForwardOperator& op,
                                 const KspaceData& b, double alpha, double eta,
                                 const MmConfig& cfg);

/// Fixed-step gradient descent on the posterior cost for K steps from the
/// SENSE initialization.
ComplexGrid elder_infer(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                        double alpha, int K, double sense_lambda = 1e-2);

}  // namespace deepen
