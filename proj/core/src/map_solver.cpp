#include "deepen/map_solver.hpp"

#include <cmath>

#include "deepen/cg.hpp"
#include "deepen/errors.hpp"

namespace deepen {

void MmConfig::validate() const {
  if (rel_tol <= 0.0 || cg_tol <= 0.0) throw ValidationError("mm: tolerances must be > 0");
  if (max_outer < 1 || cg_max < 1) throw ValidationError("mm: iteration limits must be >= 1");
  if (lipschitz_mode == LipschitzMode::kFixed && fixed_l <= 0.0) {
    throw ValidationError("mm: fixed Lipschitz constant must be > 0");
  }
  if (sense_lambda <= 0.0) throw ValidationError("mm: sense_lambda must be > 0");
}

double posterior_cost(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                      const ComplexGrid& x) {
  if (!all_finite(x)) throw ValidationError("posterior_cost: non-finite input");
  KspaceData ax = apply_A(op, x);
  double dc = 0.0;
  for (int c = 0; c < ax.num_coils(); ++c) dc += squared_norm(ax.coils[c] - b.coils[c]);
  return 0.5 * dc + model.energy(x);
}

double estimate_lipschitz(const EnergyModel& model, const ComplexGrid& x, int n_power) {
  if (n_power < 1) throw ValidationError("estimate_lipschitz: n_power must be >= 1");
  constexpr double kFdStep = 1e-4;
  constexpr double kFloor = 1e-3;
  constexpr double kSafety = 1.1;

  // fixed probe seed keeps the estimate (and everything downstream) replayable
  RngStream rng(0x11A57C0DEull);
  ComplexGrid v = gaussian_grid(rng, x.height, x.width, 1.0);
  const double vn = norm(v);
  if (vn == 0.0) return kFloor;
  v *= 1.0 / vn;

  double estimate = 0.0;
  for (int it = 0; it < n_power; ++it) {
    ComplexGrid xp = x, xm = x;
    axpy(kFdStep, v, xp);
    axpy(-kFdStep, v, xm);
    ComplexGrid hv = model.score(xp) - model.score(xm);
    hv *= 1.0 / (2.0 * kFdStep);
    const double hn = norm(hv);
    if (!std::isfinite(hn) || hn < 1e-12) return kFloor;
    estimate = hn;  // ||H v|| with ||v|| = 1
    v = hv * (1.0 / hn);
  }
  return std::max(kSafety * estimate, kFloor);
}

ComplexGrid mm_step(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                    const ComplexGrid& x_n, double L, const MmConfig& cfg) {
  if (L <= 0.0) throw ValidationError("mm_step: L must be > 0");
  ComplexGrid rhs = apply_AH(op, b);
  axpy(L, x_n, rhs);
  rhs -= model.score(x_n);

  const LinearOp system = [&op, L](const ComplexGrid& v) {
    ComplexGrid out = normal_op(op, v);
    axpy(L, v, out);
    return out;
  };
  return cg_solve(system, rhs, cfg.cg_tol, cfg.cg_max).x;
}

ReconResult map_reconstruct(const EnergyModel& model, const ForwardOperator& op,
                            const KspaceData& b, const MmConfig& cfg) {
  cfg.validate();
  constexpr double kDescentSlack = 1e-9;
  constexpr int kMaxDoublings = 40;

  ReconResult res;
  res.image = sense_init(op, b, cfg.sense_lambda);
  double cost = posterior_cost(model, op, b, res.image);
  res.cost_trace.push_back(cost);

  double L = cfg.lipschitz_mode == MmConfig::LipschitzMode::kFixed ? cfg.fixed_l : 1e-3;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    if (cfg.lipschitz_mode == MmConfig::LipschitzMode::kPowerIteration &&
        outer % cfg.reestimate_every == 0) {
      L = estimate_lipschitz(model, res.image, cfg.power_iters);
    }

    ComplexGrid next;
    double next_cost = 0.0;
    int doublings = 0;
    for (;; ++doublings) {
      if (doublings > kMaxDoublings) {
        throw DivergenceError("map_reconstruct: cost still increasing after " +
                              std::to_string(kMaxDoublings) + " L-doublings (L = " +
                              std::to_string(L) + ", outer " + std::to_string(outer) + ")");
      }
      next = mm_step(model, op, b, res.image, L, cfg);
      next_cost = posterior_cost(model, op, b, next);
      if (next_cost <= cost + kDescentSlack) break;
      L *= 2.0;  // restore majorization
    }

    res.image = std::move(next);
    res.cost_trace.push_back(next_cost);
    res.outer_iterations = outer + 1;

    const double denom = std::max(std::abs(cost), 1e-300);
    const bool settled = std::abs(next_cost - cost) / denom <= cfg.rel_tol;
    cost = next_cost;
    if (settled) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ReconResult pnp_ista_reconstruct(const ImageNet& denoiser, const ForwardOperator& op,
                                 const KspaceData& b, double alpha, double eta,
                                 const MmConfig& cfg) {
  cfg.validate();
  if (alpha <= 0.0 || eta <= 0.0) throw ValidationError("pnp_ista: alpha and eta must be > 0");

  ReconResult res;
  res.image = sense_init(op, b, cfg.sense_lambda);
  const ComplexGrid ahb = apply_AH(op, b);
  const double guard = 1e3 * std::max(norm(res.image), 1.0);
  const double step = alpha / (eta * eta);

  for (int t = 0; t < cfg.max_outer; ++t) {
    ComplexGrid grad = normal_op(op, res.image) - ahb;
    ComplexGrid q = res.image;
    axpy(-step, grad, q);
    ComplexGrid next = apply_net(denoiser, q);

    if (!all_finite(next) || norm(next) > guard) {
      throw DivergenceError("pnp_ista: diverged at iteration " + std::to_string(t));
    }
    const double change = norm(next - res.image) / std::max(norm(res.image), 1e-300);
    res.image = std::move(next);
    res.cost_trace.push_back(change);
    res.outer_iterations = t + 1;
    if (change <= cfg.rel_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ComplexGrid elder_infer(const EnergyModel& model, const ForwardOperator& op, const KspaceData& b,
                        double alpha, int K, double sense_lambda) {
  if (alpha < 0.0) throw ValidationError("elder_infer: alpha must be >= 0");
  if (K < 1) throw ValidationError("elder_infer: K must be >= 1");

  ComplexGrid x = sense_init(op, b, sense_lambda);
  const ComplexGrid ahb = apply_AH(op, b);
  const double guard = 1e3 * std::max(norm(x), 1.0);
  for (int k = 0; k < K; ++k) {
    ComplexGrid grad = normal_op(op, x) - ahb;
    grad += model.score(x);
    axpy(-alpha, grad, x);
    if (!all_finite(x) || norm(x) > guard) {
      throw DivergenceError("elder_infer: diverged at step " + std::to_string(k));
    }
  }
  return x;
}

}  // namespace deepen
