#include "deepen/optimizer.hpp"

#include <cmath>

#include "deepen/errors.hpp"

namespace deepen {

void adam_update_block(AdamState& state, std::size_t offset, std::span<double> params,
                       std::span<const double> grad, const AdamConfig& cfg) {
  if (params.size() != grad.size() || offset + params.size() > state.m.size()) {
    throw ValidationError("adam_update_block: size mismatch");
  }
  if (cfg.learning_rate < 0.0) throw ValidationError("adam: learning_rate must be >= 0");
  if (state.step < 1) throw ValidationError("adam: call begin_step() before updating");

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.m[offset + i];
    double& v = state.v[offset + i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace deepen
