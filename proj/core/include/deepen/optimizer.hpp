#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace deepen {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers spanning all parameters of one net.
struct AdamState {
  std::vector<double> m, v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void begin_step() { ++step; }
};

/// Bias-corrected adaptive-moment update of one parameter block. The block
/// lives at [offset, offset + params.size()) inside the state buffers, so a
/// net split across several arrays shares one moment state. Pure function of
/// (params, grad, moments, step index).
void adam_update_block(AdamState& state, std::size_t offset, std::span<double> params,
                       std::span<const double> grad, const AdamConfig& cfg);

}  // namespace deepen
