#include "deepen/energy_model.hpp"

#include <cmath>

#include "deepen/errors.hpp"

namespace deepen {

namespace {

std::vector<ConvLayerSpec> energy_specs() {
  std::vector<ConvLayerSpec> specs;
  specs.push_back({2, EnergyNet::kChannels, true});
  for (int l = 1; l < EnergyNet::kLayers - 1; ++l)
    specs.push_back({EnergyNet::kChannels, EnergyNet::kChannels, true});
  specs.push_back({EnergyNet::kChannels, EnergyNet::kChannels, false});
  return specs;
}

std::vector<ConvLayerSpec> image_specs() {
  std::vector<ConvLayerSpec> specs;
  specs.push_back({2, EnergyNet::kChannels, true});
  for (int l = 1; l < EnergyNet::kLayers - 1; ++l)
    specs.push_back({EnergyNet::kChannels, EnergyNet::kChannels, true});
  specs.push_back({EnergyNet::kChannels, 2, false});
  return specs;
}

void check_input(const ComplexGrid& x) {
  if (x.height < 8 || x.width < 8) {
    throw ValidationError("energy: image must be at least 8x8, got " + std::to_string(x.height) +
                          "x" + std::to_string(x.width));
  }
  if (!all_finite(x)) throw ValidationError("energy: non-finite input");
}

}  // namespace

EnergyNet::EnergyNet() : stack(energy_specs()), head(kChannels, 0.0) {}

EnergyNet EnergyNet::random_init(RngStream& rng) {
  EnergyNet net;
  net.stack.init_he(rng);
  const double head_std = 1.0 / std::sqrt(static_cast<double>(kChannels));
  for (auto& h : net.head) h = head_std * rng.normal_pair().first;
  return net;
}

void EnergyGrad::zero() {
  std::fill(stack.begin(), stack.end(), 0.0);
  std::fill(head.begin(), head.end(), 0.0);
}

double EnergyGrad::squared_norm() const {
  double s = 0.0;
  for (double v : stack) s += v * v;
  for (double v : head) s += v * v;
  return s;
}

void EnergyGrad::add_scaled(const EnergyGrad& o, double s) {
  for (std::size_t i = 0; i < stack.size(); ++i) stack[i] += s * o.stack[i];
  for (std::size_t i = 0; i < head.size(); ++i) head[i] += s * o.head[i];
}

double energy(const EnergyNet& net, const ComplexGrid& x, EnergyTape* tape) {
  check_input(x);
  EnergyTape local;
  EnergyTape& t = tape ? *tape : local;

  const Tensor features = stack_forward(net.stack, grid_to_tensor(x), &t.stack_tape);
  t.channel_sums.assign(EnergyNet::kChannels, 0.0);
  for (int c = 0; c < features.ch; ++c) {
    const double* p = features.plane(c);
    double s = 0.0;
    for (std::size_t i = 0; i < features.plane_size(); ++i) s += p[i];
    t.channel_sums[c] = s;
  }
  double pre = 0.0;
  for (int c = 0; c < EnergyNet::kChannels; ++c) pre += net.head[c] * t.channel_sums[c];
  t.pre_head = pre;
  t.sign = pre > 0.0 ? 1.0 : (pre < 0.0 ? -1.0 : 0.0);
  return std::abs(pre);
}

namespace {

// Cotangent of the last conv output under E = |sum_c head_c * sum_p f_c(p)|:
// a constant plane sign * head_c per channel.
Tensor head_cotangent(const EnergyNet& net, const EnergyTape& tape) {
  Tensor dout(EnergyNet::kChannels, tape.stack_tape.h, tape.stack_tape.w);
  for (int c = 0; c < EnergyNet::kChannels; ++c) {
    const double g = tape.sign * net.head[c];
    double* p = dout.plane(c);
    for (std::size_t i = 0; i < dout.plane_size(); ++i) p[i] = g;
  }
  return dout;
}

}  // namespace

ComplexGrid score(const EnergyNet& net, const ComplexGrid& x) {
  EnergyTape tape;
  energy(net, x, &tape);
  Tensor din = stack_backward(net.stack, tape.stack_tape, head_cotangent(net, tape), nullptr, 1.0,
                              true);
  return tensor_to_grid(din);
}

void param_grad(const EnergyNet& net, const EnergyTape& tape, double sign, EnergyGrad& accum) {
  if (tape.stack_tape.inputs.size() != static_cast<std::size_t>(net.stack.num_layers()) ||
      tape.channel_sums.size() != static_cast<std::size_t>(EnergyNet::kChannels)) {
    throw ValidationError("param_grad: tape does not match net");
  }
  for (int c = 0; c < EnergyNet::kChannels; ++c) {
    accum.head[c] += sign * tape.sign * tape.channel_sums[c];
  }
  stack_backward(net.stack, tape.stack_tape, head_cotangent(net, tape), &accum.stack, sign, false);
}

ImageNet::ImageNet(bool residual_skip) : stack(image_specs()), residual(residual_skip) {}

ImageNet ImageNet::random_init(RngStream& rng, bool residual_skip) {
  ImageNet net(residual_skip);
  net.stack.init_he(rng);
  return net;
}

ComplexGrid apply_net(const ImageNet& net, const ComplexGrid& x, StackTape* tape) {
  check_input(x);
  Tensor out = stack_forward(net.stack, grid_to_tensor(x), tape);
  ComplexGrid y = tensor_to_grid(out);
  if (net.residual) y += x;
  return y;
}

double muse_energy(const ImageNet& psi, const ComplexGrid& x) {
  const ComplexGrid r = x - apply_net(psi, x);
  return 0.5 * squared_norm(r);
}

ComplexGrid muse_score(const ImageNet& psi, const ComplexGrid& x) {
  StackTape tape;
  const ComplexGrid r = x - apply_net(psi, x, &tape);
  // dE/dx = r - J_psi^T r (+ residual-skip correction when psi has one)
  Tensor jt = stack_backward(psi.stack, tape, grid_to_tensor(r), nullptr, 1.0, true);
  ComplexGrid g = r - tensor_to_grid(jt);
  if (psi.residual) g -= r;  // J(x + f)^T r = r + Jf^T r
  return g;
}

void muse_param_grad(const ImageNet& psi, const ComplexGrid& x, double scale,
                     std::vector<double>& grad) {
  StackTape tape;
  const ComplexGrid r = x - apply_net(psi, x, &tape);
  // dE/dtheta = -J_theta^T r
  stack_backward(psi.stack, tape, grid_to_tensor(r), &grad, -scale, false);
}

}  // namespace deepen
