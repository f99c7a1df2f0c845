#pragma once

#include <memory>
#include <vector>

#include "deepen/complex_grid.hpp"
#include "deepen/conv_net.hpp"
#include "deepen/rng.hpp"

namespace deepen {

/// Scalar image energy with an input gradient. The interface the samplers and
/// MAP solvers run against; concrete models below, test doubles in tests.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual double energy(const ComplexGrid& x) const = 0;
  virtual ComplexGrid score(const ComplexGrid& x) const = 0;
};

/// Convolutional energy: 5 conv layers (2->64, then 64->64; ReLU between
/// layers 1-4, none after layer 5), a per-channel 1x1 head, a global spatial
/// sum, and an absolute value. Nonnegative by construction, fully
/// convolutional in the image size.
struct EnergyNet {
  static constexpr int kChannels = 64;
  static constexpr int kLayers = 5;

  ConvStack stack;
  std::vector<double> head;  // kChannels per-channel projection weights

  EnergyNet();

  std::size_t param_count() const { return stack.param_count() + head.size(); }

  /// He-scaled conv weights, zero biases, small Gaussian head. The head must
  /// not start at zero: the absolute-value output has subgradient 0 there and
  /// no parameter would ever receive a gradient.
  static EnergyNet random_init(RngStream& rng);
};

struct EnergyTape {
  StackTape stack_tape;
  std::vector<double> channel_sums;  // spatial sums of the last conv output
  double pre_head = 0.0;             // head-weighted sum, before the absolute value
  double sign = 0.0;                 // d|s|/ds with sign(0) := 0
};

/// Gradient accumulator matching EnergyNet's parameter layout.
struct EnergyGrad {
  std::vector<double> stack;
  std::vector<double> head;

  explicit EnergyGrad(const EnergyNet& net)
      : stack(net.stack.param_count(), 0.0), head(net.head.size(), 0.0) {}
  void zero();
  double squared_norm() const;
  void add_scaled(const EnergyGrad& o, double s);
};

/// E(x) >= 0. Fills tape when non-null. Throws ValidationError on non-finite
/// input or images smaller than 8x8.
double energy(const EnergyNet& net, const ComplexGrid& x, EnergyTape* tape = nullptr);

/// Input gradient of energy() in the 2-real-channel pairing, reassembled as a
/// complex grid (d/dRe + i d/dIm).
ComplexGrid score(const EnergyNet& net, const ComplexGrid& x);

/// Accumulates sign * dEnergy/dParams at the tape's forward point.
void param_grad(const EnergyNet& net, const EnergyTape& tape, double sign, EnergyGrad& accum);

/// Image-to-image 5-layer conv net (2->64, 64->64 x3, 64->2; ReLU after
/// layers 1-4). With residual = true the net computes x + f(x), the denoiser
/// convention; zero parameters then give the identity map.
struct ImageNet {
  ConvStack stack;
  bool residual = false;

  ImageNet() = default;
  explicit ImageNet(bool residual_skip);

  static ImageNet random_init(RngStream& rng, bool residual_skip);
};

ComplexGrid apply_net(const ImageNet& net, const ComplexGrid& x, StackTape* tape = nullptr);

/// Denoising-form energy E(x) = 0.5 ||x - psi(x)||^2. Its exact input
/// gradient is (I - J_psi(x))^T (x - psi(x)).
double muse_energy(const ImageNet& psi, const ComplexGrid& x);
ComplexGrid muse_score(const ImageNet& psi, const ComplexGrid& x);
/// dE/dParams at fixed x, accumulated scaled into grad (stack layout).
void muse_param_grad(const ImageNet& psi, const ComplexGrid& x, double scale,
                     std::vector<double>& grad);

class MuseEnergy : public EnergyModel {
 public:
  explicit MuseEnergy(ImageNet psi) : psi_(std::move(psi)) {}
  double energy(const ComplexGrid& x) const override { return muse_energy(psi_, x); }
  ComplexGrid score(const ComplexGrid& x) const override { return muse_score(psi_, x); }
  const ImageNet& net() const { return psi_; }

 private:
  ImageNet psi_;
};

/// EnergyModel adapter over EnergyNet.
class DeepenEnergy : public EnergyModel {
 public:
  explicit DeepenEnergy(EnergyNet net) : net_(std::move(net)) {}
  double energy(const ComplexGrid& x) const override { return deepen::energy(net_, x); }
  ComplexGrid score(const ComplexGrid& x) const override { return deepen::score(net_, x); }
  const EnergyNet& net() const { return net_; }
  EnergyNet& net() { return net_; }

 private:
  EnergyNet net_;
};

/// E identically zero; used wherever the prior is switched off.
class ZeroEnergy : public EnergyModel {
 public:
  double energy(const ComplexGrid&) const override { return 0.0; }
  ComplexGrid score(const ComplexGrid& x) const override {
    return ComplexGrid(x.height, x.width);
  }
};

/// Non-owning adapters for nets that live elsewhere (training loops).
class EnergyNetView : public EnergyModel {
 public:
  explicit EnergyNetView(const EnergyNet& net) : net_(&net) {}
  double energy(const ComplexGrid& x) const override { return deepen::energy(*net_, x); }
  ComplexGrid score(const ComplexGrid& x) const override { return deepen::score(*net_, x); }

 private:
  const EnergyNet* net_;
};

class MuseEnergyView : public EnergyModel {
 public:
  explicit MuseEnergyView(const ImageNet& psi) : psi_(&psi) {}
  double energy(const ComplexGrid& x) const override { return muse_energy(*psi_, x); }
  ComplexGrid score(const ComplexGrid& x) const override { return muse_score(*psi_, x); }

 private:
  const ImageNet* psi_;
};

}  // namespace deepen
