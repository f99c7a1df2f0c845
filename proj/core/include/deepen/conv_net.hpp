#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "deepen/complex_grid.hpp"
#include "deepen/rng.hpp"

namespace deepen {

/// Dense channel-major tensor [ch][h][w].
struct Tensor {
  int ch = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : ch(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  double* plane(int c) { return v.data() + c * plane_size(); }
  const double* plane(int c) const { return v.data() + c * plane_size(); }
};

/// One 3x3 zero-padded stride-1 convolution layer.
struct ConvLayerSpec {
  int in_ch = 0;
  int out_ch = 0;
  bool relu = false;  // ReLU applied after the convolution
};

/// A stack of 3x3 conv layers with all parameters in one flat vector,
/// layout [W0 | b0 | W1 | b1 | ...], weights indexed [out][in][ky][kx].
struct ConvStack {
  std::vector<ConvLayerSpec> specs;
  std::vector<double> params;
  std::vector<std::size_t> w_off, b_off;

  ConvStack() = default;
  explicit ConvStack(std::vector<ConvLayerSpec> layer_specs);

  int num_layers() const { return static_cast<int>(specs.size()); }
  std::size_t param_count() const { return params.size(); }
  std::size_t weight_count(int l) const {
    return static_cast<std::size_t>(specs[l].out_ch) * specs[l].in_ch * 9;
  }
  const double* weights(int l) const { return params.data() + w_off[l]; }
  double* weights(int l) { return params.data() + w_off[l]; }
  const double* biases(int l) const { return params.data() + b_off[l]; }
  double* biases(int l) { return params.data() + b_off[l]; }

  /// He-scaled Gaussian weights, zero biases.
  void init_he(RngStream& rng);
};

/// Cached activations from one forward pass; enough to replay any backward.
struct StackTape {
  int in_ch = 0, h = 0, w = 0;
  std::vector<Tensor> inputs;  // input fed to each layer
  std::vector<Tensor> pre;     // pre-activation output of each layer
};

/// Forward pass. If tape is non-null it is filled for later backward passes.
Tensor stack_forward(const ConvStack& net, const Tensor& in, StackTape* tape);

/// Reverse pass from an output cotangent. Accumulates scale * dParams into
/// param_grad when non-null (flat, same layout as net.params) and returns the
/// input cotangent when want_input_grad (empty tensor otherwise).
Tensor stack_backward(const ConvStack& net, const StackTape& tape, Tensor dout,
                      std::vector<double>* param_grad, double scale, bool want_input_grad);

/// Two-channel (real/imag) tensor view of a complex grid and back.
Tensor grid_to_tensor(const ComplexGrid& g);
ComplexGrid tensor_to_grid(const Tensor& t);

}  // namespace deepen
