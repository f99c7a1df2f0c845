#include "deepen/conv_net.hpp"

#include <cmath>
#include <cstring>

#include "deepen/errors.hpp"

namespace deepen {

ConvStack::ConvStack(std::vector<ConvLayerSpec> layer_specs) : specs(std::move(layer_specs)) {
  std::size_t off = 0;
  for (const auto& s : specs) {
    w_off.push_back(off);
    off += static_cast<std::size_t>(s.out_ch) * s.in_ch * 9;
    b_off.push_back(off);
    off += static_cast<std::size_t>(s.out_ch);
  }
  params.assign(off, 0.0);
}

void ConvStack::init_he(RngStream& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double std = std::sqrt(2.0 / (static_cast<double>(specs[l].in_ch) * 9));
    double* w = weights(l);
    const std::size_t n = weight_count(l);
    for (std::size_t i = 0; i < n; ++i) w[i] = std * rng.normal_pair().first;
    // biases stay zero
  }
}

namespace {

// ---- fast 3x3 kernel -------------------------------------------------------
//
// Inputs are padded per channel to (H+2)x(W+2) so every shifted row access is
// contiguous and in-bounds. The row-accumulator form below keeps one output
// row for four output channels live across the whole (c, ky, kx) reduction,
// which is what lets the compiler vectorize the x loop and keep FMA units fed.

template <int W>
void conv3x3_rows(const double* in, const double* w, const double* bias, double* out, int C,
                  int K, int H) {
  const int Wp = W + 2;
  const std::size_t plane = static_cast<std::size_t>(H + 2) * Wp;
  const std::size_t oplane = static_cast<std::size_t>(H) * W;
  int k0 = 0;
  for (; k0 + 4 <= K; k0 += 4) {
    for (int y = 0; y < H; ++y) {
      double acc0[W], acc1[W], acc2[W], acc3[W];
      const double b0 = bias ? bias[k0 + 0] : 0.0, b1 = bias ? bias[k0 + 1] : 0.0;
      const double b2 = bias ? bias[k0 + 2] : 0.0, b3 = bias ? bias[k0 + 3] : 0.0;
      for (int x = 0; x < W; ++x) { acc0[x] = b0; acc1[x] = b1; acc2[x] = b2; acc3[x] = b3; }
      for (int c = 0; c < C; ++c) {
        const double* ip = in + c * plane;
        const double* wbase = w + (static_cast<std::size_t>(k0) * C + c) * 9;
        const std::size_t wstride = static_cast<std::size_t>(C) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const double* irow = ip + (y + ky) * Wp;
          for (int kx = 0; kx < 3; ++kx) {
            const double w0 = wbase[0 * wstride + ky * 3 + kx];
            const double w1 = wbase[1 * wstride + ky * 3 + kx];
            const double w2 = wbase[2 * wstride + ky * 3 + kx];
            const double w3 = wbase[3 * wstride + ky * 3 + kx];
            const double* ir = irow + kx;
            for (int x = 0; x < W; ++x) {
              const double v = ir[x];
              acc0[x] += w0 * v;
              acc1[x] += w1 * v;
              acc2[x] += w2 * v;
              acc3[x] += w3 * v;
            }
          }
        }
      }
      std::memcpy(out + (k0 + 0) * oplane + static_cast<std::size_t>(y) * W, acc0, sizeof(acc0));
      std::memcpy(out + (k0 + 1) * oplane + static_cast<std::size_t>(y) * W, acc1, sizeof(acc1));
      std::memcpy(out + (k0 + 2) * oplane + static_cast<std::size_t>(y) * W, acc2, sizeof(acc2));
      std::memcpy(out + (k0 + 3) * oplane + static_cast<std::size_t>(y) * W, acc3, sizeof(acc3));
    }
  }
  for (; k0 < K; ++k0) {  // channel tail
    for (int y = 0; y < H; ++y) {
      double acc[W];
      const double b = bias ? bias[k0] : 0.0;
      for (int x = 0; x < W; ++x) acc[x] = b;
      for (int c = 0; c < C; ++c) {
        const double* ip = in + c * plane;
        const double* wp = w + (static_cast<std::size_t>(k0) * C + c) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const double* irow = ip + (y + ky) * Wp;
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = wp[ky * 3 + kx];
            const double* ir = irow + kx;
            for (int x = 0; x < W; ++x) acc[x] += wv * ir[x];
          }
        }
      }
      std::memcpy(out + k0 * oplane + static_cast<std::size_t>(y) * W, acc, sizeof(acc));
    }
  }
}

void conv3x3_generic(const double* in, const double* w, const double* bias, double* out, int C,
                     int K, int H, int W) {
  const int Wp = W + 2;
  const std::size_t plane = static_cast<std::size_t>(H + 2) * Wp;
  const std::size_t oplane = static_cast<std::size_t>(H) * W;
  for (int k = 0; k < K; ++k) {
    double* op = out + k * oplane;
    const double b = bias ? bias[k] : 0.0;
    for (std::size_t i = 0; i < oplane; ++i) op[i] = b;
    for (int c = 0; c < C; ++c) {
      const double* ip = in + c * plane;
      const double* wp = w + (static_cast<std::size_t>(k) * C + c) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = wp[ky * 3 + kx];
          for (int y = 0; y < H; ++y) {
            const double* irow = ip + (y + ky) * Wp + kx;
            double* orow = op + static_cast<std::size_t>(y) * W;
            for (int x = 0; x < W; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

// out[K][H][W] = conv(in_padded[C][H+2][W+2], w[K][C][3][3]) + bias
void conv3x3(const double* in, const double* w, const double* bias, double* out, int C, int K,
             int H, int W) {
  switch (W) {
    case 8: conv3x3_rows<8>(in, w, bias, out, C, K, H); break;
    case 16: conv3x3_rows<16>(in, w, bias, out, C, K, H); break;
    case 32: conv3x3_rows<32>(in, w, bias, out, C, K, H); break;
    case 64: conv3x3_rows<64>(in, w, bias, out, C, K, H); break;
    case 128: conv3x3_rows<128>(in, w, bias, out, C, K, H); break;
    default: conv3x3_generic(in, w, bias, out, C, K, H, W); break;
  }
}

void pad_tensor(const Tensor& t, std::vector<double>& padded) {
  const int Hp = t.h + 2, Wp = t.w + 2;
  padded.assign(static_cast<std::size_t>(t.ch) * Hp * Wp, 0.0);
  for (int c = 0; c < t.ch; ++c) {
    const double* src = t.plane(c);
    double* dst = padded.data() + static_cast<std::size_t>(c) * Hp * Wp;
    for (int y = 0; y < t.h; ++y) {
      std::memcpy(dst + static_cast<std::size_t>(y + 1) * Wp + 1,
                  src + static_cast<std::size_t>(y) * t.w, sizeof(double) * t.w);
    }
  }
}

// wt[c][k][ky][kx] = w[k][c][2-ky][2-kx]; turns the adjoint of a conv into a conv.
void transpose_flip_weights(const double* w, int K, int C, std::vector<double>& wt) {
  wt.resize(static_cast<std::size_t>(K) * C * 9);
  for (int k = 0; k < K; ++k) {
    for (int c = 0; c < C; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          wt[((static_cast<std::size_t>(c) * K + k) * 3 + ky) * 3 + kx] =
              w[((static_cast<std::size_t>(k) * C + c) * 3 + (2 - ky)) * 3 + (2 - kx)];
        }
      }
    }
  }
}

// dW[k][c][ky][kx] += scale * sum_{y,x} delta[k][y][x] * in_padded[c][y+ky][x+kx]
void conv3x3_param_grad(const double* in_padded, const Tensor& delta, int C, double scale,
                        double* dw, double* db) {
  const int H = delta.h, W = delta.w, Wp = W + 2;
  const std::size_t plane = static_cast<std::size_t>(H + 2) * Wp;
  for (int k = 0; k < delta.ch; ++k) {
    const double* dp = delta.plane(k);
    double bsum = 0.0;
    for (std::size_t i = 0; i < delta.plane_size(); ++i) bsum += dp[i];
    db[k] += scale * bsum;
    for (int c = 0; c < C; ++c) {
      const double* ip = in_padded + c * plane;
      double acc[9] = {0};
      for (int y = 0; y < H; ++y) {
        const double* drow = dp + static_cast<std::size_t>(y) * W;
        for (int ky = 0; ky < 3; ++ky) {
          const double* irow = ip + (y + ky) * Wp;
          double s0 = 0.0, s1 = 0.0, s2 = 0.0;
          for (int x = 0; x < W; ++x) {
            const double d = drow[x];
            s0 += d * irow[x];
            s1 += d * irow[x + 1];
            s2 += d * irow[x + 2];
          }
          acc[ky * 3 + 0] += s0;
          acc[ky * 3 + 1] += s1;
          acc[ky * 3 + 2] += s2;
        }
      }
      double* wp = dw + (static_cast<std::size_t>(k) * C + c) * 9;
      for (int i = 0; i < 9; ++i) wp[i] += scale * acc[i];
    }
  }
}

thread_local std::vector<double> g_pad_scratch;
thread_local std::vector<double> g_wt_scratch;

}  // namespace

Tensor stack_forward(const ConvStack& net, const Tensor& in, StackTape* tape) {
  if (net.num_layers() == 0) throw ValidationError("stack_forward: empty stack");
  if (in.ch != net.specs[0].in_ch) {
    throw ValidationError("stack_forward: input has " + std::to_string(in.ch) +
                          " channels, stack expects " + std::to_string(net.specs[0].in_ch));
  }
  if (tape) {
    tape->in_ch = in.ch;
    tape->h = in.h;
    tape->w = in.w;
    tape->inputs.assign(net.num_layers(), Tensor());
    tape->pre.assign(net.num_layers(), Tensor());
  }

  Tensor cur = in;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& s = net.specs[l];
    if (tape) tape->inputs[l] = cur;
    pad_tensor(cur, g_pad_scratch);
    Tensor next(s.out_ch, cur.h, cur.w);
    conv3x3(g_pad_scratch.data(), net.weights(l), net.biases(l), next.v.data(), s.in_ch, s.out_ch,
            cur.h, cur.w);
    if (tape) tape->pre[l] = next;
    if (s.relu) {
      for (auto& v : next.v) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(next);
  }
  return cur;
}

Tensor stack_backward(const ConvStack& net, const StackTape& tape, Tensor dout,
                      std::vector<double>* param_grad, double scale, bool want_input_grad) {
  if (tape.inputs.size() != static_cast<std::size_t>(net.num_layers())) {
    throw ValidationError("stack_backward: tape does not match stack");
  }
  if (param_grad && param_grad->size() != net.param_count()) {
    throw ValidationError("stack_backward: gradient buffer has wrong size");
  }
  Tensor delta = std::move(dout);
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const auto& s = net.specs[l];
    if (delta.ch != s.out_ch || delta.h != tape.h || delta.w != tape.w) {
      throw ValidationError("stack_backward: cotangent shape mismatch at layer " +
                            std::to_string(l));
    }
    if (s.relu) {
      const auto& pre = tape.pre[l];
      for (std::size_t i = 0; i < delta.v.size(); ++i) {
        if (!(pre.v[i] > 0.0)) delta.v[i] = 0.0;  // subgradient 0 at the kink
      }
    }
    if (param_grad) {
      pad_tensor(tape.inputs[l], g_pad_scratch);
      conv3x3_param_grad(g_pad_scratch.data(), delta, s.in_ch, scale,
                         param_grad->data() + net.w_off[l], param_grad->data() + net.b_off[l]);
    }
    if (l > 0 || want_input_grad) {
      transpose_flip_weights(net.weights(l), s.out_ch, s.in_ch, g_wt_scratch);
      pad_tensor(delta, g_pad_scratch);
      Tensor dprev(s.in_ch, tape.h, tape.w);
      conv3x3(g_pad_scratch.data(), g_wt_scratch.data(), nullptr, dprev.v.data(), s.out_ch,
              s.in_ch, tape.h, tape.w);
      delta = std::move(dprev);
    }
  }
  return want_input_grad ? std::move(delta) : Tensor();
}

Tensor grid_to_tensor(const ComplexGrid& g) {
  Tensor t(2, g.height, g.width);
  double* re = t.plane(0);
  double* im = t.plane(1);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    re[i] = g.values[i].real();
    im[i] = g.values[i].imag();
  }
  return t;
}

ComplexGrid tensor_to_grid(const Tensor& t) {
  if (t.ch != 2) throw ValidationError("tensor_to_grid: need exactly 2 channels");
  ComplexGrid g(t.h, t.w);
  const double* re = t.plane(0);
  const double* im = t.plane(1);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = cplx(re[i], im[i]);
  return g;
}

}  // namespace deepen
