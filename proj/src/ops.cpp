// SPDX-License-Identifier: Apache-2.0

#include "xmodal/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "xmodal/simd/kernels.hpp"

namespace xmodal::ag {

std::int64_t conv_out_extent(std::int64_t in, const ConvGeometry& g) {
  const std::int64_t span = in + 2 * g.padding - g.kernel;
  if (span < 0) return 0;
  return span / g.stride + 1;
}

std::int64_t conv_transpose_out_extent(std::int64_t in, const ConvGeometry& g) {
  return (in - 1) * g.stride - 2 * g.padding + g.kernel;
}

namespace {

struct Grid {
  std::int64_t d, h, w;
  std::int64_t voxels() const { return d * h * w; }
};

Grid spatial(const Shape& s) { return {s[2], s[3], s[4]}; }

// Rows of col are (c, kd, kh, kw); columns are output voxels.
template <class T>
void im2col(const T* x, std::int64_t channels, Grid in, const ConvGeometry& g,
            Grid out, T* col) {
  const int k = g.kernel;
  const std::int64_t out_vox = out.voxels();
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* xc = x + c * in.voxels();
    for (int kd = 0; kd < k; ++kd)
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
          T* row = col + (((c * k + kd) * k + kh) * k + kw) * out_vox;
          for (std::int64_t od = 0; od < out.d; ++od) {
            const std::int64_t id = od * g.stride - g.padding + kd;
            T* rd = row + od * out.h * out.w;
            if (id < 0 || id >= in.d) {
              std::fill(rd, rd + out.h * out.w, T(0));
              continue;
            }
            for (std::int64_t oh = 0; oh < out.h; ++oh) {
              const std::int64_t ih = oh * g.stride - g.padding + kh;
              T* rh = rd + oh * out.w;
              if (ih < 0 || ih >= in.h) {
                std::fill(rh, rh + out.w, T(0));
                continue;
              }
              const T* src = xc + (id * in.h + ih) * in.w;
              for (std::int64_t ow = 0; ow < out.w; ++ow) {
                const std::int64_t iw = ow * g.stride - g.padding + kw;
                rh[ow] = (iw >= 0 && iw < in.w) ? src[iw] : T(0);
              }
            }
          }
        }
  }
}

template <class T>
void col2im_add(const T* col, std::int64_t channels, Grid in,
                const ConvGeometry& g, Grid out, T* x) {
  const int k = g.kernel;
  const std::int64_t out_vox = out.voxels();
  for (std::int64_t c = 0; c < channels; ++c) {
    T* xc = x + c * in.voxels();
    for (int kd = 0; kd < k; ++kd)
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
          const T* row = col + (((c * k + kd) * k + kh) * k + kw) * out_vox;
          for (std::int64_t od = 0; od < out.d; ++od) {
            const std::int64_t id = od * g.stride - g.padding + kd;
            if (id < 0 || id >= in.d) continue;
            for (std::int64_t oh = 0; oh < out.h; ++oh) {
              const std::int64_t ih = oh * g.stride - g.padding + kh;
              if (ih < 0 || ih >= in.h) continue;
              T* dst = xc + (id * in.h + ih) * in.w;
              const T* src = row + (od * out.h + oh) * out.w;
              for (std::int64_t ow = 0; ow < out.w; ++ow) {
                const std::int64_t iw = ow * g.stride - g.padding + kw;
                if (iw >= 0 && iw < in.w) dst[iw] += src[ow];
              }
            }
          }
        }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.padding == 0;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

template <class T>
void add_bias(T* out, const T* bias, std::int64_t channels, std::int64_t voxels) {
  for (std::int64_t c = 0; c < channels; ++c) {
    const T b = bias[c];
    T* o = out + c * voxels;
    for (std::int64_t i = 0; i < voxels; ++i) o[i] += b;
  }
}

template <class T>
void accumulate_bias_grad(const T* grad_out, std::int64_t channels,
                          std::int64_t voxels, T* grad_bias) {
  const auto& kern = simd::kernels<T>();
  for (std::int64_t c = 0; c < channels; ++c)
    grad_bias[c] += static_cast<T>(kern.sum(voxels, grad_out + c * voxels));
}

template <class T>
Var<T> elementwise(const Var<T>& x, T (*f)(T), T (*df_from_out)(T, T)) {
  Tensor<T> out(x.shape());
  const auto& in = x.value();
  for (std::int64_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(std::move(out), {x}, [df_from_out](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * df_from_out(src.value[i], self.value[i]);
  });
}

}  // namespace

template <class T>
Var<T> conv3d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const ConvGeometry& g) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require(xs.size() == 5 && ws.size() == 5, "conv3d expects 5-D input and weight");
  require(ws[1] == xs[1], "conv3d channel mismatch");
  require(ws[2] == g.kernel && ws[3] == g.kernel && ws[4] == g.kernel,
          "conv3d kernel size mismatch");
  const std::int64_t n = xs[0], ci = xs[1], co = ws[0];
  const Grid in = spatial(xs);
  const Grid out{conv_out_extent(in.d, g), conv_out_extent(in.h, g), conv_out_extent(in.w, g)};
  require(out.d > 0 && out.h > 0 && out.w > 0, "conv3d input smaller than kernel");
  const std::int64_t kdim = ci * g.kernel * g.kernel * g.kernel;
  const std::int64_t ov = out.voxels();
  const auto& kern = simd::kernels<T>();

  Tensor<T> y({n, co, out.d, out.h, out.w});
  std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(kdim * ov));
  for (std::int64_t s = 0; s < n; ++s) {
    const T* xn = x.value().data() + s * ci * in.voxels();
    const T* cols = xn;
    if (!is_pointwise(g)) {
      im2col(xn, ci, in, g, out, col.data());
      cols = col.data();
    }
    T* yn = y.data() + s * co * ov;
    kern.gemm(false, false, co, ov, kdim, T(1), weight.value().data(), kdim, cols, ov,
              T(0), yn, ov);
    if (bias.defined()) add_bias(yn, bias.value().data(), co, ov);
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(y), inputs, [=](Node<T>& self) {
    auto& xn_node = *self.inputs[0];
    auto& wn = *self.inputs[1];
    Node<T>* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const auto& k2 = simd::kernels<T>();
    std::vector<T> colb(static_cast<std::size_t>(kdim * ov));
    for (std::int64_t s = 0; s < n; ++s) {
      const T* go = self.grad.data() + s * co * ov;
      if (wn.requires_grad) {
        const T* xs_ptr = xn_node.value.data() + s * ci * in.voxels();
        const T* cols = xs_ptr;
        if (!is_pointwise(g)) {
          im2col(xs_ptr, ci, in, g, out, colb.data());
          cols = colb.data();
        }
        k2.gemm(false, true, co, kdim, ov, T(1), go, ov, cols, ov, T(1),
                wn.grad_buffer().data(), kdim);
      }
      if (bn && bn->requires_grad) accumulate_bias_grad(go, co, ov, bn->grad_buffer().data());
      if (xn_node.requires_grad) {
        T* gx = xn_node.grad_buffer().data() + s * ci * in.voxels();
        if (is_pointwise(g)) {
          k2.gemm(true, false, kdim, ov, co, T(1), wn.value.data(), kdim, go, ov, T(1), gx, ov);
        } else {
          k2.gemm(true, false, kdim, ov, co, T(1), wn.value.data(), kdim, go, ov, T(0),
                  colb.data(), ov);
          col2im_add(colb.data(), ci, in, g, out, gx);
        }
      }
    }
  });
}

template <class T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& weight,
                        const Var<T>& bias, const ConvGeometry& g) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require(xs.size() == 5 && ws.size() == 5, "conv_transpose3d expects 5-D input and weight");
  require(ws[0] == xs[1], "conv_transpose3d channel mismatch");
  require(ws[2] == g.kernel && ws[3] == g.kernel && ws[4] == g.kernel,
          "conv_transpose3d kernel size mismatch");
  const std::int64_t n = xs[0], ci = xs[1], co = ws[1];
  const Grid in = spatial(xs);
  const Grid out{conv_transpose_out_extent(in.d, g), conv_transpose_out_extent(in.h, g),
                 conv_transpose_out_extent(in.w, g)};
  require(out.d > 0 && out.h > 0 && out.w > 0, "conv_transpose3d produces empty output");
  // Geometrically this is the adjoint of a conv3d from `out` to `in`.
  require(conv_out_extent(out.d, g) == in.d && conv_out_extent(out.h, g) == in.h &&
              conv_out_extent(out.w, g) == in.w,
          "conv_transpose3d geometry is not invertible for this input");
  const std::int64_t rows = co * g.kernel * g.kernel * g.kernel;
  const std::int64_t iv = in.voxels();
  const std::int64_t ov = out.voxels();
  const auto& kern = simd::kernels<T>();

  Tensor<T> y({n, co, out.d, out.h, out.w});
  std::vector<T> col(static_cast<std::size_t>(rows * iv));
  for (std::int64_t s = 0; s < n; ++s) {
    const T* xn = x.value().data() + s * ci * iv;
    kern.gemm(true, false, rows, iv, ci, T(1), weight.value().data(), rows, xn, iv, T(0),
              col.data(), iv);
    T* yn = y.data() + s * co * ov;
    col2im_add(col.data(), co, out, g, in, yn);
    if (bias.defined()) add_bias(yn, bias.value().data(), co, ov);
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(y), inputs, [=](Node<T>& self) {
    auto& xn_node = *self.inputs[0];
    auto& wn = *self.inputs[1];
    Node<T>* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const auto& k2 = simd::kernels<T>();
    std::vector<T> colb(static_cast<std::size_t>(rows * iv));
    for (std::int64_t s = 0; s < n; ++s) {
      const T* go = self.grad.data() + s * co * ov;
      im2col(go, co, out, g, in, colb.data());
      if (wn.requires_grad) {
        const T* xs_ptr = xn_node.value.data() + s * ci * iv;
        k2.gemm(false, true, ci, rows, iv, T(1), xs_ptr, iv, colb.data(), iv, T(1),
                wn.grad_buffer().data(), rows);
      }
      if (bn && bn->requires_grad) accumulate_bias_grad(go, co, ov, bn->grad_buffer().data());
      if (xn_node.requires_grad) {
        T* gx = xn_node.grad_buffer().data() + s * ci * iv;
        k2.gemm(false, false, ci, iv, rows, T(1), wn.value.data(), rows, colb.data(), iv, T(1),
                gx, iv);
      }
    }
  });
}

template <class T>
Var<T> instance_norm(const Var<T>& x, T eps) {
  const Shape& xs = x.shape();
  require(xs.size() == 5, "instance_norm expects 5-D input");
  const std::int64_t planes = xs[0] * xs[1];
  const std::int64_t vox = xs[2] * xs[3] * xs[4];
  const auto& kern = simd::kernels<T>();
  Tensor<T> y(xs);
  std::vector<T> inv_std(static_cast<std::size_t>(planes));
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* xp = x.value().data() + p * vox;
    T* yp = y.data() + p * vox;
    const double mu = kern.sum(vox, xp) / static_cast<double>(vox);
    double var = 0.0;
    for (std::int64_t i = 0; i < vox; ++i) {
      const double d = static_cast<double>(xp[i]) - mu;
      var += d * d;
    }
    var /= static_cast<double>(vox);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std[static_cast<std::size_t>(p)] = static_cast<T>(is);
    for (std::int64_t i = 0; i < vox; ++i)
      yp[i] = static_cast<T>((static_cast<double>(xp[i]) - mu) * is);
  }
  return make_result<T>(std::move(y), {x}, [=](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    const auto& k2 = simd::kernels<T>();
    auto& gx = src.grad_buffer();
    for (std::int64_t p = 0; p < planes; ++p) {
      const T* gy = self.grad.data() + p * vox;
      const T* xhat = self.value.data() + p * vox;
      const double mean_gy = k2.sum(vox, gy) / static_cast<double>(vox);
      const double mean_gy_xhat = k2.dot(vox, gy, xhat) / static_cast<double>(vox);
      const double is = inv_std[static_cast<std::size_t>(p)];
      T* g = gx.data() + p * vox;
      for (std::int64_t i = 0; i < vox; ++i)
        g[i] += static_cast<T>(is * (static_cast<double>(gy[i]) - mean_gy -
                                     static_cast<double>(xhat[i]) * mean_gy_xhat));
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return elementwise<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T in, T) { return in > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const auto& in = x.value();
  for (std::int64_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : slope * in[i];
  return make_result<T>(std::move(out), {x}, [slope](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < gx.size(); ++i)
      gx[i] += src.value[i] > T(0) ? self.grad[i] : slope * self.grad[i];
  });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return elementwise<T>(
      x, [](T v) { return std::tanh(v); }, [](T, T out) { return T(1) - out * out; });
}

template <class T>
Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng) {
  require(p >= T(0) && p < T(1), "dropout probability must be in [0,1)");
  if (p == T(0)) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T scale_kept = T(1) / (T(1) - p);
  std::vector<T> mask(static_cast<std::size_t>(x.value().size()));
  for (auto& m : mask) m = keep(rng) ? scale_kept : T(0);
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * mask[static_cast<std::size_t>(i)];
  return make_result<T>(std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * mask[static_cast<std::size_t>(i)];
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(), "add shape mismatch");
  Tensor<T> out = a.value();
  simd::kernels<T>().axpy(out.size(), T(1), b.value().data(), out.data());
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& k = simd::kernels<T>();
    for (auto& in : self.inputs)
      if (in->requires_grad) k.axpy(self.grad.size(), T(1), self.grad.data(), in->grad_buffer().data());
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(), "sub shape mismatch");
  Tensor<T> out = a.value();
  simd::kernels<T>().axpy(out.size(), T(-1), b.value().data(), out.data());
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& k = simd::kernels<T>();
    if (self.inputs[0]->requires_grad)
      k.axpy(self.grad.size(), T(1), self.grad.data(), self.inputs[0]->grad_buffer().data());
    if (self.inputs[1]->requires_grad)
      k.axpy(self.grad.size(), T(-1), self.grad.data(), self.inputs[1]->grad_buffer().data());
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a.shape());
  simd::kernels<T>().axpy(out.size(), factor, a.value().data(), out.data());
  return make_result<T>(std::move(out), {a}, [factor](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (src.requires_grad)
      simd::kernels<T>().axpy(self.grad.size(), factor, self.grad.data(), src.grad_buffer().data());
  });
}

template <class T>
Var<T> add_per_sample(const Var<T>& x, const Var<T>& s) {
  require(!x.shape().empty() && s.value().size() == x.shape()[0],
          "add_per_sample needs one scalar per sample");
  const std::int64_t n = x.shape()[0];
  const std::int64_t per = n ? x.value().size() / n : 0;
  Tensor<T> out = x.value();
  for (std::int64_t b = 0; b < n; ++b) {
    const T v = s.value()[b];
    T* o = out.data() + b * per;
    for (std::int64_t i = 0; i < per; ++i) o[i] += v;
  }
  return make_result<T>(std::move(out), {x, s}, [n, per](Node<T>& self) {
    const auto& k = simd::kernels<T>();
    if (self.inputs[0]->requires_grad)
      k.axpy(self.grad.size(), T(1), self.grad.data(), self.inputs[0]->grad_buffer().data());
    if (self.inputs[1]->requires_grad) {
      auto& gs = self.inputs[1]->grad_buffer();
      for (std::int64_t b = 0; b < n; ++b)
        gs[b] += static_cast<T>(k.sum(per, self.grad.data() + b * per));
    }
  });
}

template <class T>
Var<T> broadcast_channel(const Var<T>& s, std::int64_t d, std::int64_t h, std::int64_t w) {
  require(s.shape().size() == 1, "broadcast_channel expects a (N) vector");
  require(d >= 1 && h >= 1 && w >= 1, "broadcast_channel extents must be positive");
  for (std::int64_t i = 0; i < s.value().size(); ++i)
    require(std::isfinite(static_cast<double>(s.value()[i])), "broadcast of non-finite scalar");
  const std::int64_t n = s.shape()[0];
  const std::int64_t per = d * h * w;
  Tensor<T> out({n, 1, d, h, w});
  for (std::int64_t b = 0; b < n; ++b)
    std::fill(out.data() + b * per, out.data() + (b + 1) * per, s.value()[b]);
  return make_result<T>(std::move(out), {s}, [n, per](Node<T>& self) {
    auto& gs = self.inputs[0]->grad_buffer();
    const auto& k = simd::kernels<T>();
    for (std::int64_t b = 0; b < n; ++b)
      gs[b] += static_cast<T>(k.sum(per, self.grad.data() + b * per));
  });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require(as.size() >= 2 && as.size() == bs.size() && as[0] == bs[0],
          "concat_channels rank/batch mismatch");
  for (std::size_t i = 2; i < as.size(); ++i) require(as[i] == bs[i], "concat_channels extent mismatch");
  const std::int64_t n = as[0];
  const std::int64_t pa = a.value().size() / n;
  const std::int64_t pb = b.value().size() / n;
  Shape os = as;
  os[1] = as[1] + bs[1];
  Tensor<T> out(os);
  for (std::int64_t s = 0; s < n; ++s) {
    std::copy_n(a.value().data() + s * pa, pa, out.data() + s * (pa + pb));
    std::copy_n(b.value().data() + s * pb, pb, out.data() + s * (pa + pb) + pa);
  }
  return make_result<T>(std::move(out), {a, b}, [n, pa, pb](Node<T>& self) {
    const auto& k = simd::kernels<T>();
    for (std::int64_t s = 0; s < n; ++s) {
      const T* g = self.grad.data() + s * (pa + pb);
      if (self.inputs[0]->requires_grad)
        k.axpy(pa, T(1), g, self.inputs[0]->grad_buffer().data() + s * pa);
      if (self.inputs[1]->requires_grad)
        k.axpy(pb, T(1), g + pa, self.inputs[1]->grad_buffer().data() + s * pb);
    }
  });
}

template <class T>
Var<T> flatten(const Var<T>& x) {
  const std::int64_t n = x.shape().at(0);
  Tensor<T> out = x.value().reshaped({n, n ? x.value().size() / n : 0});
  return make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (src.requires_grad)
      simd::kernels<T>().axpy(self.grad.size(), T(1), self.grad.data(), src.grad_buffer().data());
  });
}

template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  require(xs.size() == 2 && ws.size() == 2 && ws[1] == xs[1], "linear shape mismatch");
  const std::int64_t n = xs[0], f = xs[1], o = ws[0];
  Tensor<T> y({n, o});
  simd::kernels<T>().gemm(false, true, n, o, f, T(1), x.value().data(), f,
                          weight.value().data(), f, T(0), y.data(), o);
  if (bias.defined())
    for (std::int64_t s = 0; s < n; ++s)
      for (std::int64_t j = 0; j < o; ++j) y[s * o + j] += bias.value()[j];
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(y), inputs, [n, f, o](Node<T>& self) {
    const auto& k = simd::kernels<T>();
    auto& xn = *self.inputs[0];
    auto& wn = *self.inputs[1];
    if (wn.requires_grad)
      k.gemm(true, false, o, f, n, T(1), self.grad.data(), o, xn.value.data(), f, T(1),
             wn.grad_buffer().data(), f);
    if (xn.requires_grad)
      k.gemm(false, false, n, f, o, T(1), self.grad.data(), o, wn.value.data(), f, T(1),
             xn.grad_buffer().data(), f);
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      auto& gb = self.inputs[2]->grad_buffer();
      for (std::int64_t s = 0; s < n; ++s)
        for (std::int64_t j = 0; j < o; ++j) gb[j] += self.grad[s * o + j];
    }
  });
}

template <class T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  require(a.shape() == b.shape(), "mean_abs_diff shape mismatch");
  const std::int64_t count = a.value().size();
  require(count > 0, "mean_abs_diff of empty tensors");
  const double total = simd::kernels<T>().abs_diff_sum(count, a.value().data(), b.value().data());
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(count)));
  return make_result<T>(std::move(out), {a, b}, [count](Node<T>& self) {
    const T g = self.grad[0] / static_cast<T>(count);
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    for (int side = 0; side < 2; ++side) {
      auto& in = *self.inputs[side];
      if (!in.requires_grad) continue;
      auto& gi = in.grad_buffer();
      const T sign = side == 0 ? T(1) : T(-1);
      for (std::int64_t i = 0; i < count; ++i) {
        const T d = av[i] - bv[i];
        gi[i] += d > T(0) ? sign * g : (d < T(0) ? -sign * g : T(0));
      }
    }
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  const std::int64_t count = x.value().size();
  require(count > 0, "mean of empty tensor");
  Tensor<T> out({1}, static_cast<T>(simd::kernels<T>().sum(count, x.value().data()) /
                                    static_cast<double>(count)));
  return make_result<T>(std::move(out), {x}, [count](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    const T g = self.grad[0] / static_cast<T>(count);
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < count; ++i) gx[i] += g;
  });
}

namespace {
// softplus(z) = log(1 + e^z), evaluated without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

template <class T>
Var<T> bce_with_logits(const Var<T>& logits, bool target_is_real) {
  const std::int64_t count = logits.value().size();
  require(count > 0, "adversarial loss over an empty batch");
  double total = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double z = logits.value()[i];
    total += target_is_real ? softplus(-z) : softplus(z);
  }
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(count)));
  return make_result<T>(std::move(out), {logits}, [count, target_is_real](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    const double g = static_cast<double>(self.grad[0]) / static_cast<double>(count);
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < count; ++i) {
      const double s = sigmoid(static_cast<double>(src.value[i]));
      gx[i] += static_cast<T>(g * (target_is_real ? s - 1.0 : s));
    }
  });
}

template <class T>
Var<T> mean_squared_to(const Var<T>& x, T target) {
  const std::int64_t count = x.value().size();
  require(count > 0, "mean_squared_to of empty tensor");
  double total = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(x.value()[i]) - static_cast<double>(target);
    total += d * d;
  }
  Tensor<T> out({1}, static_cast<T>(total / static_cast<double>(count)));
  return make_result<T>(std::move(out), {x}, [count, target](Node<T>& self) {
    auto& src = *self.inputs[0];
    if (!src.requires_grad) return;
    const T g = T(2) * self.grad[0] / static_cast<T>(count);
    auto& gx = src.grad_buffer();
    for (std::int64_t i = 0; i < count; ++i) gx[i] += g * (src.value[i] - target);
  });
}

#define XMODAL_INSTANTIATE_OPS(T)                                                           \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&); \
  template Var<T> conv_transpose3d(const Var<T>&, const Var<T>&, const Var<T>&,             \
                                   const ConvGeometry&);                                    \
  template Var<T> instance_norm(const Var<T>&, T);                                          \
  template Var<T> relu(const Var<T>&);                                                      \
  template Var<T> leaky_relu(const Var<T>&, T);                                             \
  template Var<T> tanh(const Var<T>&);                                                      \
  template Var<T> dropout(const Var<T>&, T, std::mt19937_64&);                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale(const Var<T>&, T);                                                  \
  template Var<T> add_per_sample(const Var<T>&, const Var<T>&);                             \
  template Var<T> broadcast_channel(const Var<T>&, std::int64_t, std::int64_t, std::int64_t); \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                            \
  template Var<T> flatten(const Var<T>&);                                                   \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> mean_abs_diff(const Var<T>&, const Var<T>&);                              \
  template Var<T> mean(const Var<T>&);                                                      \
  template Var<T> bce_with_logits(const Var<T>&, bool);                                     \
  template Var<T> mean_squared_to(const Var<T>&, T);

XMODAL_INSTANTIATE_OPS(float)
XMODAL_INSTANTIATE_OPS(double)

}  // namespace xmodal::ag
