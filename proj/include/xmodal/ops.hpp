// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations. Spatial ops use (N, C, D, H, W) layout
// and cubic kernels.

#pragma once

#include <cstdint>
#include <random>

#include "xmodal/autograd.hpp"

namespace xmodal::ag {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int padding = 1;
};

/// Output extent of a strided convolution along one axis.
std::int64_t conv_out_extent(std::int64_t in, const ConvGeometry& g);
/// Output extent of the matching transposed convolution along one axis.
std::int64_t conv_transpose_out_extent(std::int64_t in, const ConvGeometry& g);

/// x (N,Ci,D,H,W), weight (Co,Ci,k,k,k), bias (Co) or undefined.
template <class T>
Var<T> conv3d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const ConvGeometry& g);

/// x (N,Ci,D,H,W), weight (Ci,Co,k,k,k), bias (Co) or undefined.
template <class T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& weight,
                        const Var<T>& bias, const ConvGeometry& g);

/// Per-sample, per-channel standardisation over the spatial extent.
template <class T>
Var<T> instance_norm(const Var<T>& x, T eps = T(1e-5));

template <class T>
Var<T> relu(const Var<T>& x);
template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope);
template <class T>
Var<T> tanh(const Var<T>& x);

/// Inverted dropout with keep-probability 1-p.
template <class T>
Var<T> dropout(const Var<T>& x, T p, std::mt19937_64& rng);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> scale(const Var<T>& a, T factor);

/// out[n, ...] = x[n, ...] + s[n]; s has shape (N).
template <class T>
Var<T> add_per_sample(const Var<T>& x, const Var<T>& s);

/// (N) -> (N, 1, D, H, W) with every voxel of sample n equal to s[n].
template <class T>
Var<T> broadcast_channel(const Var<T>& s, std::int64_t d, std::int64_t h,
                         std::int64_t w);

/// Concatenates along axis 1.
template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// (N, ...) -> (N, prod(...)).
template <class T>
Var<T> flatten(const Var<T>& x);

/// x (N,F), weight (O,F), bias (O).
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

/// mean(|a - b|) as a single-element Var.
template <class T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);

template <class T>
Var<T> mean(const Var<T>& x);

/// mean(-log sigmoid(x)) for target 1, mean(-log(1 - sigmoid(x))) for
/// target 0, via the stable softplus form.
template <class T>
Var<T> bce_with_logits(const Var<T>& logits, bool target_is_real);

/// mean((x - target)^2)
template <class T>
Var<T> mean_squared_to(const Var<T>& x, T target);

template <class T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <class T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <class T>
Var<T> operator*(T factor, const Var<T>& a) { return scale(a, factor); }

}  // namespace xmodal::ag
