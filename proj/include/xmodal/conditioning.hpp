// SPDX-License-Identifier: Apache-2.0
//
// Injection of the normalized plasma Abeta42/40 scalar into a generator:
// added to the input image, added to the bottleneck features, or appended
// to the bottleneck as one extra channel and fused back by a 1x1x1 conv.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "xmodal/autograd.hpp"

namespace xmodal {

enum class ConditioningMode { none, image_add, latent_add, latent_concat };

std::string_view to_string(ConditioningMode mode);
/// Accepts "none|image_add|latent_add|latent_concat"; throws UsageError otherwise.
ConditioningMode parse_conditioning_mode(std::string_view text);

struct ConditioningPayload {
  ConditioningMode mode = ConditioningMode::none;
  double abeta_norm = 0.0;
};

/// Shapes seen at the bottleneck during one forward pass.
struct BottleneckTrace {
  Shape bottleneck;    // encoder output
  Shape concatenated;  // latent_concat only: after appending the condition channel
  Shape conditioned;   // what the residual blocks receive
};

/// Learned 1x1x1 projection from C+1 channels back to C.
template <class T>
struct FusionConv {
  ag::Var<T> weight;  // (C, C+1, 1, 1, 1)
  ag::Var<T> bias;    // (C)
};

/// x + abeta broadcast over the whole input. abeta has shape (N).
template <class T>
ag::Var<T> condition_image_add(const ag::Var<T>& x, const ag::Var<T>& abeta_norm);

/// f + abeta broadcast over every channel and voxel; f must have
/// `expected_channels` channels.
template <class T>
ag::Var<T> condition_latent_add(const ag::Var<T>& f, const ag::Var<T>& abeta_norm,
                                std::int64_t expected_channels);

/// concat(f, broadcast(abeta)) along channels, then the fusion conv.
template <class T>
ag::Var<T> condition_latent_concat(const ag::Var<T>& f, const ag::Var<T>& abeta_norm,
                                   const FusionConv<T>& fusion,
                                   BottleneckTrace* trace = nullptr);

}  // namespace xmodal
