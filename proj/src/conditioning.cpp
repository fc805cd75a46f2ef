// SPDX-License-Identifier: Apache-2.0

#include "xmodal/conditioning.hpp"

#include "xmodal/error.hpp"
#include "xmodal/ops.hpp"

namespace xmodal {

std::string_view to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::none:
      return "none";
    case ConditioningMode::image_add:
      return "image_add";
    case ConditioningMode::latent_add:
      return "latent_add";
    case ConditioningMode::latent_concat:
      return "latent_concat";
  }
  return "none";
}

ConditioningMode parse_conditioning_mode(std::string_view text) {
  for (auto m : {ConditioningMode::none, ConditioningMode::image_add, ConditioningMode::latent_add,
                 ConditioningMode::latent_concat})
    if (text == to_string(m)) return m;
  throw UsageError("unknown conditioning mode '" + std::string(text) +
                   "' (expected none|image_add|latent_add|latent_concat)");
}

namespace {
template <class T>
void require_payload(const ag::Var<T>& x, const ag::Var<T>& abeta) {
  if (!abeta.defined() || abeta.shape().size() != 1 || abeta.shape()[0] != x.shape().at(0))
    throw UsageError("conditioning needs one abeta value per sample");
}
}  // namespace

template <class T>
ag::Var<T> condition_image_add(const ag::Var<T>& x, const ag::Var<T>& abeta_norm) {
  require_payload(x, abeta_norm);
  return ag::add_per_sample(x, abeta_norm);
}

template <class T>
ag::Var<T> condition_latent_add(const ag::Var<T>& f, const ag::Var<T>& abeta_norm,
                                std::int64_t expected_channels) {
  if (f.shape().size() != 5 || f.shape()[1] != expected_channels)
    throw UsageError("latent_add expects a bottleneck with " + std::to_string(expected_channels) +
                     " channels, got " + to_string(f.shape()));
  require_payload(f, abeta_norm);
  return ag::add_per_sample(f, abeta_norm);
}

template <class T>
ag::Var<T> condition_latent_concat(const ag::Var<T>& f, const ag::Var<T>& abeta_norm,
                                   const FusionConv<T>& fusion, BottleneckTrace* trace) {
  const Shape& ws = fusion.weight.shape();
  if (f.shape().size() != 5 || ws.size() != 5 || f.shape()[1] + 1 != ws[1])
    throw UsageError("latent_concat expects " + std::to_string(ws.size() == 5 ? ws[1] - 1 : 0) +
                     " bottleneck channels, got " + to_string(f.shape()));
  require_payload(f, abeta_norm);
  const auto& s = f.shape();
  auto cond = ag::broadcast_channel(abeta_norm, s[2], s[3], s[4]);
  auto joined = ag::concat_channels(f, cond);
  if (trace) trace->concatenated = joined.shape();
  return ag::conv3d(joined, fusion.weight, fusion.bias, ag::ConvGeometry{1, 1, 0});
}

#define XMODAL_INSTANTIATE_CONDITIONING(T)                                                       \
  template ag::Var<T> condition_image_add(const ag::Var<T>&, const ag::Var<T>&);                 \
  template ag::Var<T> condition_latent_add(const ag::Var<T>&, const ag::Var<T>&, std::int64_t);  \
  template ag::Var<T> condition_latent_concat(const ag::Var<T>&, const ag::Var<T>&,              \
                                              const FusionConv<T>&, BottleneckTrace*);

XMODAL_INSTANTIATE_CONDITIONING(float)
XMODAL_INSTANTIATE_CONDITIONING(double)

}  // namespace xmodal
