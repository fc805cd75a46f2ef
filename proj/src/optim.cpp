// SPDX-License-Identifier: Apache-2.0

#include "xmodal/optim.hpp"

#include <cmath>

#include "xmodal/simd/kernels.hpp"

namespace xmodal {

template <class T>
Adam<T>::Adam(std::vector<Parameter<T>> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

template <class T>
void Adam<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const auto& k = simd::kernels<T>();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& var = params_[i].var;
    if (!var.has_grad()) var.mutable_grad();
    k.adam(var.value().size(), var.mutable_value().data(), var.grad().data(), m_[i].data(), v_[i].data(),
           static_cast<T>(options_.beta1), static_cast<T>(options_.beta2),
           static_cast<T>(options_.learning_rate / bc1), static_cast<T>(1.0 / bc2),
           static_cast<T>(options_.eps));
  }
}

template <class T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace xmodal
