// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "xmodal/networks.hpp"

namespace xmodal {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimiser over a fixed parameter list.
template <class T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>> params, AdamOptions options);

  /// Applies one update from the accumulated gradients; parameters without a
  /// gradient are treated as having a zero gradient.
  void step();
  void zero_grad();
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const AdamOptions& options() const { return options_; }
  long steps_taken() const { return t_; }

 private:
  std::vector<Parameter<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace xmodal
