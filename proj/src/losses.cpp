// SPDX-License-Identifier: Apache-2.0

#include "xmodal/losses.hpp"

#include <cmath>

namespace xmodal {

LossWeights default_loss_weights(ModelKind kind) {
  LossWeights w;
  w.lambda_idt = kind == ModelKind::sharegan ? 0.5 : 0.3;
  return w;
}

void validate(const LossWeights& w) {
  for (double v : {w.lambda_l1, w.lambda_cyc1, w.lambda_cyc2, w.lambda_idt, w.lambda_cls})
    if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("loss weights must be finite and >= 0");
  if (w.lambda_cls != 0.0) throw UsageError("lambda_cls must be 0: the classification branch is disabled");
}

std::string_view to_string(AdversarialLoss loss) {
  return loss == AdversarialLoss::least_squares ? "least_squares" : "cross_entropy";
}

AdversarialLoss parse_adversarial_loss(std::string_view text) {
  if (text == "cross_entropy") return AdversarialLoss::cross_entropy;
  if (text == "least_squares") return AdversarialLoss::least_squares;
  throw UsageError("unknown adversarial loss '" + std::string(text) + "' (expected cross_entropy|least_squares)");
}

}  // namespace xmodal
