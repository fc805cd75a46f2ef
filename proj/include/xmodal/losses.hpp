// SPDX-License-Identifier: Apache-2.0
//
// Adversarial, L1, cycle-consistency and identity losses, and the composite
// objectives of the three translation setups. The composites are templated
// on the value type so the same code sums plain doubles and graph nodes.

#pragma once

#include <string_view>

#include "xmodal/autograd.hpp"
#include "xmodal/error.hpp"
#include "xmodal/networks.hpp"
#include "xmodal/ops.hpp"

namespace xmodal {

struct LossWeights {
  double lambda_l1 = 100.0;  // pix2pix reconstruction weight (not given for the baseline)
  double lambda_cyc1 = 10.0;
  double lambda_cyc2 = 10.0;
  double lambda_idt = 0.3;
  double lambda_cls = 0.0;  // classification branch is disabled
  bool operator==(const LossWeights&) const = default;
};

/// 0.3 identity weight for CycleGAN, 0.5 for ShareGAN, lambda 10 cycles.
LossWeights default_loss_weights(ModelKind kind);

/// Throws UsageError for negative weights or a non-zero lambda_cls.
void validate(const LossWeights& w);

enum class AdversarialLoss { cross_entropy, least_squares };
std::string_view to_string(AdversarialLoss loss);
AdversarialLoss parse_adversarial_loss(std::string_view text);

template <class T>
struct AdversarialTerms {
  ag::Var<T> gen_term;
  ag::Var<T> disc_term;
};

/// Discriminator side: -mean log s(real) - mean log(1 - s(fake)) for
/// pre-sigmoid scores (or the least-squares analogue).
template <class T>
ag::Var<T> discriminator_loss(const ag::Var<T>& real_scores, const ag::Var<T>& fake_scores,
                              AdversarialLoss kind = AdversarialLoss::cross_entropy) {
  if (real_scores.value().size() == 0 || fake_scores.value().size() == 0)
    throw UsageError("adversarial loss over an empty batch");
  if (kind == AdversarialLoss::least_squares)
    return ag::add(ag::mean_squared_to(real_scores, T(1)), ag::mean_squared_to(fake_scores, T(0)));
  return ag::add(ag::bce_with_logits(real_scores, true), ag::bce_with_logits(fake_scores, false));
}

/// Generator side, non-saturating: -mean log s(fake).
template <class T>
ag::Var<T> generator_adversarial_loss(const ag::Var<T>& fake_scores,
                                      AdversarialLoss kind = AdversarialLoss::cross_entropy) {
  if (fake_scores.value().size() == 0) throw UsageError("adversarial loss over an empty batch");
  if (kind == AdversarialLoss::least_squares) return ag::mean_squared_to(fake_scores, T(1));
  return ag::bce_with_logits(fake_scores, true);
}

template <class T>
AdversarialTerms<T> cgan_loss(const ag::Var<T>& real_scores, const ag::Var<T>& fake_scores,
                              AdversarialLoss kind = AdversarialLoss::cross_entropy) {
  return {generator_adversarial_loss(fake_scores, kind), discriminator_loss(real_scores, fake_scores, kind)};
}

/// Mean absolute voxel difference.
template <class T>
ag::Var<T> l1_loss(const ag::Var<T>& y_hat, const ag::Var<T>& y) {
  if (y_hat.shape() != y.shape())
    throw UsageError("l1 loss shape mismatch: " + to_string(y_hat.shape()) + " vs " + to_string(y.shape()));
  return ag::mean_abs_diff(y_hat, y);
}

/// |x - G2(G1(x))|, mean over voxels.
template <class T>
ag::Var<T> cycle_loss(const ag::Var<T>& x, const ag::Var<T>& x_reconstructed) {
  return l1_loss(x_reconstructed, x);
}

/// |G(x) - x| for a generator fed an image already in its output domain.
template <class T>
ag::Var<T> identity_loss(const ag::Var<T>& same_domain_out, const ag::Var<T>& x) {
  return l1_loss(same_domain_out, x);
}

/// Both-domain identity term: |G_p(x_p) - x_p| + |G_m(x_m) - x_m|.
template <class T>
ag::Var<T> identity_loss(const ag::Var<T>& pet_out, const ag::Var<T>& pet,
                         const ag::Var<T>& mri_out, const ag::Var<T>& mri) {
  return ag::add(l1_loss(pet_out, pet), l1_loss(mri_out, mri));
}

namespace detail {
inline double weighted(double v, double w) { return v * w; }
template <class T>
ag::Var<T> weighted(const ag::Var<T>& v, double w) {
  return ag::scale(v, static_cast<T>(w));
}
}  // namespace detail

template <class V>
struct Pix2pixTerms {
  V adversarial;
  V l1;
};

/// adversarial + lambda_l1 * l1
template <class V>
V pix2pix_objective(const Pix2pixTerms<V>& t, const LossWeights& w) {
  return t.adversarial + detail::weighted(t.l1, w.lambda_l1);
}

template <class V>
struct CycleTerms {
  V adv_mri_to_pet;  // generator loss of MRI->PET against the PET discriminator
  V adv_pet_to_mri;  // generator loss of PET->MRI against the MRI discriminator
  V cycle_mri;       // |G2(G1(x_m)) - x_m|
  V cycle_pet;       // |G1(G2(x_p)) - x_p|
  V identity;        // combined identity term
};

/// L_G(G1,D2) + L_G(G2,D1) + l1*L_C(G1,G2) + l2*L_C(G2,G1) + l_idt*L_idt
template <class V>
V cyclegan_objective(const CycleTerms<V>& t, const LossWeights& w) {
  return t.adv_mri_to_pet + t.adv_pet_to_mri + detail::weighted(t.cycle_mri, w.lambda_cyc1) +
         detail::weighted(t.cycle_pet, w.lambda_cyc2) + detail::weighted(t.identity, w.lambda_idt);
}

template <class V>
struct ShareTerms {
  CycleTerms<V> cycle;
  V classification;  // must carry zero weight
};

/// L_GAN + l_cycle*L_Cycle + l_ide*L_Ide + l_cls*L_Cls with l_cls required to be 0.
template <class V>
V sharegan_objective(const ShareTerms<V>& t, const LossWeights& w) {
  if (w.lambda_cls != 0.0) throw UsageError("lambda_cls must be 0: the classification branch is disabled");
  return cyclegan_objective(t.cycle, w);
}

}  // namespace xmodal
