// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/losses.hpp"

using namespace xmodal;
using ag::Var;

namespace {

Var<double> vec(std::vector<double> v) {
  const auto n = static_cast<std::int64_t>(v.size());
  return Var<double>(Tensor<double>({n}, std::move(v)));
}

double log_sigmoid(double x) { return -std::log1p(std::exp(-x)); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("default weights") {
    auto c = default_loss_weights(ModelKind::cyclegan);
    auto s = default_loss_weights(ModelKind::sharegan);
    CHECK(c.lambda_cyc1 == 10.0);
    CHECK(c.lambda_cyc2 == 10.0);
    CHECK(c.lambda_idt == 0.3);
    CHECK(s.lambda_idt == 0.5);
    CHECK(s.lambda_cls == 0.0);
    LossWeights bad = c;
    bad.lambda_cls = 0.1;
    CHECK_THROWS_AS(validate(bad), UsageError);
    bad = c;
    bad.lambda_idt = -1.0;
    CHECK_THROWS_AS(validate(bad), UsageError);
  }

  TEST_CASE("cycle composite on plain numbers") {
    LossWeights w;
    w.lambda_cyc1 = 10.0;
    w.lambda_cyc2 = 7.0;
    w.lambda_idt = 0.3;
    CycleTerms<double> t{0.5, 0.25, 0.1, 0.2, 0.4};
    CHECK(std::abs(cyclegan_objective(t, w) - (0.5 + 0.25 + 1.0 + 1.4 + 0.12)) < 1e-12);
    ShareTerms<double> st{t, 123.0};
    CHECK(std::abs(sharegan_objective(st, w) - cyclegan_objective(t, w)) < 1e-12);
    w.lambda_cls = 0.1;
    CHECK_THROWS_AS(sharegan_objective(st, w), UsageError);
  }

  TEST_CASE("pix2pix composite") {
    LossWeights w;
    w.lambda_l1 = 100.0;
    CHECK(std::abs(pix2pix_objective(Pix2pixTerms<double>{0.7, 0.01}, w) - 1.7) < 1e-12);
  }

  TEST_CASE("graph composites match plain arithmetic") {
    LossWeights w = default_loss_weights(ModelKind::cyclegan);
    CycleTerms<Var<double>> t{Var<double>::scalar(0.3), Var<double>::scalar(0.6), Var<double>::scalar(0.05),
                              Var<double>::scalar(0.07), Var<double>::scalar(0.2)};
    CHECK(std::abs(cyclegan_objective(t, w).item() - (0.9 + 0.5 + 0.7 + 0.06)) < 1e-12);
  }

  TEST_CASE("l1 cycle and identity terms") {
    auto x = vec({1.0, 2.0, 3.0}), y = vec({1.5, 1.0, 3.0});
    CHECK(std::abs(l1_loss(x, y).item() - 0.5) < 1e-12);
    CHECK(std::abs(cycle_loss(x, y).item() - 0.5) < 1e-12);
    CHECK(std::abs(identity_loss(x, y, y, x).item() - 1.0) < 1e-12);
    CHECK_THROWS_AS(l1_loss(x, vec({1.0})), UsageError);
  }

  TEST_CASE("cross-entropy adversarial terms") {
    auto real = vec({2.0, -1.0}), fake = vec({0.5, -3.0});
    const double d = -(log_sigmoid(2.0) + log_sigmoid(-1.0)) / 2 - (log_sigmoid(-0.5) + log_sigmoid(3.0)) / 2;
    const double g = -(log_sigmoid(0.5) + log_sigmoid(-3.0)) / 2;
    auto terms = cgan_loss(real, fake);
    CHECK(std::abs(terms.disc_term.item() - d) < 1e-12);
    CHECK(std::abs(terms.gen_term.item() - g) < 1e-12);
    CHECK(std::abs(discriminator_loss(vec({0.0}), vec({0.0})).item() - 2 * std::log(2.0)) < 1e-12);
    CHECK_THROWS_AS(generator_adversarial_loss(Var<double>(Tensor<double>({0}))), UsageError);
  }

  TEST_CASE("least-squares adversarial terms") {
    auto real = vec({2.0, 0.0}), fake = vec({0.5, -1.0});
    CHECK(std::abs(discriminator_loss(real, fake, AdversarialLoss::least_squares).item() - (1.0 + 0.625)) < 1e-12);
    CHECK(std::abs(generator_adversarial_loss(fake, AdversarialLoss::least_squares).item() - 2.125) < 1e-12);
    CHECK(parse_adversarial_loss(to_string(AdversarialLoss::least_squares)) == AdversarialLoss::least_squares);
  }
}
