// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/conditioning.hpp"
#include "xmodal/error.hpp"
#include "xmodal/ops.hpp"

using namespace xmodal;
using ag::Var;

TEST_SUITE("conditioning") {
  TEST_CASE("mode names round trip") {
    for (auto m : {ConditioningMode::none, ConditioningMode::image_add, ConditioningMode::latent_add,
                   ConditioningMode::latent_concat})
      CHECK(parse_conditioning_mode(to_string(m)) == m);
    CHECK(to_string(ConditioningMode::latent_concat) == "latent_concat");
    CHECK_THROWS_AS(parse_conditioning_mode("film"), UsageError);
  }

  TEST_CASE("image_add shifts every voxel by the per-sample scalar") {
    Var<double> x(test::random_tensor<double>({2, 1, 2, 2, 2}, 1));
    Var<double> a(Tensor<double>({2}, std::vector<double>{0.25, 0.75}));
    auto y = condition_image_add(x, a).value();
    CHECK(y.shape() == x.shape());
    for (int i = 0; i < 8; ++i) {
      CHECK(y[i] == doctest::Approx(x.value()[i] + 0.25));
      CHECK(y[8 + i] == doctest::Approx(x.value()[8 + i] + 0.75));
    }
    CHECK_THROWS(condition_image_add(x, Var<double>(Tensor<double>({3}))));
  }

  TEST_CASE("latent_add keeps shape and checks channels") {
    Var<double> f(test::random_tensor<double>({1, 4, 2, 2, 2}, 2));
    Var<double> a(Tensor<double>({1}, 0.5));
    auto y = condition_latent_add(f, a, 4).value();
    CHECK(y.shape() == f.shape());
    CHECK(y[17] == doctest::Approx(f.value()[17] + 0.5));
    CHECK_THROWS_AS(condition_latent_add(f, a, 8), UsageError);
  }

  TEST_CASE("latent_concat appends one channel and fuses back") {
    const std::int64_t c = 4;
    FusionConv<double> fusion{Var<double>(test::random_tensor<double>({c, c + 1, 1, 1, 1}, 3)),
                              Var<double>(test::random_tensor<double>({c}, 4))};
    Var<double> f(test::random_tensor<double>({2, c, 2, 3, 2}, 5));
    Var<double> a(Tensor<double>({2}, std::vector<double>{0.1, 0.9}));
    BottleneckTrace trace;
    auto y = condition_latent_concat(f, a, fusion, &trace).value();
    CHECK(trace.concatenated == Shape{2, c + 1, 2, 3, 2});
    CHECK(y.shape() == f.shape());
    // Pointwise oracle: y[o] = b[o] + sum_c W[o,c] f[c] + W[o,C] a.
    const auto& w = fusion.weight.value();
    for (std::int64_t s = 0; s < 2; ++s)
      for (std::int64_t o = 0; o < c; ++o)
        for (std::int64_t v = 0; v < 12; ++v) {
          double acc = fusion.bias.value()[o] + w[o * (c + 1) + c] * a.value()[s];
          for (std::int64_t ci = 0; ci < c; ++ci) acc += w[o * (c + 1) + ci] * f.value()[(s * c + ci) * 12 + v];
          CHECK(y[(s * c + o) * 12 + v] == doctest::Approx(acc).epsilon(1e-12));
        }
  }
}
