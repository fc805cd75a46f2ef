// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "xmodal/ops.hpp"

using namespace xmodal;
using namespace xmodal::ag;

namespace {

using Fn = std::function<Var<double>(std::vector<Var<double>>&)>;

// Compares backward() with central differences on every input element.
void check_gradients(std::vector<Var<double>> inputs, const Fn& f, double tol = 1e-6) {
  for (auto& in : inputs) in.set_requires_grad(true);
  auto out = f(inputs);
  backward(out);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& x = inputs[k].mutable_value();
    for (std::int64_t i = 0; i < x.size(); ++i) {
      const double numeric = test::central_difference(x, i, 1e-6, [&] {
        NoGradGuard guard;
        return static_cast<double>(f(inputs).item());
      });
      const double analytic = inputs[k].has_grad() ? inputs[k].grad()[i] : 0.0;
      INFO("input " << k << " element " << i << " analytic " << analytic << " numeric " << numeric);
      CHECK(std::abs(analytic - numeric) <= tol * std::max(1.0, std::abs(numeric)));
    }
  }
}

// Weighted sum so every output element carries a distinct gradient.
Var<double> probe(const Var<double>& y, std::uint64_t seed = 99) {
  Var<double> w(test::random_tensor<double>(y.shape(), seed));
  Var<double> prod = make_result<double>(
      [&] {
        Tensor<double> t(y.shape());
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = y.value()[i] * w.value()[i];
        return t;
      }(),
      {y}, [w](Node<double>& n) {
        auto& g = n.inputs[0]->grad_buffer();
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * w.value()[i];
      });
  return scale(mean(prod), static_cast<double>(prod.value().size()));
}

Var<double> rv(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return Var<double>(test::random_tensor<double>(s, seed, lo, hi));
}

// Direct definition of a zero-padded cross-correlation.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                          const ConvGeometry& g) {
  const auto n = x.dim(0), ci = x.dim(1), d = x.dim(2), h = x.dim(3), wd = x.dim(4);
  const auto co = w.dim(0);
  const auto od = conv_out_extent(d, g), oh = conv_out_extent(h, g), ow = conv_out_extent(wd, g);
  Tensor<double> out({n, co, od, oh, ow});
  const int k = g.kernel;
  for (std::int64_t s = 0; s < n; ++s)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t z = 0; z < od; ++z)
        for (std::int64_t y = 0; y < oh; ++y)
          for (std::int64_t xx = 0; xx < ow; ++xx) {
            double acc = b.empty() ? 0.0 : b[o];
            for (std::int64_t c = 0; c < ci; ++c)
              for (int a = 0; a < k; ++a)
                for (int bb = 0; bb < k; ++bb)
                  for (int cc = 0; cc < k; ++cc) {
                    const auto iz = z * g.stride - g.padding + a;
                    const auto iy = y * g.stride - g.padding + bb;
                    const auto ix = xx * g.stride - g.padding + cc;
                    if (iz < 0 || iy < 0 || ix < 0 || iz >= d || iy >= h || ix >= wd) continue;
                    acc += x[(((s * ci + c) * d + iz) * h + iy) * wd + ix] *
                           w[(((o * ci + c) * k + a) * k + bb) * k + cc];
                  }
            out[(((s * co + o) * od + z) * oh + y) * ow + xx] = acc;
          }
  return out;
}

double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("ops") {
  TEST_CASE("output extents") {
    CHECK(conv_out_extent(64, {3, 2, 1}) == 32);
    CHECK(conv_out_extent(32, {4, 2, 1}) == 16);
    CHECK(conv_transpose_out_extent(8, {4, 2, 1}) == 16);
    CHECK(conv_out_extent(9, {3, 1, 1}) == 9);
  }

  TEST_CASE("conv3d matches direct definition") {
    for (ConvGeometry g : {ConvGeometry{3, 1, 1}, ConvGeometry{3, 2, 1}, ConvGeometry{4, 2, 1}, ConvGeometry{1, 1, 0}}) {
      auto x = test::random_tensor<double>({2, 3, 6, 5, 7}, 1);
      auto w = test::random_tensor<double>({4, 3, g.kernel, g.kernel, g.kernel}, 2);
      auto b = test::random_tensor<double>({4}, 3);
      auto got = conv3d(Var<double>(x), Var<double>(w), Var<double>(b), g).value();
      auto want = naive_conv(x, w, b, g);
      REQUIRE(got.shape() == want.shape());
      for (std::int64_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("conv3d float agrees with double") {
    auto x = test::random_tensor<double>({1, 2, 8, 8, 8}, 4);
    auto w = test::random_tensor<double>({3, 2, 3, 3, 3}, 5);
    auto d = conv3d(Var<double>(x), Var<double>(w), Var<double>(), {3, 2, 1}).value();
    auto f = conv3d(Var<float>(x.cast<float>()), Var<float>(w.cast<float>()), Var<float>(), {3, 2, 1}).value();
    for (std::int64_t i = 0; i < d.size(); ++i) CHECK(f[i] == doctest::Approx(d[i]).epsilon(1e-5));
  }

  TEST_CASE("transposed convolution is the adjoint of convolution") {
    const ConvGeometry g{4, 2, 1};
    auto x = test::random_tensor<double>({2, 3, 8, 8, 8}, 6);
    auto w = test::random_tensor<double>({5, 3, 4, 4, 4}, 7);
    auto y = test::random_tensor<double>({2, 5, 4, 4, 4}, 8);
    auto cx = conv3d(Var<double>(x), Var<double>(w), Var<double>(), g).value();
    auto ty = conv_transpose3d(Var<double>(y), Var<double>(w), Var<double>(), g).value();
    REQUIRE(ty.shape() == x.shape());
    CHECK(inner(cx, y) == doctest::Approx(inner(x, ty)).epsilon(1e-12));
  }

  TEST_CASE("gradient: conv3d") {
    for (ConvGeometry g : {ConvGeometry{3, 1, 1}, ConvGeometry{3, 2, 1}, ConvGeometry{4, 2, 1}})
      check_gradients({rv({1, 2, 4, 5, 4}, 10), rv({2, 2, g.kernel, g.kernel, g.kernel}, 11), rv({2}, 12)},
                      [g](auto& v) { return probe(conv3d(v[0], v[1], v[2], g)); });
  }

  TEST_CASE("gradient: conv_transpose3d") {
    const ConvGeometry g{4, 2, 1};
    check_gradients({rv({1, 2, 2, 3, 2}, 13), rv({2, 3, 4, 4, 4}, 14), rv({3}, 15)},
                    [g](auto& v) { return probe(conv_transpose3d(v[0], v[1], v[2], g)); });
  }

  TEST_CASE("gradient: instance_norm") {
    check_gradients({rv({2, 2, 3, 2, 3}, 16)}, [](auto& v) { return probe(instance_norm(v[0])); });
  }

  TEST_CASE("instance_norm standardises each channel") {
    auto y = instance_norm(rv({1, 2, 4, 4, 4}, 17, -3.0, 5.0)).value();
    for (int c = 0; c < 2; ++c) {
      double s = 0, s2 = 0;
      for (int i = 0; i < 64; ++i) {
        s += y[c * 64 + i];
        s2 += y[c * 64 + i] * y[c * 64 + i];
      }
      CHECK(s / 64 == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(s2 / 64 == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  TEST_CASE("gradient: pointwise activations") {
    check_gradients({rv({17}, 18)}, [](auto& v) { return probe(relu(v[0])); });
    check_gradients({rv({17}, 19)}, [](auto& v) { return probe(leaky_relu(v[0], 0.2)); });
    check_gradients({rv({17}, 20, -3.0, 3.0)}, [](auto& v) { return probe(tanh(v[0])); });
  }

  TEST_CASE("gradient: arithmetic and broadcasting") {
    check_gradients({rv({2, 3}, 21), rv({2, 3}, 22)}, [](auto& v) { return probe(add(v[0], v[1]) - scale(v[1], 3.0)); });
    check_gradients({rv({2, 2, 2, 3, 2}, 23), rv({2}, 24)}, [](auto& v) { return probe(add_per_sample(v[0], v[1])); });
    check_gradients({rv({2}, 25)}, [](auto& v) { return probe(broadcast_channel(v[0], 2, 3, 2)); });
    check_gradients({rv({2, 2, 2, 2, 1}, 26), rv({2, 1, 2, 2, 1}, 27)},
                    [](auto& v) { return probe(concat_channels(v[0], v[1])); });
    check_gradients({rv({2, 3, 2}, 28)}, [](auto& v) { return probe(flatten(v[0])); });
  }

  TEST_CASE("gradient: linear") {
    check_gradients({rv({3, 5}, 29), rv({4, 5}, 30), rv({4}, 31)},
                    [](auto& v) { return probe(linear(v[0], v[1], v[2])); });
  }

  TEST_CASE("gradient: reductions and losses") {
    check_gradients({rv({11}, 32), rv({11}, 33)}, [](auto& v) { return mean_abs_diff(v[0], v[1]); });
    check_gradients({rv({11}, 34)}, [](auto& v) { return mean(v[0]); });
    check_gradients({rv({7}, 35, -4.0, 4.0)}, [](auto& v) { return bce_with_logits(v[0], true); });
    check_gradients({rv({7}, 36, -4.0, 4.0)}, [](auto& v) { return bce_with_logits(v[0], false); });
    check_gradients({rv({7}, 37)}, [](auto& v) { return mean_squared_to(v[0], 1.0); });
  }

  TEST_CASE("bce_with_logits values") {
    Var<double> z(Tensor<double>({2}, std::vector<double>{0.0, 2.0}));
    const double s2 = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(bce_with_logits(z, true).item() == doctest::Approx((std::log(2.0) - std::log(s2)) / 2).epsilon(1e-14));
    CHECK(bce_with_logits(z, false).item() ==
          doctest::Approx((std::log(2.0) - std::log(1.0 - s2)) / 2).epsilon(1e-14));
    Var<double> big(Tensor<double>({1}, 800.0));
    CHECK(std::isfinite(bce_with_logits(big, false).item()));
    CHECK(bce_with_logits(big, false).item() == doctest::Approx(800.0));
  }

  TEST_CASE("dropout keeps expectation and is seeded") {
    Var<double> x(Tensor<double>({20000}, 1.0));
    std::mt19937_64 r1(5), r2(5);
    auto a = dropout(x, 0.5, r1).value();
    auto b = dropout(x, 0.5, r2).value();
    CHECK(a == b);
    double s = 0;
    for (auto v : a.values()) {
      CHECK((v == 0.0 || v == 2.0));
      s += v;
    }
    CHECK(s / 20000 == doctest::Approx(1.0).epsilon(0.03));
  }

  TEST_CASE("shape mismatches throw") {
    CHECK_THROWS(add(rv({2}, 1), rv({3}, 2)));
    CHECK_THROWS(conv3d(rv({1, 2, 4, 4, 4}, 1), rv({2, 3, 3, 3, 3}, 2), Var<double>(), {3, 1, 1}));
    CHECK_THROWS(concat_channels(rv({1, 2, 4, 4, 4}, 1), rv({1, 1, 4, 4, 2}, 2)));
  }
}
