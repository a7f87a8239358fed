#include "funlag/bounds.hpp"
#include "funlag/errors.hpp"
#include "funlag/oracle.hpp"
#include "helpers.hpp"

using namespace funlag;
using th::mat;
using th::vec;

TEST_CASE("weight_support examples") {
  const auto g = weight_support(WeightDistribution::gaussian(mat({{1.0}}), mat({{0.1}}), 3.0));
  CHECK(g.lo(0, 0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(g.hi(0, 0) == doctest::Approx(1.3).epsilon(1e-15));

  const auto d = weight_support(WeightDistribution::dropout(mat({{-2.0}}), mat({{0.5}})));
  CHECK(d.lo(0, 0) == -2.0);
  CHECK(d.hi(0, 0) == 0.0);

  const auto c = weight_support(WeightDistribution::deterministic(mat({{5.0}})));
  CHECK(c.lo(0, 0) == 5.0);
  CHECK(c.hi(0, 0) == 5.0);

  const auto k0 = weight_support(WeightDistribution::dropout(mat({{3.0}}), mat({{0.0}})));
  CHECK(k0.lo(0, 0) == 0.0);
  CHECK(k0.hi(0, 0) == 0.0);
  const auto k1 = weight_support(WeightDistribution::dropout(mat({{3.0}}), mat({{1.0}})));
  CHECK(k1.lo(0, 0) == 3.0);
  CHECK(k1.hi(0, 0) == 3.0);
}

TEST_CASE("interval_affine examples") {
  auto exact = [](const Mat& m) { return IntervalMatrix{m, m}; };
  Box r = interval_affine(Box(vec({-1}), vec({1})), exact(mat({{1}})), Box::point(vec({0})));
  CHECK(r.lo(0) == -1.0);
  CHECK(r.hi(0) == 1.0);

  r = interval_affine(Box(vec({0, 0}), vec({1, 1})), exact(mat({{-1, 1}})), Box::point(vec({0})));
  CHECK(r.lo(0) == -1.0);
  CHECK(r.hi(0) == 1.0);

  // a 1x1 weight interval times x in [1,2]
  r = interval_affine(Box(vec({1}), vec({2})), IntervalMatrix{mat({{0.7}}), mat({{1.3}})},
                      Box::point(vec({0})));
  CHECK(r.lo(0) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r.hi(0) == doctest::Approx(2.6).epsilon(1e-15));

  CHECK_THROWS_AS(interval_affine(Box(vec({0, 0}), vec({1, 1})), exact(mat({{1}})), Box::point(vec({0}))),
                  ShapeError);
}

TEST_CASE("interval_activation examples") {
  Box r = interval_activation(Box(vec({-1}), vec({1})), Activation::relu);
  CHECK(r.lo(0) == 0.0);
  CHECK(r.hi(0) == 1.0);
  r = interval_activation(Box(vec({-3}), vec({-1})), Activation::relu);
  CHECK(r.lo(0) == 0.0);
  CHECK(r.hi(0) == 0.0);
  r = interval_activation(Box(vec({-2}), vec({5})), Activation::identity);
  CHECK(r.lo(0) == -2.0);
  CHECK(r.hi(0) == 5.0);
}

TEST_CASE("box invariants") {
  CHECK_THROWS_AS(Box(vec({1}), vec({0})), ValueError);
  CHECK_THROWS_AS(Box(vec({0, 0}), vec({1})), ShapeError);
  CHECK_THROWS_AS(Box(vec({0}), vec({INFINITY})), ValueError);
}

TEST_CASE("identity layer keeps the input box") {
  const CanonicalNetwork net({th::det_layer(Mat::Identity(3, 3), Vec::Zero(3))});
  const Box in(vec({-1, 0, 0.5}), vec({1, 2, 0.75}));
  const auto b = propagate_intervals(net, in);
  REQUIRE(b.size() == 2);
  CHECK(b[1].lo == in.lo);
  CHECK(b[1].hi == in.hi);
  CHECK(b[0].lo == in.lo);
  CHECK_THROWS_AS(propagate_intervals(net, Box(vec({0}), vec({1}))), ShapeError);
}

TEST_CASE("sampled activations lie inside the propagated boxes") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomProblemOptions opt;
    const auto p = random_problem(seed, opt);
    const Box in = p.input.support();
    const auto bounds = propagate_intervals(p.net, in);
    std::mt19937_64 rng(seed * 31);
    for (int t = 0; t < 500; ++t) {
      Vec x = in.lo + (th::random_vec(rng, in.size(), 0.0, 1.0).array() * (in.hi - in.lo).array()).matrix();
      REQUIRE(bounds[0].contains(x));
      for (std::size_t k = 0; k < p.net.num_layers(); ++k) {
        const auto s = sample_layer(p.net.layer(k), rng);
        x = s.weights * apply_activation(p.net.layer(k).activation, x) + s.bias;
        REQUIRE(bounds[k + 1].contains(x));
      }
    }
  }
}

TEST_CASE("widening the input box never shrinks any layer box") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = random_problem(seed);
    const Box in = p.input.support();
    const Box wide(in.lo.array() - 0.05, in.hi.array() + 0.1);
    const auto a = propagate_intervals(p.net, in);
    const auto b = propagate_intervals(p.net, wide);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k].contains(a[k]));
  }
}

TEST_CASE("degenerate randomness matches deterministic propagation") {
  const Mat w = mat({{1, -2}, {0.5, 0.25}});
  const Vec bias = vec({0.1, -0.3});
  CanonicalLayer g;
  g.weights = WeightDistribution::gaussian(w, Mat::Zero(2, 2));
  g.bias = WeightDistribution::dropout(bias, Mat::Ones(2, 1));
  CanonicalLayer r = g;
  r.activation = Activation::relu;
  r.weights = WeightDistribution::dropout(w, mat({{1, 0}, {1, 1}}));
  Mat w_masked = w;
  w_masked(0, 1) = 0.0;

  const CanonicalNetwork stoch({g, r});
  const CanonicalNetwork det({th::det_layer(w, bias), th::det_layer(w_masked, bias, Activation::relu)});
  const Box in(vec({-1, 0}), vec({0.5, 1}));
  const auto a = propagate_intervals(stoch, in);
  const auto b = propagate_intervals(det, in);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].lo == b[k].lo);
    CHECK(a[k].hi == b[k].hi);
  }
}
