#include <cmath>

#include "funlag/errors.hpp"
#include "funlag/oracle.hpp"
#include "helpers.hpp"

using namespace funlag;
using th::vec;

TEST_CASE("grid_maximize examples") {
  const Box sq(vec({-1, -1}), vec({1, 1}));
  const auto r = grid_maximize([](const Vec& x) { return -x.squaredNorm(); }, GridSpec{{101, 101}, sq});
  CHECK(r.value == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(r.argmax.norm() <= 1e-12);

  const auto l = grid_maximize([](const Vec& x) { return 2 * x(0) - x(1); }, GridSpec{{3, 7}, sq}, 0.0);
  CHECK(l.value == 3.0);
  CHECK(l.argmax == vec({1, -1}));
  CHECK(l.error_bound == 0.0);

  CHECK_THROWS_AS(grid_maximize([](const Vec&) { return 0.0; }, GridSpec{{10000, 10000}, sq}), BudgetExceeded);
  CHECK_THROWS_AS(grid_maximize([](const Vec&) { return 0.0; }, GridSpec{{10}, sq}), ShapeError);
}

TEST_CASE("grid refinement stays within the stated error") {
  const Box b(vec({-1, -2}), vec({2, 1}));
  auto f = [](const Vec& x) { return std::sin(3 * x(0)) * std::cos(2 * x(1)) + 0.1 * x(0); };
  const double L = std::sqrt(9.0 + 4.0) + 0.1;
  const auto fine = grid_maximize(f, GridSpec{{1001, 1001}, b}, L);
  for (int r : {11, 31, 101}) {
    const auto coarse = grid_maximize(f, GridSpec{{r, r}, b}, L);
    CHECK(fine.value - coarse.value <= coarse.error_bound);
  }
}

TEST_CASE("mc_expectation") {
  const auto L = th::det_layer(th::mat({{1, 2}}), vec({0.5}));
  const auto lam = Multiplier::linear(vec({2}));
  const auto r = mc_expectation(L, lam, vec({1, 1}), 10, 0);
  CHECK(r.mean == 7.0);
  CHECK(r.standard_error == 0.0);

  CanonicalLayer g;
  g.weights = WeightDistribution::gaussian(th::mat({{1, -1}}), th::mat({{0.3, 0.2}}));
  g.bias = WeightDistribution::gaussian(vec({0.1}), vec({0.1}));
  const auto one = mc_expectation(g, lam, vec({1, 2}), 1, 9);
  CHECK(one.standard_error == 0.0);
  CHECK(one.mean != doctest::Approx(2 * (1 - 2 + 0.1)));

  const auto q = Multiplier::quadratic(th::mat({{1.5}}), vec({-0.3}));
  const auto mc = mc_expectation(g, q, vec({1, 2}), 400000, 10);
  CHECK(std::abs(mc.mean - expected_under_layer(q, g, vec({1, 2}))) <= 4 * mc.standard_error);
}

TEST_CASE("random_problem") {
  RandomProblemOptions o;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto a = random_problem(s, o);
    const auto b = random_problem(s, o);
    CHECK(model_to_json(a.net) == model_to_json(b.net));
    CHECK(a.to_json() == b.to_json());
    CHECK(a.net.num_layers() <= 3);
    CHECK(a.net.output_dim() <= 4);
    CHECK(a.net.output_dim() >= 2);
    for (auto w : a.net.widths()) CHECK(w <= 6);
    CHECK(a.input.epsilon >= 0.01);
    CHECK(a.input.epsilon <= 0.1);
    // survives a serialization round trip through the model loader
    const auto again = parse_model(model_to_json(a.net));
    CHECK(model_to_json(again) == model_to_json(a.net));
  }
  RandomProblemOptions caps;
  caps.max_layers = 1;
  caps.max_width = 2;
  caps.max_classes = 2;
  const auto p = random_problem(5, caps);
  CHECK(p.net.num_layers() == 1);
  CHECK(p.net.input_dim() <= 2);
  CHECK(p.net.output_dim() == 2);
}
