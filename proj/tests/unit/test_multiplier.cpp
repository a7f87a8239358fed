#include <cmath>

#include "funlag/errors.hpp"
#include "funlag/multiplier.hpp"
#include "funlag/oracle.hpp"
#include "helpers.hpp"

using namespace funlag;
using th::mat;
using th::vec;

namespace {

CanonicalLayer gaussian_layer(const Mat& mean, const Mat& sd, const Vec& bmean, const Vec& bsd) {
  CanonicalLayer L;
  L.weights = WeightDistribution::gaussian(mean, sd);
  L.bias = WeightDistribution::gaussian(bmean, bsd);
  return L;
}

CanonicalLayer dropout_layer(const Mat& v, const Mat& keep, const Vec& b, const Vec& bkeep) {
  CanonicalLayer L;
  L.weights = WeightDistribution::dropout(v, keep);
  L.bias = WeightDistribution::dropout(b, bkeep);
  return L;
}

Mat symmetric(std::mt19937_64& rng, Eigen::Index n) {
  const Mat a = th::random_mat(rng, n, n, -1, 1);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("eval examples") {
  CHECK(Multiplier::linear(vec({1, 2})).eval(vec({3, 4})) == 11.0);
  CHECK(Multiplier::linexp(vec({0, 0}), vec({0, 0}), 0.0).eval(vec({5, -7})) == 1.0);
  CHECK(Multiplier::diag_quadratic(vec({0}), vec({1})).eval(vec({3})) == 9.0);
  CHECK(Multiplier::zero(3).eval(vec({1, 2, 3})) == 0.0);
  CHECK(Multiplier::quadratic(mat({{2, 0}, {0, 4}}), vec({1, 0})).eval(vec({1, 1})) == 4.0);
}

TEST_CASE("grad_x and param_gradient match finite differences") {
  std::mt19937_64 rng(3);
  const Vec x = th::random_vec(rng, 3, -1, 1);
  std::vector<Multiplier> ms = {
      Multiplier::linear(th::random_vec(rng, 3, -1, 1)),
      Multiplier::linexp(th::random_vec(rng, 3, -1, 1), th::random_vec(rng, 3, -1, 1), -0.5),
      Multiplier::quadratic(symmetric(rng, 3), th::random_vec(rng, 3, -1, 1)),
      Multiplier::diag_quadratic(th::random_vec(rng, 3, -1, 1), th::random_vec(rng, 3, -1, 1))};
  const double h = 1e-6;
  for (const auto& m : ms) {
    const Vec g = m.grad_x(x);
    for (Eigen::Index i = 0; i < 3; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      CHECK(g(i) == doctest::Approx((m.eval(xp) - m.eval(xm)) / (2 * h)).epsilon(1e-6));
    }
    std::vector<double> p, gp;
    m.pack(p);
    m.param_gradient(x).pack(gp);
    REQUIRE(p.size() == gp.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto plus = p, minus = p;
      plus[i] += h;
      minus[i] -= h;
      Multiplier a = m, b = m;
      a.unpack(plus);
      b.unpack(minus);
      const double fd = (a.eval(x) - b.eval(x)) / (2 * h);
      CHECK(gp[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("expected_under_layer examples") {
  const Vec two = vec({2});
  const auto g = gaussian_layer(mat({{1}}), mat({{1}}), vec({0}), vec({0}));
  CHECK(expected_under_layer(Multiplier::quadratic(mat({{1}}), vec({0})), g, two) ==
        doctest::Approx(4.0).epsilon(1e-14));

  const auto n01 = gaussian_layer(mat({{0}}), mat({{1}}), vec({0}), vec({0}));
  CHECK(expected_under_layer(Multiplier::linexp(vec({0}), vec({1}), 0.0), n01, vec({1})) ==
        doctest::Approx(std::exp(0.5)).epsilon(1e-14));

  const auto d = dropout_layer(mat({{std::log(2.0)}}), mat({{0.5}}), vec({0}), vec({1}));
  CHECK(expected_under_layer(Multiplier::linexp(vec({0}), vec({1}), 0.0), d, vec({1})) ==
        doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("moments against Monte Carlo") {
  // kinds: gaussian / dropout x linear / quadratic / linexp; a few instances here,
  // the full sweep runs in the acceptance binary
  std::mt19937_64 rng(11);
  for (int inst = 0; inst < 3; ++inst) {
    for (int kind = 0; kind < 2; ++kind) {
      const Mat mean = th::random_mat(rng, 2, 3, -1, 1);
      const CanonicalLayer L =
          kind == 0 ? gaussian_layer(mean, th::random_mat(rng, 2, 3, 0, 0.3), th::random_vec(rng, 2, -0.2, 0.2),
                                     th::random_vec(rng, 2, 0, 0.1))
                    : dropout_layer(mean, th::random_mat(rng, 2, 3, 0.3, 1), th::random_vec(rng, 2, -0.2, 0.2),
                                    th::random_vec(rng, 2, 0.3, 1));
      const Vec x = th::random_vec(rng, 3, -1, 1);
      std::vector<Multiplier> ms = {
          Multiplier::linear(th::random_vec(rng, 2, -1, 1)),
          Multiplier::quadratic(symmetric(rng, 2), th::random_vec(rng, 2, -1, 1)),
          Multiplier::diag_quadratic(th::random_vec(rng, 2, -1, 1), th::random_vec(rng, 2, -1, 1)),
          Multiplier::linexp(th::random_vec(rng, 2, -1, 1), th::random_vec(rng, 2, -0.5, 0.5), -0.3)};
      for (const auto& m : ms) {
        const auto mc = mc_expectation(L, m, x, 200000, 1000 + inst);
        const double closed = expected_under_layer(m, L, x);
        CHECK(std::abs(mc.mean - closed) <= 4.0 * mc.standard_error + 1e-12);
      }
    }
  }
}

TEST_CASE("expected_quadratic_form agrees with expected_under_layer") {
  std::mt19937_64 rng(5);
  const auto L = gaussian_layer(th::random_mat(rng, 2, 2, -1, 1), th::random_mat(rng, 2, 2, 0, 0.3),
                                th::random_vec(rng, 2, -1, 1), th::random_vec(rng, 2, 0, 0.2));
  const auto m = Multiplier::quadratic(symmetric(rng, 2), th::random_vec(rng, 2, -1, 1));
  const auto q = expected_quadratic_form(m, L);
  for (int t = 0; t < 5; ++t) {
    const Vec z = th::random_vec(rng, 2, -1, 1);
    CHECK(q.eval(z) == doctest::Approx(expected_under_layer(m, L, z)).epsilon(1e-12));
  }
}

TEST_CASE("expected gradients match finite differences") {
  std::mt19937_64 rng(9);
  CanonicalLayer L = gaussian_layer(th::random_mat(rng, 2, 2, -1, 1), th::random_mat(rng, 2, 2, 0, 0.3),
                                    th::random_vec(rng, 2, -1, 1), th::random_vec(rng, 2, 0, 0.2));
  const Vec x = vec({0.4, 0.7});  // positive so relu is smooth here
  for (auto s : {Activation::identity, Activation::relu}) {
    L.activation = s;
    for (const auto& m : {Multiplier::linexp(vec({0.3, -0.2}), vec({0.5, 0.1}), -0.2),
                          Multiplier::quadratic(symmetric(rng, 2), vec({0.1, 0.2}))}) {
      const Vec gx = expected_grad_x(m, L, x);
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < 2; ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (expected_under_layer(m, L, xp) - expected_under_layer(m, L, xm)) / (2 * h);
        CHECK(gx(i) == doctest::Approx(fd).epsilon(1e-6));
      }
      std::vector<double> p, gp;
      m.pack(p);
      expected_param_gradient(m, L, x).pack(gp);
      for (std::size_t i = 0; i < p.size(); ++i) {
        auto plus = p, minus = p;
        plus[i] += h;
        minus[i] -= h;
        Multiplier a = m, b = m;
        a.unpack(plus);
        b.unpack(minus);
        const double fd = (expected_under_layer(a, L, x) - expected_under_layer(b, L, x)) / (2 * h);
        CHECK(gp[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("init_stack") {
  const std::vector<Eigen::Index> widths = {2, 3, 2};
  InitOptions zeros;
  const auto s = init_stack({Family::linexp, Family::linear}, widths, zeros);
  REQUIRE(s.depth() == 2);
  CHECK(s.at(1).family == Family::linexp);
  CHECK(s.at(1).kappa == -10.0);
  CHECK(s.at(1).lin.isZero());
  CHECK(s.at(1).gamma.isZero());
  CHECK(s.at(2).lin.isZero());
  CHECK(s.at(2).dim() == 2);

  InitOptions noise;
  noise.strategy = InitStrategy::noise;
  noise.seed = 17;
  const auto a = init_stack({Family::quadratic, Family::diag_quadratic}, widths, noise);
  const auto b = init_stack({Family::quadratic, Family::diag_quadratic}, widths, noise);
  CHECK(a.pack() == b.pack());
  CHECK(a.at(1).Q == a.at(1).Q.transpose());

  // the exp term at init is at most e^-10 e^{gamma^T x}
  noise.strategy = InitStrategy::noise;
  const auto c = init_stack({Family::linexp, Family::linear}, widths, noise);
  const Vec x = vec({0.5, -0.2, 1.0});
  const auto& l1 = c.at(1);
  CHECK(l1.eval(x) - l1.lin.dot(x) <= std::exp(-10.0) * std::exp(l1.gamma.dot(x)) * (1 + 1e-12));
}

TEST_CASE("stack pack/unpack and json round trip") {
  InitOptions noise;
  noise.strategy = InitStrategy::noise;
  noise.seed = 4;
  const auto s = init_stack({Family::linexp, Family::quadratic, Family::diag_quadratic}, {2, 3, 2, 3}, noise);
  MultiplierStack t = s.zeros_like();
  t.unpack(s.pack());
  CHECK(t.pack() == s.pack());
  const auto r = stack_from_json(stack_to_json(s));
  CHECK(r.pack() == s.pack());
  CHECK(r.at(2).family == Family::quadratic);
}

TEST_CASE("as_quadratic promotion") {
  const auto d = Multiplier::diag_quadratic(vec({1, 2}), vec({0.5, -1}));
  const auto q = d.as_quadratic();
  const Vec x = vec({0.3, -0.7});
  CHECK(q.eval(x) == doctest::Approx(d.eval(x)).epsilon(1e-15));
  CHECK(Multiplier::linear(vec({1, 2})).as_quadratic().eval(x) == doctest::Approx(0.3 - 1.4));
}
