#include <algorithm>
#include <cmath>

#include "funlag/dual_optimizer.hpp"
#include "funlag/errors.hpp"
#include "funlag/spec_catalog.hpp"
#include "helpers.hpp"

using namespace funlag;
using nlohmann::json;
using th::vec;

namespace {

CanonicalNetwork ten_class_net() {
  std::mt19937_64 rng(1);
  return CanonicalNetwork({th::det_layer(th::random_mat(rng, 10, 3, -1, 1), Vec::Zero(10))});
}

double brute_auc(const std::vector<double>& id, const std::vector<double>& ood) {
  double s = 0.0;
  for (double a : id)
    for (double b : ood) s += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return s / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

}  // namespace

TEST_CASE("spec config parsing") {
  auto c = parse_spec_config(json::parse(
      R"({"type": "adversarial", "input": [0.1, 0.2, 0.3], "epsilon": 0.1, "true_label": 3, "clip": true})"));
  CHECK(c.type == SpecConfig::Type::adversarial);
  CHECK(c.true_label == 3);
  const auto again = parse_spec_config(spec_config_to_json(c));
  CHECK(again.input == c.input);
  CHECK(again.epsilon == c.epsilon);

  CHECK_THROWS_AS(parse_spec_config(json::parse(R"({"type": "nope", "input": [0], "epsilon": 0.1})")), ConfigError);
  CHECK_THROWS_AS(parse_spec_config(json::parse(
                      R"({"type": "robust_ood", "input": [0], "epsilon": 0.1, "p_max": 0.5, "bogus": 1})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_spec_config(json::parse(R"({"type": "robust_ood", "input": [0], "epsilon": -0.1, "p_max": 0.5})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_spec_config(json::parse(R"({"type": "robust_ood", "input": [0], "epsilon": 0.1, "p_max": 1.5})")),
                  ConfigError);
  CHECK_THROWS_AS(load_spec_config("/nonexistent.json"), ParseError);
}

TEST_CASE("problem expansion counts") {
  const auto net = ten_class_net();
  SpecConfig adv;
  adv.type = SpecConfig::Type::adversarial;
  adv.input = vec({0.5, 0.5, 0.5});
  adv.epsilon = 0.1;
  adv.true_label = 3;
  const auto ps = build_problem(net, adv);
  CHECK(ps.size() == 9);
  for (const auto& p : ps) {
    CHECK(p.objective.kind == SpecObjective::Kind::logit_diff);
    CHECK(p.objective.true_label == 3);
    CHECK(p.objective.target != 3);
    CHECK(p.threshold == 0.0);
  }

  SpecConfig ood;
  ood.type = SpecConfig::Type::robust_ood;
  ood.input = vec({0.5, 0.5, 0.5});
  ood.epsilon = 0.1;
  ood.p_max = 0.7;
  const auto os = build_problem(net, ood);
  CHECK(os.size() == 10);
  for (const auto& p : os) {
    CHECK(p.objective.kind == SpecObjective::Kind::expected_softmax);
    CHECK(p.threshold == 0.7);
  }

  adv.true_label = 10;
  CHECK_THROWS_AS(build_problem(net, adv), ConfigError);
}

TEST_CASE("input set support and clipping") {
  const auto s = InputSet::box_of_deltas(vec({0.05, 0.5}), 0.1, true).support();
  CHECK(s.lo(0) == 0.0);
  CHECK(s.hi(0) == doctest::Approx(0.15));
  const auto u = InputSet::box_of_deltas(vec({0.05, 0.5}), 0.1, false).support();
  CHECK(u.lo(0) == doctest::Approx(-0.05));
  CHECK_THROWS_AS(InputSet::box_of_deltas(vec({0.5}), 0.0).validate(), ValueError);
  CHECK_THROWS_AS(InputSet::subgaussian_noise(vec({0.5}), 0.1, -1.0).validate(), ValueError);
}

TEST_CASE("objective evaluation") {
  const Vec y = vec({1.0, 3.0, -1.0});
  CHECK(SpecObjective::logit_diff(1, 0).evaluate(y) == 2.0);
  CHECK(SpecObjective::logit_diff(1, 0).coefficients(3) == vec({-1, 1, 0}));
  CHECK(SpecObjective::expected_softmax(1).evaluate(y) == doctest::Approx(softmax(y)(1)));
  CHECK_THROWS_AS(SpecObjective::logit_diff(1, 1), ValueError);
}

TEST_CASE("auc examples") {
  CHECK(guaranteed_auc({0.5}, {0.9, 0.8}) == 1.0);
  CHECK(guaranteed_auc({0.5}, {0.5}) == 0.5);
  CHECK(adversarial_auc({0.0, 0.0, 0.0}, {1.0, 1.0}) == 1.0);
  const std::vector<double> b = {0.2, 0.7, 0.4};
  const std::vector<double> id = {0.3, 0.9, 0.4, 0.1};
  CHECK(adversarial_auc(b, id) == guaranteed_auc(b, id));
  CHECK_THROWS_AS(guaranteed_auc({}, {0.1}), EmptyInput);
}

TEST_CASE("auc matches brute force and is a rank statistic") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coarse(0, 20);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> id(100), ood(100);
    for (auto& v : id) v = coarse(rng) / 20.0;  // plenty of ties
    for (auto& v : ood) v = coarse(rng) / 20.0;
    const double g = guaranteed_auc(ood, id);
    CHECK(g == brute_auc(id, ood));
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    auto tr = [](std::vector<double> v) {
      for (auto& x : v) x = std::exp(3.0 * x) - 7.0;
      return v;
    };
    CHECK(guaranteed_auc(tr(ood), tr(id)) == g);
  }
}

TEST_CASE("gauc never exceeds aauc when attacks lie below bounds") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> id(30), bound(30), attack(30);
    for (auto& v : id) v = u(rng);
    for (std::size_t i = 0; i < 30; ++i) {
      bound[i] = u(rng);
      attack[i] = bound[i] * u(rng);
    }
    CHECK(guaranteed_auc(bound, id) <= adversarial_auc(attack, id));
  }
}

TEST_CASE("dist-robust spec with zero sigma bounds the point evaluation") {
  const auto net = load_model(FUNLAG_DATA_DIR "/synthetic_ood_model.json");
  SpecConfig c;
  c.type = SpecConfig::Type::dist_robust_ood;
  c.input = Vec::Constant(net.input_dim(), 0.4);
  c.epsilon = 0.04;
  c.sigma = 0.0;
  c.p_max = 0.9;
  const auto problems = build_problem(net, c);
  REQUIRE(problems.size() == static_cast<std::size_t>(net.output_dim()));
  OptimizeConfig oc;
  oc.steps = 100;
  oc.certify_every = 50;
  oc.early_stop = false;
  for (const auto& p : problems) {
    const auto cert = optimize(p, Family::linexp, oc);
    const auto est = estimate_objective(p, c.input, 20000, 3);
    CHECK(cert.bound >= est.value - 4.0 * est.standard_error);
  }
}
