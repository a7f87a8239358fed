#include "funlag/spec_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "funlag/errors.hpp"
#include "funlag/hexfloat.hpp"

namespace funlag {

using nlohmann::json;

InputSet InputSet::box_of_deltas(Vec center, double epsilon, bool clip) {
  InputSet s;
  s.kind = Kind::box;
  s.center = std::move(center);
  s.epsilon = epsilon;
  s.clip = clip;
  s.validate();
  return s;
}

InputSet InputSet::subgaussian_noise(Vec center, double epsilon, double sigma, bool clip) {
  InputSet s;
  s.kind = Kind::subgaussian;
  s.center = std::move(center);
  s.epsilon = epsilon;
  s.sigma = sigma;
  s.clip = clip;
  s.validate();
  return s;
}

void InputSet::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValueError("epsilon must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValueError("sigma must be nonnegative");
  if (center.size() == 0 || !center.allFinite()) throw ValueError("input center must be a finite vector");
  if (clip) {
    const Box b = support();
    for (Eigen::Index i = 0; i < b.size(); ++i)
      if (b.lo(i) > b.hi(i)) throw ValueError("input box does not meet the [0, 1] data domain");
  }
}

Box InputSet::support() const {
  Vec lo = center.array() - epsilon;
  Vec hi = center.array() + epsilon;
  if (clip) {
    lo = lo.cwiseMax(0.0).cwiseMin(1.0);
    hi = hi.cwiseMin(1.0).cwiseMax(0.0);
  }
  return Box(lo, hi);
}

SpecObjective SpecObjective::logit_diff(Eigen::Index target, Eigen::Index true_label) {
  if (target == true_label) throw ValueError("logit difference needs two distinct classes");
  SpecObjective o;
  o.kind = Kind::logit_diff;
  o.target = target;
  o.true_label = true_label;
  return o;
}

SpecObjective SpecObjective::expected_softmax(Eigen::Index label) {
  SpecObjective o;
  o.kind = Kind::expected_softmax;
  o.target = label;
  o.true_label = label;
  return o;
}

Vec SpecObjective::coefficients(Eigen::Index classes) const {
  if (kind != Kind::logit_diff) throw UnsupportedCombination("softmax objective has no linear form");
  Vec c = Vec::Zero(classes);
  c(target) = 1.0;
  c(true_label) = -1.0;
  return c;
}

double SpecObjective::evaluate(const Vec& logits) const {
  if (kind == Kind::logit_diff) return logits(target) - logits(true_label);
  const double mx = logits.maxCoeff();
  const double den = (logits.array() - mx).exp().sum();
  return std::exp(logits(target) - mx) / den;
}

void VerificationProblem::validate() const {
  input.validate();
  if (input.center.size() != net.input_dim())
    throw ShapeError("input has " + std::to_string(input.center.size()) +
                     " entries, model expects " + std::to_string(net.input_dim()));
  const Eigen::Index l = net.output_dim();
  if (objective.target < 0 || objective.target >= l || objective.true_label < 0 ||
      objective.true_label >= l)
    throw ValueError("objective class index out of range");
  if (objective.kind == SpecObjective::Kind::expected_softmax &&
      !(threshold > 0.0 && threshold < 1.0))
    throw ValueError("p_max must lie in (0, 1)");
}

json VerificationProblem::to_json() const {
  json j;
  j["name"] = name;
  j["input_kind"] = input.kind == InputSet::Kind::box ? "box" : "subgaussian";
  j["center"] = hex_vector(input.center);
  j["epsilon"] = to_hex(input.epsilon);
  j["sigma"] = to_hex(input.sigma);
  j["clip"] = input.clip;
  j["objective"] = objective.kind == SpecObjective::Kind::logit_diff ? "logit_diff" : "expected_softmax";
  j["target"] = objective.target;
  j["true_label"] = objective.true_label;
  j["threshold"] = to_hex(threshold);
  return j;
}

const char* to_string(SpecConfig::Type t) {
  switch (t) {
    case SpecConfig::Type::adversarial: return "adversarial";
    case SpecConfig::Type::robust_ood: return "robust_ood";
    case SpecConfig::Type::dist_robust_ood: return "dist_robust_ood";
  }
  return "?";
}

SpecConfig parse_spec_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("spec config must be a JSON object");
  static const std::vector<std::string> known = {"type", "input", "epsilon", "sigma",
                                                 "true_label", "p_max", "clip"};
  for (const auto& [key, _] : doc.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown spec key '" + key + "'");
  SpecConfig c;
  try {
    const std::string type = doc.at("type").get<std::string>();
    if (type == "adversarial") c.type = SpecConfig::Type::adversarial;
    else if (type == "robust_ood") c.type = SpecConfig::Type::robust_ood;
    else if (type == "dist_robust_ood") c.type = SpecConfig::Type::dist_robust_ood;
    else throw ConfigError("unknown spec type '" + type + "'");
    c.input = vector_from_json(doc.at("input"));
    c.epsilon = real_from_json(doc.at("epsilon"));
    if (doc.contains("clip")) c.clip = doc.at("clip").get<bool>();
    switch (c.type) {
      case SpecConfig::Type::adversarial:
        c.true_label = doc.at("true_label").get<Eigen::Index>();
        break;
      case SpecConfig::Type::dist_robust_ood:
        c.sigma = real_from_json(doc.at("sigma"));
        [[fallthrough]];
      case SpecConfig::Type::robust_ood:
        c.p_max = real_from_json(doc.at("p_max"));
        break;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec config: ") + e.what());
  } catch (const SchemaError& e) {
    throw ConfigError(std::string("spec config: ") + e.what());
  }
  if (!(c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (c.type != SpecConfig::Type::adversarial && !(c.p_max > 0.0 && c.p_max < 1.0))
    throw ConfigError("p_max must lie in (0, 1)");
  if (c.type == SpecConfig::Type::dist_robust_ood && !(c.sigma >= 0.0))
    throw ConfigError("sigma must be nonnegative");
  return c;
}

SpecConfig load_spec_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spec file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("spec file " + path.string() + ": " + e.what());
  }
  return parse_spec_config(doc);
}

json spec_config_to_json(const SpecConfig& c) {
  json j;
  j["type"] = to_string(c.type);
  j["input"] = hex_vector(c.input);
  j["epsilon"] = to_hex(c.epsilon);
  j["clip"] = c.clip;
  if (c.type == SpecConfig::Type::adversarial) j["true_label"] = c.true_label;
  if (c.type != SpecConfig::Type::adversarial) j["p_max"] = to_hex(c.p_max);
  if (c.type == SpecConfig::Type::dist_robust_ood) j["sigma"] = to_hex(c.sigma);
  return j;
}

std::vector<VerificationProblem> build_problem(const CanonicalNetwork& net, const SpecConfig& config) {
  const Eigen::Index l = net.output_dim();
  if (config.input.size() != net.input_dim())
    throw ConfigError("spec input has " + std::to_string(config.input.size()) +
                      " entries, model expects " + std::to_string(net.input_dim()));
  std::vector<VerificationProblem> out;
  VerificationProblem base;
  base.net = net;
  try {
    base.input = config.type == SpecConfig::Type::dist_robust_ood
                     ? InputSet::subgaussian_noise(config.input, config.epsilon, config.sigma, config.clip)
                     : InputSet::box_of_deltas(config.input, config.epsilon, config.clip);
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
  switch (config.type) {
    case SpecConfig::Type::adversarial: {
      if (config.true_label < 0 || config.true_label >= l)
        throw ConfigError("true_label out of range");
      for (Eigen::Index j = 0; j < l; ++j) {
        if (j == config.true_label) continue;
        VerificationProblem p = base;
        p.objective = SpecObjective::logit_diff(j, config.true_label);
        p.threshold = 0.0;
        p.name = "target_" + std::to_string(j);
        out.push_back(std::move(p));
      }
      break;
    }
    case SpecConfig::Type::robust_ood:
    case SpecConfig::Type::dist_robust_ood: {
      for (Eigen::Index i = 0; i < l; ++i) {
        VerificationProblem p = base;
        p.objective = SpecObjective::expected_softmax(i);
        p.threshold = config.p_max;
        p.name = "label_" + std::to_string(i);
        out.push_back(std::move(p));
      }
      break;
    }
  }
  return out;
}

double pairwise_auc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw EmptyInput("AUC needs non-empty score sets");
  // rank-based: sort ood scores, count strictly smaller and equal entries per id score
  std::vector<double> ood = ood_scores;
  std::sort(ood.begin(), ood.end());
  double acc = 0.0;
  for (double s : id_scores) {
    const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
    const auto hi = std::upper_bound(ood.begin(), ood.end(), s);
    acc += static_cast<double>(lo - ood.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return acc / (static_cast<double>(id_scores.size()) * static_cast<double>(ood.size()));
}

double guaranteed_auc(const std::vector<double>& ood_upper_bounds, const std::vector<double>& id_scores) {
  return pairwise_auc(id_scores, ood_upper_bounds);
}

double adversarial_auc(const std::vector<double>& ood_attack_scores, const std::vector<double>& id_scores) {
  return pairwise_auc(id_scores, ood_attack_scores);
}

}  // namespace funlag
