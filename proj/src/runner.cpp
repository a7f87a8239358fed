#include "funlag/runner.hpp"

#include <fstream>
#include <limits>

#include "funlag/errors.hpp"
#include "funlag/hexfloat.hpp"
#include "funlag/parallel.hpp"

namespace funlag {

using nlohmann::json;

void RunConfig::validate() const {
  if (steps < 0) throw ConfigError("--steps must be nonnegative");
  if (!(lr > 0.0)) throw ConfigError("--lr must be positive");
  if (decay_every < 1) throw ConfigError("--decay-every must be positive");
  if (certify_every < 1) throw ConfigError("--certify-every must be positive");
  if (grid_n < 2) throw ConfigError("--grid-n must be at least 2");
  if (exact_cap < 1) throw ConfigError("--exact-cap must be positive");
  if (threads < 1) throw ConfigError("--threads must be positive");
  if (attack_samples < 0) throw ConfigError("--attack-samples must be nonnegative");
}

OptimizeConfig RunConfig::optimize_config() const {
  OptimizeConfig c;
  c.steps = steps;
  c.lr = lr;
  c.decay_every = decay_every;
  c.certify_every = certify_every;
  c.seed = seed;
  c.dual.grid_n = grid_n;
  c.dual.exact_cap = exact_cap;
  return c;
}

json merge_certificates(const std::vector<json>& certs) {
  if (certs.empty()) throw EmptyInput("no certificates to merge");
  if (certs.size() == 1) return certs.front();
  std::size_t worst = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();
  bool all = true;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const double margin = real_from_json(certs[i].at("bound")) - real_from_json(certs[i].at("threshold"));
    if (margin > worst_margin) {
      worst_margin = margin;
      worst = i;
    }
    all = all && certs[i].at("verified").get<bool>();
  }
  json top = certs[worst];
  top["verified"] = all;
  top["subproblems"] = certs;
  // the per-sample attack score is the largest one over subproblems
  std::optional<double> attack;
  for (const auto& c : certs)
    if (c.contains("metadata") && c["metadata"].contains("attack_score")) {
      const double a = real_from_json(c["metadata"]["attack_score"]);
      attack = attack ? std::max(*attack, a) : a;
    }
  if (attack) top["metadata"]["attack_score"] = to_hex(*attack);
  return top;
}

RunResult run_verification(const CanonicalNetwork& net, const SpecConfig& spec, const RunConfig& config) {
  config.validate();
  if (spec.type == SpecConfig::Type::dist_robust_ood && config.family != Family::linexp)
    throw ConfigError("dist_robust_ood specs need --family linexp");
  const std::vector<VerificationProblem> problems = build_problem(net, spec);
  OptimizeConfig oc = config.optimize_config();
  // parallelize across subproblems when there are several, else across layers
  const int outer = problems.size() > 1 ? config.threads : 1;
  oc.dual.threads = problems.size() > 1 ? 1 : config.threads;

  std::vector<json> certs(problems.size());
  parallel_for(problems.size(), outer, [&](std::size_t i) {
    Certificate c = optimize(problems[i], config.family, oc);
    json j = c.to_json();
    if (config.attack_samples > 0) {
      SampleOptions so;
      so.n_inputs = config.attack_samples;
      const SampledValue s = sample_lower_bound(problems[i], so, mix_seed(config.seed, 0xa77ac4 + i));
      j["metadata"]["attack_score"] = to_hex(s.value);
    }
    certs[i] = std::move(j);
  });

  RunResult r;
  r.certificate = merge_certificates(certs);
  r.verified = r.certificate.at("verified").get<bool>();
  r.bound = real_from_json(r.certificate.at("bound"));
  r.threshold = real_from_json(r.certificate.at("threshold"));
  r.subproblems = problems.size();
  return r;
}

std::vector<double> load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open score file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("score file " + path.string() + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("scores")) doc = doc["scores"];
  if (!doc.is_array()) throw SchemaError("score file must hold an array of reals or {\"scores\": [...]}");
  std::vector<double> out;
  for (const auto& v : doc) out.push_back(real_from_json(v));
  if (out.empty()) throw EmptyInput("score file " + path.string() + " is empty");
  return out;
}

AucReport auc_from_certificates(const std::vector<double>& id_scores, const std::vector<json>& certificates) {
  if (certificates.empty()) throw EmptyInput("no OOD certificates");
  std::vector<double> bounds, attacks;
  bool have_attacks = true;
  for (const auto& c : certificates) {
    if (!c.is_object() || !c.contains("bound")) throw SchemaError("certificate without a bound");
    bounds.push_back(real_from_json(c.at("bound")));
    if (c.contains("metadata") && c["metadata"].contains("attack_score"))
      attacks.push_back(real_from_json(c["metadata"]["attack_score"]));
    else
      have_attacks = false;
  }
  AucReport r;
  r.gauc = guaranteed_auc(bounds, id_scores);
  if (have_attacks) r.aauc = adversarial_auc(attacks, id_scores);
  r.n_id = id_scores.size();
  r.n_ood = bounds.size();
  return r;
}

json bounds_json(const LayerBounds& bounds) {
  json layers = json::array();
  for (const auto& b : bounds.boxes) {
    json pairs = json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) pairs.push_back(json::array({b.lo(i), b.hi(i)}));
    layers.push_back(std::move(pairs));
  }
  return {{"layers", layers}};
}

}  // namespace funlag
