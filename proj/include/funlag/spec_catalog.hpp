#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "funlag/bounds.hpp"
#include "funlag/model.hpp"

namespace funlag {

/// Admissible input distributions.
///   box:         any point mass in [center - eps, center + eps]
///   subgaussian: center plus zero-mean noise supported in the same box with
///                sub-Gaussian parameter sigma
struct InputSet {
  enum class Kind { box, subgaussian };

  Kind kind = Kind::box;
  Vec center;
  double epsilon = 0.0;
  double sigma = 0.0;
  bool clip = true;  // intersect the support with [0, 1]

  static InputSet box_of_deltas(Vec center, double epsilon, bool clip = true);
  static InputSet subgaussian_noise(Vec center, double epsilon, double sigma, bool clip = true);

  Box support() const;
  void validate() const;
};

struct SpecObjective {
  enum class Kind { logit_diff, expected_softmax };

  Kind kind = Kind::logit_diff;
  Eigen::Index target = 0;      // j in y_j - y_i, or the softmax label
  Eigen::Index true_label = 0;  // i in y_j - y_i

  static SpecObjective logit_diff(Eigen::Index target, Eigen::Index true_label);
  static SpecObjective expected_softmax(Eigen::Index label);

  bool is_linear() const { return kind == Kind::logit_diff; }
  // c with psi(y) = c^T y (logit_diff only).
  Vec coefficients(Eigen::Index classes) const;
  // psi for one realization of the logits.
  double evaluate(const Vec& logits) const;
};

struct VerificationProblem {
  CanonicalNetwork net;
  InputSet input;
  SpecObjective objective;
  double threshold = 0.0;
  std::string name;

  void validate() const;
  nlohmann::json to_json() const;  // without the network
};

struct SpecConfig {
  enum class Type { adversarial, robust_ood, dist_robust_ood };

  Type type = Type::adversarial;
  Vec input;
  double epsilon = 0.0;
  double sigma = 0.0;
  Eigen::Index true_label = -1;
  double p_max = 0.0;
  bool clip = true;
};

const char* to_string(SpecConfig::Type t);
SpecConfig parse_spec_config(const nlohmann::json& doc);
SpecConfig load_spec_config(const std::filesystem::path& path);
nlohmann::json spec_config_to_json(const SpecConfig& c);

// One problem per target class (adversarial) or per label (OOD variants).
std::vector<VerificationProblem> build_problem(const CanonicalNetwork& net, const SpecConfig& config);

// Mann-Whitney statistic: pairs with id > ood count 1, ties count 1/2.
double pairwise_auc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);
double guaranteed_auc(const std::vector<double>& ood_upper_bounds,
                      const std::vector<double>& id_scores);
double adversarial_auc(const std::vector<double>& ood_attack_scores,
                       const std::vector<double>& id_scores);

}  // namespace funlag
