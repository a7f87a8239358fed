#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "funlag/dual_optimizer.hpp"

namespace funlag {

struct RunConfig {
  std::filesystem::path model;
  std::filesystem::path spec;
  std::filesystem::path out = "certificate.json";
  Family family = Family::linear;
  int steps = 1000;
  double lr = 1e-3;
  int decay_every = 250;
  int certify_every = 50;
  int grid_n = 20;
  int exact_cap = 12;
  std::uint64_t seed = 0;
  int threads = 1;
  int attack_samples = 0;  // > 0 adds a sampled attack score to the metadata

  void validate() const;
  OptimizeConfig optimize_config() const;
};

struct RunResult {
  nlohmann::json certificate;
  bool verified = false;
  double bound = 0.0;
  double threshold = 0.0;
  std::size_t subproblems = 0;
};

// Builds every subproblem of the spec, optimizes each, and merges the results.
RunResult run_verification(const CanonicalNetwork& net, const SpecConfig& spec, const RunConfig& config);

// Single certificate when there is one problem; otherwise the worst subproblem's
// fields at top level plus a "subproblems" array.
nlohmann::json merge_certificates(const std::vector<nlohmann::json>& certs);

struct AucReport {
  double gauc = 0.0;
  std::optional<double> aauc;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

std::vector<double> load_scores(const std::filesystem::path& path);
AucReport auc_from_certificates(const std::vector<double>& id_scores,
                                const std::vector<nlohmann::json>& certificates);

nlohmann::json bounds_json(const LayerBounds& bounds);

}  // namespace funlag
