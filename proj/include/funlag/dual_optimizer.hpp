#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "funlag/bounds.hpp"
#include "funlag/inner_solvers.hpp"
#include "funlag/multiplier.hpp"
#include "funlag/spec_catalog.hpp"

namespace funlag {

enum class EvalMode { train, certify };

struct DualOptions {
  int grid_n = 20;           // softmax partition size
  int exact_cap = 12;        // largest class count for exhaustive softmax
  int train_exact_cap = 6;   // same, for train-mode evaluations
  int threads = 1;
  QcqpOptions qcqp;
  AscentOptions ascent;
};

/// Internal duals carried between evaluations, one slot per term g_0..g_K.
struct DualState {
  std::vector<std::vector<double>> duals;
};

struct DualEvaluation {
  EvalMode mode = EvalMode::certify;
  std::vector<double> values;  // g_0..g_K
  double total = 0.0;
  std::vector<InnerResult> results;
};

LayerBounds problem_bounds(const VerificationProblem& problem);

// The K+1 terms of the dual; certify mode only uses sound solvers. When
// `gradient` is given, it receives the envelope gradient of the train-mode value.
DualEvaluation evaluate_dual(const VerificationProblem& problem, const MultiplierStack& stack,
                             const LayerBounds& bounds, EvalMode mode,
                             const DualOptions& options = {}, DualState* state = nullptr,
                             std::uint64_t seed = 0, MultiplierStack* gradient = nullptr);

MultiplierStack subgradient(const VerificationProblem& problem, const MultiplierStack& stack,
                            const LayerBounds& bounds, std::uint64_t seed,
                            const DualOptions& options = {}, DualState* state = nullptr);

// Multiplier families for one run: linear everywhere; linexp on lambda_1 and
// linear elsewhere; or quadratic everywhere (diagonal on lambda_K for softmax).
// Noise inputs have no quadratic lambda_1 solver, so lambda_1 stays linear there.
std::vector<Family> family_layout(Family choice, std::size_t depth, const SpecObjective& objective,
                                  InputSet::Kind input = InputSet::Kind::box);

struct OptimizeConfig {
  int steps = 1000;
  double lr = 1e-3;
  int decay_every = 250;
  double decay_factor = 0.1;
  int certify_every = 50;
  std::uint64_t seed = 0;
  bool early_stop = true;
  DualOptions dual;
  InitOptions init;
};

struct TraceEntry {
  int step = 0;
  double train_value = 0.0;
  std::optional<double> certified_value;
};

struct Certificate {
  std::string problem_name;
  double bound = 0.0;  // best certified value
  double threshold = 0.0;
  bool verified = false;
  double last_certified = 0.0;  // value at the final iterate
  std::vector<TraceEntry> trace;
  MultiplierStack multipliers;  // stack attaining `bound`
  nlohmann::json metadata;
  nlohmann::json fingerprint;

  nlohmann::json to_json() const;
  static Certificate from_json(const nlohmann::json& j);
};

Certificate optimize(const VerificationProblem& problem, Family family, const OptimizeConfig& config);
Certificate optimize(const VerificationProblem& problem, MultiplierStack initial,
                     const OptimizeConfig& config, const std::string& family_name = "custom");

// Closed-form optimal multipliers for an affine network and linear objective.
MultiplierStack lambda_star_affine(const CanonicalNetwork& net, const Vec& c);

struct SampleOptions {
  int n_inputs = 5000;
  int hill_steps = 100;
  int screen_samples = 16;     // weight draws per candidate while screening
  int weight_samples = 1000;   // weight draws for the final estimates
  int refine_top = 5;
};

struct SampledValue {
  double value = 0.0;
  double standard_error = 0.0;
  Vec input;
};

// Objective of one input (Monte Carlo over weights for stochastic nets).
SampledValue estimate_objective(const VerificationProblem& problem, const Vec& x, int samples,
                                std::uint64_t seed);
// Heuristic lower bound on the specification optimum; never a certificate.
SampledValue sample_lower_bound(const VerificationProblem& problem, const SampleOptions& options,
                                std::uint64_t seed);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t fnv1a64(const std::string& data);

}  // namespace funlag
