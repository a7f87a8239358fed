#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "funlag/bounds.hpp"
#include "funlag/multiplier.hpp"
#include "funlag/spec_catalog.hpp"

namespace funlag {

struct GridSpec {
  std::vector<int> resolution;  // points per dimension, each >= 2
  Box box;
};

struct GridResult {
  double value = 0.0;
  Vec argmax;
  double error_bound = 0.0;  // lipschitz * cell diameter / 2
};

// Dense grid search; throws BudgetExceeded beyond 1e7 points.
GridResult grid_maximize(const std::function<double(const Vec&)>& f, const GridSpec& grid,
                         double lipschitz = 0.0);

struct McResult {
  double mean = 0.0;
  double standard_error = 0.0;
};

// Sample mean of lambda(W s(x) + b) over weight draws. Gaussian weights are
// drawn without truncation unless `truncated` is set.
McResult mc_expectation(const CanonicalLayer& layer, const Multiplier& lambda, const Vec& x, int n,
                        std::uint64_t seed, bool truncated = false);

struct RandomProblemOptions {
  int max_layers = 3;
  int max_width = 6;
  int max_classes = 4;
  bool allow_stochastic = true;
  bool affine_only = false;  // identity activations, deterministic weights
  std::optional<SpecObjective::Kind> objective;
  std::optional<InputSet::Kind> input;
};

VerificationProblem random_problem(std::uint64_t seed, const RandomProblemOptions& options = {});

}  // namespace funlag
