#include "funlag/oracle.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "funlag/errors.hpp"

namespace funlag {

GridResult grid_maximize(const std::function<double(const Vec&)>& f, const GridSpec& grid,
                         double lipschitz) {
  const Eigen::Index d = grid.box.size();
  if (static_cast<Eigen::Index>(grid.resolution.size()) != d)
    throw ShapeError("grid resolution does not match the box dimension");
  double total = 1.0;
  for (int r : grid.resolution) {
    if (r < 2) throw ValueError("grid resolution must be at least 2");
    total *= r;
  }
  if (total > 1e7) throw BudgetExceeded("grid has more than 1e7 points");

  Vec step(d);
  for (Eigen::Index i = 0; i < d; ++i)
    step(i) = (grid.box.hi(i) - grid.box.lo(i)) / (grid.resolution[static_cast<std::size_t>(i)] - 1);

  GridResult out;
  out.value = -std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Vec x = grid.box.lo;
  const auto n = static_cast<long long>(total);
  for (long long c = 0; c < n; ++c) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const int r = grid.resolution[static_cast<std::size_t>(i)];
      const int k = idx[static_cast<std::size_t>(i)];
      x(i) = k == r - 1 ? grid.box.hi(i) : grid.box.lo(i) + k * step(i);
    }
    const double v = f(x);
    if (v > out.value) {
      out.value = v;
      out.argmax = x;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
      auto& k = idx[static_cast<std::size_t>(i)];
      if (++k < grid.resolution[static_cast<std::size_t>(i)]) break;
      k = 0;
    }
  }
  out.error_bound = 0.5 * lipschitz * step.norm();
  return out;
}

namespace {

double draw(const WeightDistribution& w, Eigen::Index i, Eigen::Index j, std::mt19937_64& rng,
            bool truncated) {
  if (w.kind == WeightDistribution::Kind::gaussian && !truncated) {
    std::normal_distribution<double> n(0.0, 1.0);
    return w.values(i, j) + w.stddev(i, j) * n(rng);
  }
  return sample_entry(w, i, j, rng);
}

}  // namespace

McResult mc_expectation(const CanonicalLayer& layer, const Multiplier& lambda, const Vec& x, int n,
                        std::uint64_t seed, bool truncated) {
  if (n < 1) throw ValueError("need at least one sample");
  const Vec s = apply_activation(layer.activation, x);
  if (layer.is_deterministic()) {
    const Vec y = layer.weights.values * s + layer.bias.values.col(0);
    return {lambda.eval(y), 0.0};
  }
  std::mt19937_64 rng(seed);
  const Eigen::Index out = layer.out_dim(), in = layer.in_dim();
  double sum = 0.0, sq = 0.0;
  Vec y(out);
  for (int t = 0; t < n; ++t) {
    for (Eigen::Index i = 0; i < out; ++i) {
      double acc = draw(layer.bias, i, 0, rng, truncated);
      for (Eigen::Index j = 0; j < in; ++j) acc += draw(layer.weights, i, j, rng, truncated) * s(j);
      y(i) = acc;
    }
    const double v = lambda.eval(y);
    sum += v;
    sq += v * v;
  }
  McResult r;
  r.mean = sum / n;
  if (n > 1) r.standard_error = std::sqrt(std::max(0.0, (sq - n * r.mean * r.mean) / (n - 1.0)) / n);
  return r;
}

namespace {

WeightDistribution random_weights(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                  double scale, int kind) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat v(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = scale * normal(rng);
  if (kind == 1) {
    Mat sd(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) sd(i, j) = 0.2 * scale * unif(rng);
    return WeightDistribution::gaussian(v, sd, 3.0);
  }
  if (kind == 2) {
    Mat keep(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) keep(i, j) = 0.5 + 0.5 * unif(rng);
    return WeightDistribution::dropout(v, keep);
  }
  return WeightDistribution::deterministic(v);
}

}  // namespace

VerificationProblem random_problem(std::uint64_t seed, const RandomProblemOptions& options) {
  std::mt19937_64 rng(seed);
  auto uni_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int K = uni_int(1, options.max_layers);
  const int classes = uni_int(2, options.max_classes);
  std::vector<Eigen::Index> widths;
  widths.push_back(uni_int(1, options.max_width));
  for (int k = 1; k < K; ++k) widths.push_back(uni_int(1, options.max_width));
  widths.push_back(classes);

  InputSet::Kind input_kind = options.input ? *options.input
                                            : (unif(rng) < 0.5 ? InputSet::Kind::box : InputSet::Kind::subgaussian);
  SpecObjective::Kind obj_kind = options.objective
                                     ? *options.objective
                                     : (unif(rng) < 0.5 ? SpecObjective::Kind::logit_diff
                                                        : SpecObjective::Kind::expected_softmax);

  std::vector<CanonicalLayer> layers;
  for (int k = 0; k < K; ++k) {
    CanonicalLayer L;
    L.activation = (k == 0 || options.affine_only) ? Activation::identity : Activation::relu;
    int kind = 0;
    const bool may_randomize = options.allow_stochastic && !options.affine_only &&
                               !(k == 0 && input_kind == InputSet::Kind::subgaussian);
    if (may_randomize) kind = uni_int(0, 2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(widths[static_cast<std::size_t>(k)]));
    L.weights = random_weights(rng, widths[static_cast<std::size_t>(k) + 1],
                               widths[static_cast<std::size_t>(k)], scale, kind);
    L.bias = random_weights(rng, widths[static_cast<std::size_t>(k) + 1], 1, 0.1, kind);
    layers.push_back(std::move(L));
  }

  VerificationProblem p;
  p.net = CanonicalNetwork(std::move(layers));
  Vec center(widths.front());
  for (Eigen::Index i = 0; i < center.size(); ++i) center(i) = 0.2 + 0.6 * unif(rng);
  const double eps = 0.01 + 0.09 * unif(rng);
  if (input_kind == InputSet::Kind::box) {
    p.input = InputSet::box_of_deltas(center, eps, true);
  } else {
    p.input = InputSet::subgaussian_noise(center, eps, 0.1 * unif(rng), true);
  }
  if (obj_kind == SpecObjective::Kind::logit_diff) {
    const int i = uni_int(0, classes - 1);
    int j = uni_int(0, classes - 2);
    if (j >= i) ++j;
    p.objective = SpecObjective::logit_diff(j, i);
    p.threshold = 0.0;
  } else {
    p.objective = SpecObjective::expected_softmax(uni_int(0, classes - 1));
    p.threshold = 0.5;
  }
  p.name = "random_" + std::to_string(seed);
  p.validate();
  return p;
}

}  // namespace funlag
