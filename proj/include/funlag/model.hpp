#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace funlag {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { identity, relu };

const char* to_string(Activation s);
Activation activation_from_string(const std::string& name);

inline double apply_activation(Activation s, double z) {
  return s == Activation::relu ? (z > 0.0 ? z : 0.0) : z;
}
Vec apply_activation(Activation s, const Vec& x);

// Entrywise-independent distribution over a weight matrix (or a bias stored
// as an out x 1 matrix).
struct WeightDistribution {
  enum class Kind { deterministic, gaussian, dropout };

  Kind kind = Kind::deterministic;
  Mat values;  // deterministic value, gaussian mean, or dropout value
  Mat stddev;  // gaussian only
  Mat keep;    // dropout only; keep probability of each entry
  double truncation = 3.0;  // gaussian only; samples live in mean +- k*stddev

  static WeightDistribution deterministic(Mat values);
  static WeightDistribution gaussian(Mat mean, Mat stddev, double truncation = 3.0);
  static WeightDistribution dropout(Mat values, Mat keep);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  Mat mean() const;
  // Untruncated variance: sigma^2 for gaussian, v^2 p (1-p) for dropout.
  Mat variance() const;
  bool is_random() const;

  // Throws ValueError / ShapeError on violated invariants.
  void validate(const std::string& where) const;
};

struct CanonicalLayer {
  Activation activation = Activation::identity;
  WeightDistribution weights;  // out x in
  WeightDistribution bias;     // out x 1

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
  bool is_deterministic() const { return !weights.is_random() && !bias.is_random(); }
};

/// Feed-forward network in "activation then affine" form: layer k maps x_k to
/// x_{k+1} = W_k s_k(x_k) + b_k. Layer 0 always uses the identity activation.
class CanonicalNetwork {
 public:
  CanonicalNetwork() = default;
  explicit CanonicalNetwork(std::vector<CanonicalLayer> layers);

  const std::vector<CanonicalLayer>& layers() const { return layers_; }
  const CanonicalLayer& layer(std::size_t k) const { return layers_.at(k); }
  std::size_t num_layers() const { return layers_.size(); }
  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }
  // Widths n_0..n_K of the activation spaces x_0..x_K.
  std::vector<Eigen::Index> widths() const;
  bool is_deterministic() const;

 private:
  std::vector<CanonicalLayer> layers_;
};

// Descriptor list as found in conventional "affine, activation, affine"
// layer stacks.
struct RawLayer {
  enum class Kind { affine, activation };
  Kind kind = Kind::affine;
  WeightDistribution weights;
  WeightDistribution bias;
  Activation activation = Activation::identity;

  static RawLayer affine(WeightDistribution w, WeightDistribution b);
  static RawLayer act(Activation s);
};

CanonicalNetwork normalize_layers(const std::vector<RawLayer>& raw);
std::vector<RawLayer> to_raw_layers(const CanonicalNetwork& net);

CanonicalNetwork parse_model(const nlohmann::json& doc);
CanonicalNetwork load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const CanonicalNetwork& net);

// Draws one realization of the layer's weights.
struct SampledLayer {
  Mat weights;
  Vec bias;
};
SampledLayer sample_layer(const CanonicalLayer& layer, std::mt19937_64& rng);
double sample_entry(const WeightDistribution& w, Eigen::Index i, Eigen::Index j,
                    std::mt19937_64& rng);

Vec forward_sample(const CanonicalNetwork& net, const Vec& x, std::uint64_t seed);
Vec forward_sample(const CanonicalNetwork& net, const Vec& x, std::mt19937_64& rng);
// Forward pass with every weight at its mean.
Vec forward_mean(const CanonicalNetwork& net, const Vec& x);

struct SoftmaxEstimate {
  Vec probabilities;
  Vec standard_error;
};
SoftmaxEstimate mean_softmax_estimate(const CanonicalNetwork& net, const Vec& x, int n_samples,
                                      std::uint64_t seed);

Vec softmax(const Vec& logits);

}  // namespace funlag
