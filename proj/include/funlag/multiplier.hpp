#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "funlag/model.hpp"

namespace funlag {

enum class Family { zero, linear, linexp, quadratic, diag_quadratic };

const char* to_string(Family f);
Family family_from_string(const std::string& name);

/// Functional multiplier lambda(x) attached to one activation space.
///
/// Every family carries a linear part `lin`:
///   zero:           0
///   linear:         lin^T x
///   linexp:         lin^T x + exp(gamma^T x + kappa)
///   quadratic:      lin^T x + 1/2 x^T Q x
///   diag_quadratic: lin^T x + beta^T (x * x)
/// The same struct doubles as a gradient record over the parameters.
struct Multiplier {
  Family family = Family::zero;
  Vec lin;
  Vec gamma;
  double kappa = 0.0;
  Mat Q;
  Vec beta;

  static Multiplier zero(Eigen::Index n);
  static Multiplier linear(Vec theta);
  static Multiplier linexp(Vec alpha, Vec gamma, double kappa);
  static Multiplier quadratic(Mat Q, Vec q);
  static Multiplier diag_quadratic(Vec alpha, Vec beta);

  Eigen::Index dim() const { return lin.size(); }

  double eval(const Vec& x) const;
  Vec grad_x(const Vec& x) const;

  // Same family and shape with every parameter set to zero.
  Multiplier zeros_like() const;
  // Gradient of eval(x) with respect to the parameters.
  Multiplier param_gradient(const Vec& x) const;

  std::size_t num_params() const;
  void pack(std::vector<double>& out) const;
  // Reads num_params() values; returns the number consumed.
  std::size_t unpack(std::span<const double> in);
  void add_scaled(const Multiplier& other, double c);

  // Linear and Zero promoted to the quadratic form with Q = 0;
  // diag_quadratic promoted with Q = 2 diag(beta).
  Multiplier as_quadratic() const;
  bool has_quadratic_part() const;
};

/// lambda_1..lambda_K. Index k in 1..K; lambda_0 = lambda_{K+1} = Zero.
struct MultiplierStack {
  std::vector<Multiplier> lambdas;

  std::size_t depth() const { return lambdas.size(); }
  const Multiplier& at(std::size_t k) const { return lambdas.at(k - 1); }
  Multiplier& at(std::size_t k) { return lambdas.at(k - 1); }

  std::vector<double> pack() const;
  void unpack(std::span<const double> in);
  MultiplierStack zeros_like() const;
  void add_scaled(const MultiplierStack& other, double c);
};

enum class InitStrategy { zeros, noise };

struct InitOptions {
  InitStrategy strategy = InitStrategy::zeros;
  double noise_scale = 0.01;
  double linexp_kappa = -10.0;
  std::uint64_t seed = 0;
};

// families[k-1] is the family of lambda_k; widths are n_0..n_K.
MultiplierStack init_stack(const std::vector<Family>& families,
                           const std::vector<Eigen::Index>& widths, const InitOptions& options);

/// First and second moments of y = W s(x) + b for one layer.
struct LayerMoments {
  Vec mean;
  Vec variance;
};
LayerMoments layer_moments(const CanonicalLayer& layer, const Vec& x);

double log_mgf(const WeightDistribution& w, Eigen::Index i, Eigen::Index j, double t);
double log_mgf_derivative(const WeightDistribution& w, Eigen::Index i, Eigen::Index j, double t);

// log E[exp(gamma^T (W s + b))] for activations s = s(x).
double log_mgf_of_output(const CanonicalLayer& layer, const Vec& activated, const Vec& gamma);

/// E_{W,b}[lambda_next(W s(x) + b)] in closed form.
double expected_under_layer(const Multiplier& lambda_next, const CanonicalLayer& layer, const Vec& x);
/// Gradient of expected_under_layer with respect to lambda_next's parameters.
Multiplier expected_param_gradient(const Multiplier& lambda_next, const CanonicalLayer& layer,
                                   const Vec& x);
/// Gradient of expected_under_layer with respect to the layer input x.
Vec expected_grad_x(const Multiplier& lambda_next, const CanonicalLayer& layer, const Vec& x);

/// E_{W,b}[lambda(W z + b)] = 1/2 z^T A z + a^T z + c for a quadratic-type lambda.
struct QuadraticForm {
  Mat A;
  Vec a;
  double c = 0.0;

  double eval(const Vec& z) const { return 0.5 * z.dot(A * z) + a.dot(z) + c; }
};
QuadraticForm expected_quadratic_form(const Multiplier& lambda_next, const CanonicalLayer& layer);

nlohmann::json multiplier_to_json(const Multiplier& m);
Multiplier multiplier_from_json(const nlohmann::json& j);
nlohmann::json stack_to_json(const MultiplierStack& s);
MultiplierStack stack_from_json(const nlohmann::json& j);

}  // namespace funlag
