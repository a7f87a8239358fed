#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "funlag/bounds.hpp"
#include "funlag/multiplier.hpp"
#include "funlag/qp_bound.hpp"

namespace funlag {

enum class SolveMode { exact, upper_bound, heuristic_lower };
const char* to_string(SolveMode m);

/// Outcome of one inner maximization.
///
/// internal_duals holds whatever scalar duals the construction used:
///   linexp transition: (log zeta, eta_1..eta_n)
///   softmax affine:    nu per grid cell
///   softmax quadratic: theta per grid cell
///   relu qcqp:         (rho, tau, omega, kappa)
struct InnerResult {
  double value = 0.0;
  std::optional<Vec> witness;
  SolveMode mode = SolveMode::exact;
  std::vector<double> internal_duals;
};

struct ScalarMax {
  double value = 0.0;
  double arg = 0.0;
};

// max over z in [l, u] of a * s(z) - b * z. Candidates {l, 0, u}; smallest wins ties,
// except that a == b == 0 reports the point of [l, u] nearest 0.
ScalarMax scalar_activation_linear_max(double a, double b, double l, double u, Activation s);

// max over x in box of E[theta_next^T (W s(x) + b)] - theta_k^T x.
InnerResult inner_linear(const CanonicalLayer& layer, const Vec& theta_k, const Vec& theta_next,
                         const Box& box);

// E over admissible noise of lambda_1(w (center + noise) + b), bounded through the
// sub-Gaussian mgf. The layer must be deterministic.
InnerResult inner_linexp_input(const Vec& center, double sigma, const CanonicalLayer& layer,
                               const Multiplier& lambda1);

// Same quantity for a point mass anywhere in a box: the linear and exponential
// parts are maximized separately (exact per part).
InnerResult inner_linexp_box_input(const CanonicalLayer& layer, const Multiplier& lambda1,
                                   const Box& box);

// max over x in box of beta^T E[W s(x) + b] - alpha^T x - exp(gamma^T x + kappa),
// bounded through its convex dual in (eta, zeta).
InnerResult inner_linexp_transition(const Multiplier& lambda_k, const Vec& beta,
                                    const CanonicalLayer& layer, const Box& box);
// Dual objective at fixed (zeta, eta); any zeta >= 0 and eta give a valid bound.
double linexp_transition_dual(const Multiplier& lambda_k, const Vec& beta,
                              const CanonicalLayer& layer, const Box& box, double zeta,
                              const Vec& eta);

// max over x in box of (c - theta)^T x.
InnerResult final_linear(const Vec& c, const Vec& theta, const Box& box);

// Stable softmax component m.
double softmax_component(const Vec& x, Eigen::Index m);

// Candidates for f(x) = exp(x_i) / (sum_j exp(x_j) + C) + lambda^T x.
std::vector<Vec> stationary_points_case_a(const Vec& lambda, Eigen::Index i, double C);
// Candidates for f(x) = D / (sum_j exp(x_j) + C) + lambda^T x.
std::vector<Vec> stationary_points_case_b(const Vec& lambda, double C, double D);

// Exact max over the box of softmax_m(x) + coef^T x by enumerating 3^n faces.
InnerResult final_softmax_exact(Eigen::Index m, const Vec& coef, const Box& box, int cap = 12);

// Box minimum and maximum of softmax_m.
Interval softmax_range(Eigen::Index m, const Box& box);
std::vector<double> uniform_grid(double t1, double tN, int n);

// Upper bound on max softmax_m(x) + coef^T x via a partition of the softmax value.
InnerResult final_softmax_affine_bound(Eigen::Index m, const Vec& coef, const Box& box,
                                       const std::vector<double>& grid,
                                       std::span<const double> warm = {});
// Upper bound on max coef^T x over box with t * sum_j exp(x_j - x_m) <= 1, for fixed nu >= 0.
double softmax_affine_cell_bound(Eigen::Index m, const Vec& coef, const Box& box, double t,
                                 double nu);

// Upper bound on max mu^T softmax(x) - alpha^T x - beta^T x^2.
InnerResult final_softmax_quadratic_bound(const Vec& mu, const Vec& alpha, const Vec& beta,
                                          const Box& box, const std::vector<double>& grid,
                                          std::span<const double> warm = {});
double softmax_quadratic_cell_bound(const Vec& mu, const Vec& alpha, const Vec& beta,
                                    const Box& box, double t_lo, double t_hi, double theta);
// Certified max over z in [l, u] of a exp(z) - alpha z - beta z^2.
double exp_quadratic_max(double a, double alpha, double beta, double l, double u);

struct SmoothObjective {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

struct AscentOptions {
  int steps = 500;
  double step = 0.01;
  int starts = 5;
};

// Projected gradient ascent from several starts; a lower bound only.
InnerResult heuristic_inner_max(const SmoothObjective& f, const Box& box, std::uint64_t seed,
                                const std::vector<Vec>& extra_starts = {},
                                const AscentOptions& options = {});

}  // namespace funlag
