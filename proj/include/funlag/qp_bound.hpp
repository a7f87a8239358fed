#pragma once

#include <span>
#include <vector>

#include "funlag/bounds.hpp"
#include "funlag/model.hpp"

namespace funlag {

double gershgorin_upper(const Mat& A);
double gershgorin_lower(const Mat& A);

struct EigenEstimate {
  double value = 0.0;  // Rayleigh quotient, or a certified upper bound
  Vec vector;          // unit vector
  bool converged = false;
  int iterations = 0;
};

// Power iteration on A shifted by its Gershgorin lower bound. `start` may be
// empty, in which case a fixed deterministic start vector is used.
EigenEstimate power_iteration(const Mat& A, const Vec& start = Vec(), int max_iter = 500,
                              double tol = 1e-7);

// Upper bound on lambda_max(A) for symmetric A. The power-iteration estimate is
// inflated until (value * I - A) admits a Cholesky factorization, and never
// exceeds the Gershgorin bound.
EigenEstimate certified_lambda_max(const Mat& A, const Vec& start = Vec());

/// f(z) = c0 + g^T z + 1/2 z^T H z on z in [-1, 1]^n.
struct BoxQuadratic {
  double c0 = 0.0;
  Vec g;
  Mat H;

  Eigen::Index size() const { return g.size(); }
  double eval(const Vec& z) const { return c0 + g.dot(z) + 0.5 * z.dot(H * z); }
  Mat bordered() const;  // [[0, g^T], [g, H]]
};

struct ShiftBound {
  double value = 0.0;
  double lambda = 0.0;  // lambda_max(M - diag(kappa)) (estimate or certified)
  Vec eigvec;           // size n + 1
};

// c0 + 1/2 sum_i max(kappa_i + max(lambda, 0), 0), lambda = lambda_max(M - diag kappa),
// with M = bordered() and kappa of size n + 1.
ShiftBound diagonal_shift_bound(const BoxQuadratic& f, const Vec& kappa, bool certified,
                                const Vec& warm = Vec());
// kappa with M - diag(kappa) negative semidefinite by diagonal dominance.
Vec gershgorin_shift(const BoxQuadratic& f);

/// max over x in box of 1/2 s^T A s + a^T s - 1/2 x^T B x - b^T x + c, s = act(x).
struct ReluQuadraticProblem {
  Activation activation = Activation::identity;
  Mat A;
  Vec a;
  Mat B;
  Vec b;
  double c = 0.0;
  Box box;

  Eigen::Index size() const { return box.size(); }
  double eval(const Vec& x) const;
  Vec gradient(const Vec& x) const;
};

// Exact per-coordinate maxima of the diagonal terms plus interval bounds on
// the cross terms.
double separable_bound(const ReluQuadraticProblem& p);

struct QcqpOptions {
  int iterations = 200;
  double lr = 0.02;  // relative to the problem scale
};

struct QcqpResult {
  double value = 0.0;            // certified upper bound
  double eigen_value = 0.0;      // eigenvalue-relaxation part
  double separable_value = 0.0;  // separable part
  std::vector<double> duals;     // (rho, tau, omega, kappa)
};

// Sound bound via the lifted (x, y = relu(x)) relaxation. `warm` holds duals
// from an earlier call on a problem of the same structure.
QcqpResult relu_qcqp_bound(const ReluQuadraticProblem& p, const QcqpOptions& options = {},
                           std::span<const double> warm = {});
// Certified bound at fixed duals (rho and tau are clamped to be nonnegative).
double relu_qcqp_bound_at(const ReluQuadraticProblem& p, std::span<const double> duals);
std::size_t relu_qcqp_num_duals(const ReluQuadraticProblem& p);

}  // namespace funlag
