#include "funlag/inner_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "funlag/errors.hpp"
#include "funlag/optim.hpp"

namespace funlag {

const char* to_string(SolveMode m) {
  switch (m) {
    case SolveMode::exact: return "exact";
    case SolveMode::upper_bound: return "upper_bound";
    case SolveMode::heuristic_lower: return "heuristic_lower";
  }
  return "?";
}

ScalarMax scalar_activation_linear_max(double a, double b, double l, double u, Activation s) {
  // flat objective: every point is a maximizer, take the one nearest 0
  if (a == 0.0 && b == 0.0) return {0.0, std::clamp(0.0, l, u)};
  double cand[3] = {l, l, l};
  int nc = 0;
  cand[nc++] = l;
  if (s == Activation::relu && l < 0.0 && 0.0 < u) cand[nc++] = 0.0;
  if (u != l) cand[nc++] = u;
  ScalarMax best{-std::numeric_limits<double>::infinity(), l};
  for (int k = 0; k < nc; ++k) {
    const double z = cand[k];
    const double v = a * apply_activation(s, z) - b * z;
    if (v > best.value) best = {v, z};
  }
  return best;
}

InnerResult inner_linear(const CanonicalLayer& layer, const Vec& theta_k, const Vec& theta_next,
                         const Box& box) {
  const Vec w = layer.weights.mean().transpose() * theta_next;
  const double bias = theta_next.dot(layer.bias.mean().col(0));
  if (w.size() != box.size() || theta_k.size() != box.size())
    throw ShapeError("inner_linear: multiplier width does not match the layer input");
  InnerResult r;
  r.mode = SolveMode::exact;
  Vec x(box.size());
  double total = bias;
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const ScalarMax m =
        scalar_activation_linear_max(w(i), theta_k(i), box.lo(i), box.hi(i), layer.activation);
    total += m.value;
    x(i) = m.arg;
  }
  r.value = total;
  r.witness = x;
  return r;
}

InnerResult inner_linexp_input(const Vec& center, double sigma, const CanonicalLayer& layer,
                               const Multiplier& lambda1) {
  if (!layer.is_deterministic())
    throw UnsupportedCombination("noise-input bound needs a deterministic first layer");
  if (lambda1.family != Family::linexp && lambda1.family != Family::linear &&
      lambda1.family != Family::zero)
    throw UnsupportedCombination("noise-input bound needs a linear or linexp multiplier");
  const Mat& w = layer.weights.values;
  const Vec m = w * center + layer.bias.values.col(0);
  InnerResult r;
  r.mode = SolveMode::upper_bound;
  r.value = lambda1.lin.dot(m);
  if (lambda1.family == Family::linexp) {
    const Vec wg = w.transpose() * lambda1.gamma;
    r.value += std::exp(0.5 * sigma * sigma * wg.squaredNorm() + lambda1.gamma.dot(m) +
                        lambda1.kappa);
  }
  r.witness = center;
  return r;
}

InnerResult inner_linexp_box_input(const CanonicalLayer& layer, const Multiplier& lambda1,
                                   const Box& box) {
  const Vec theta = lambda1.lin;
  InnerResult lin = inner_linear(layer, Vec::Zero(box.size()), theta, box);
  InnerResult r;
  r.mode = SolveMode::upper_bound;
  r.value = lin.value;
  r.witness = lin.witness;
  if (lambda1.family != Family::linexp) {
    r.mode = SolveMode::exact;
    return r;
  }
  // log E exp(gamma^T (W x + b)) is convex and separable in x.
  const Vec& g = lambda1.gamma;
  double lm = lambda1.kappa;
  for (Eigen::Index i = 0; i < g.size(); ++i) lm += log_mgf(layer.bias, i, 0, g(i));
  for (Eigen::Index j = 0; j < box.size(); ++j) {
    double at_lo = 0.0, at_hi = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      at_lo += log_mgf(layer.weights, i, j, g(i) * box.lo(j));
      at_hi += log_mgf(layer.weights, i, j, g(i) * box.hi(j));
    }
    lm += std::max(at_lo, at_hi);
  }
  r.value += std::exp(lm);
  return r;
}

namespace {

struct TransitionSetup {
  Vec c;        // E[W]^T beta
  double bias;  // beta^T E[b]
};

TransitionSetup transition_setup(const Vec& beta, const CanonicalLayer& layer) {
  return {layer.weights.mean().transpose() * beta, beta.dot(layer.bias.mean().col(0))};
}

std::vector<AffinePiece> transition_pieces(double c, double a, double l, double u,
                                           Activation s) {
  double zs[3];
  int nz = 0;
  zs[nz++] = l;
  if (s == Activation::relu && l < 0.0 && 0.0 < u) zs[nz++] = 0.0;
  zs[nz++] = u;
  std::vector<AffinePiece> pieces;
  for (double e : {l, u}) {
    const double se = apply_activation(s, e);
    for (int k = 0; k < nz; ++k) {
      const double sz = apply_activation(s, zs[k]);
      pieces.push_back({se - sz, c * se - a * zs[k]});
    }
  }
  return pieces;
}

double entropy_term(double zeta, double kappa) {
  if (!(zeta > 0.0)) return 0.0;
  return zeta * (std::log(zeta) - 1.0 - kappa);
}

// Dual value at fixed zeta with eta minimized exactly per coordinate.
double transition_at_zeta(const Multiplier& lk, const TransitionSetup& ts, const Box& box,
                          Activation act, double zeta, Vec* eta_out) {
  double total = entropy_term(zeta, lk.kappa) + ts.bias;
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const double a = lk.lin(i) + (zeta > 0.0 ? zeta * lk.gamma(i) : 0.0);
    const ScalarMin m =
        min_max_affine(transition_pieces(ts.c(i), a, box.lo(i), box.hi(i), act));
    total += m.value;
    if (eta_out) (*eta_out)(i) = m.arg;
  }
  return total;
}

}  // namespace

double linexp_transition_dual(const Multiplier& lambda_k, const Vec& beta,
                              const CanonicalLayer& layer, const Box& box, double zeta,
                              const Vec& eta) {
  if (zeta < 0.0) throw ValueError("zeta must be nonnegative");
  const TransitionSetup ts = transition_setup(beta, layer);
  double total = entropy_term(zeta, lambda_k.kappa) + ts.bias;
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const double a = lambda_k.lin(i) + (zeta > 0.0 ? zeta * lambda_k.gamma(i) : 0.0);
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& p : transition_pieces(ts.c(i), a, box.lo(i), box.hi(i), layer.activation))
      v = std::max(v, p.slope * eta(i) + p.intercept);
    total += v;
  }
  return total;
}

InnerResult inner_linexp_transition(const Multiplier& lambda_k, const Vec& beta,
                                    const CanonicalLayer& layer, const Box& box) {
  if (lambda_k.family != Family::linexp)
    throw UnsupportedCombination("linexp transition needs a linexp multiplier");
  const TransitionSetup ts = transition_setup(beta, layer);
  if (ts.c.size() != box.size()) throw ShapeError("linexp transition: width mismatch");
  const Activation act = layer.activation;

  double reach = lambda_k.kappa;
  for (Eigen::Index i = 0; i < box.size(); ++i)
    reach += std::abs(lambda_k.gamma(i)) * std::max(std::abs(box.lo(i)), std::abs(box.hi(i)));
  const double rho_hi = std::min(700.0, reach + 1.0);
  const double rho_lo = rho_hi - 60.0;

  auto F = [&](double rho) {
    return transition_at_zeta(lambda_k, ts, box, act, std::exp(rho), nullptr);
  };
  const ScalarMin best_rho = golden_section_min(F, rho_lo, rho_hi, 100);
  const double at_zero = transition_at_zeta(lambda_k, ts, box, act, 0.0, nullptr);

  InnerResult r;
  r.mode = SolveMode::upper_bound;
  Vec eta(box.size());
  double zeta = 0.0;
  if (at_zero <= best_rho.value) {
    r.value = transition_at_zeta(lambda_k, ts, box, act, 0.0, &eta);
  } else {
    zeta = std::exp(best_rho.arg);
    r.value = transition_at_zeta(lambda_k, ts, box, act, zeta, &eta);
  }
  r.internal_duals.push_back(zeta > 0.0 ? std::log(zeta) : -std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r.internal_duals.push_back(eta(i));
  return r;
}

InnerResult final_linear(const Vec& c, const Vec& theta, const Box& box) {
  if (c.size() != box.size() || theta.size() != box.size())
    throw ShapeError("final_linear: dimension mismatch");
  InnerResult r;
  r.mode = SolveMode::exact;
  Vec x(box.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const double d = c(i) - theta(i);
    const double vl = d * box.lo(i), vu = d * box.hi(i);
    if (d == 0.0) {
      x(i) = std::clamp(0.0, box.lo(i), box.hi(i));
    } else if (vu > vl) {
      total += vu;
      x(i) = box.hi(i);
    } else {
      total += vl;
      x(i) = box.lo(i);
    }
  }
  r.value = total;
  r.witness = x;
  return r;
}

InnerResult heuristic_inner_max(const SmoothObjective& f, const Box& box, std::uint64_t seed,
                                const std::vector<Vec>& extra_starts,
                                const AscentOptions& options) {
  const Eigen::Index n = box.size();
  std::vector<Vec> starts;
  starts.push_back(box.center());
  for (const auto& s : extra_starts)
    if (s.size() == n) starts.push_back(s.cwiseMax(box.lo).cwiseMin(box.hi));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(starts.size()) < options.starts + static_cast<int>(extra_starts.size())) {
    Vec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = box.lo(i) + unif(rng) * (box.hi(i) - box.lo(i));
    starts.push_back(x);
  }

  InnerResult r;
  r.mode = SolveMode::heuristic_lower;
  r.value = -std::numeric_limits<double>::infinity();
  for (const Vec& s : starts) {
    Vec x = s;
    double fx = f.value(x);
    Vec best_x = x;
    double best_f = fx;
    for (int it = 0; it < options.steps; ++it) {
      const Vec g = f.gradient(x);
      const Vec next = (x + options.step * g).cwiseMax(box.lo).cwiseMin(box.hi);
      if (next == x) break;
      x = next;
      fx = f.value(x);
      if (fx > best_f) {
        best_f = fx;
        best_x = x;
      }
    }
    if (best_f > r.value) {
      r.value = best_f;
      r.witness = best_x;
    }
  }
  return r;
}

}  // namespace funlag
