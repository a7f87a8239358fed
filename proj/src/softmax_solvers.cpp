#include <algorithm>
#include <cmath>
#include <limits>

#include "funlag/errors.hpp"
#include "funlag/inner_solvers.hpp"
#include "funlag/optim.hpp"

namespace funlag {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxExp = 700.0;

double safe_exp(double v) { return std::exp(std::min(v, kMaxExp)); }

}  // namespace

double softmax_component(const Vec& x, Eigen::Index m) {
  const double mx = x.maxCoeff();
  double den = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) den += std::exp(x(j) - mx);
  return std::exp(x(m) - mx) / den;
}

std::vector<Vec> stationary_points_case_a(const Vec& lambda, Eigen::Index i, double C) {
  std::vector<Vec> out;
  const Eigen::Index n = lambda.size();
  const double li = lambda(i);
  if (li < -0.25 || li > 0.0) return out;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i && lambda(j) < 0.0) return out;
  const double root = std::sqrt(std::max(0.0, 1.0 + 4.0 * li));
  const double branches[2] = {1.0 + root, 1.0 - root};
  const int nb = root == 0.0 ? 1 : 2;
  for (int k = 0; k < nb; ++k) {
    const double den = branches[k];
    if (den == 0.0) continue;
    Vec p(n);
    for (Eigen::Index j = 0; j < n; ++j) p(j) = j == i ? 0.5 * den : 2.0 * lambda(j) / den;
    if (!(p.minCoeff() > 0.0) || !p.allFinite()) continue;
    const double sp = p.sum();
    if (C > 0.0) {
      if (!(sp < 1.0)) continue;
      const Vec x = p.array().log() + std::log(C / (1.0 - sp));
      if (x.allFinite()) out.push_back(x);
    } else {
      if (std::abs(sp - 1.0) > 1e-9) continue;
      out.push_back(p.array().log());
    }
  }
  return out;
}

std::vector<Vec> stationary_points_case_b(const Vec& lambda, double C, double D) {
  std::vector<Vec> out;
  if (!(C > 0.0) || !(D > 0.0) || lambda.size() == 0) return out;
  if (!(lambda.minCoeff() > 0.0)) return out;
  const double s = lambda.sum() / D;
  const double disc = 1.0 - 4.0 * C * s;
  if (disc < 0.0) return out;
  const double root = std::sqrt(disc);
  const double ts[2] = {(1.0 + root) / (2.0 * s), (1.0 - root) / (2.0 * s)};
  const int nt = root == 0.0 ? 1 : 2;
  for (int k = 0; k < nt; ++k) {
    if (!(ts[k] > 0.0)) continue;
    const Vec x = (lambda / D).array().log() + 2.0 * std::log(ts[k]);
    if (x.allFinite()) out.push_back(x);
  }
  return out;
}

InnerResult final_softmax_exact(Eigen::Index m, const Vec& coef, const Box& box, int cap) {
  const Eigen::Index n = box.size();
  if (n > cap) throw DimensionError("exact softmax enumeration limited to " + std::to_string(cap) +
                                    " classes, got " + std::to_string(n));
  if (coef.size() != n || m < 0 || m >= n) throw ShapeError("final_softmax_exact: bad dimensions");

  // Work with logits shifted so that every exponential stays <= 1; the linear
  // term changes by a constant that is added back at the end.
  const double shift = box.hi.maxCoeff();
  const Vec lo = box.lo.array() - shift;
  const Vec hi = box.hi.array() - shift;
  auto f = [&](const Vec& x) { return softmax_component(x, m) + coef.dot(x); };

  Vec best_x = lo;
  double best = f(best_x);
  std::vector<int> v(static_cast<std::size_t>(n), 0);  // 0 lower, 1 upper, 2 interior
  std::size_t total = 1;
  for (Eigen::Index k = 0; k < n; ++k) total *= 3;
  Vec x(n);
  std::vector<Eigen::Index> free_idx;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    free_idx.clear();
    double C = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      v[static_cast<std::size_t>(k)] = static_cast<int>(c % 3);
      c /= 3;
      const int vk = v[static_cast<std::size_t>(k)];
      if (vk == 2) {
        free_idx.push_back(k);
      } else {
        x(k) = vk == 0 ? lo(k) : hi(k);
        C += std::exp(x(k));
      }
    }
    if (free_idx.empty()) {
      const double val = f(x);
      if (val > best) {
        best = val;
        best_x = x;
      }
      continue;
    }
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    Vec lf(nf);
    Eigen::Index pos_m = -1;
    for (Eigen::Index t = 0; t < nf; ++t) {
      lf(t) = coef(free_idx[static_cast<std::size_t>(t)]);
      if (free_idx[static_cast<std::size_t>(t)] == m) pos_m = t;
    }
    const std::vector<Vec> cands = pos_m >= 0 ? stationary_points_case_a(lf, pos_m, C)
                                              : stationary_points_case_b(lf, C, std::exp(x(m)));
    for (const Vec& xs : cands) {
      bool inside = true;
      for (Eigen::Index t = 0; t < nf && inside; ++t) {
        const Eigen::Index k = free_idx[static_cast<std::size_t>(t)];
        inside = xs(t) >= lo(k) && xs(t) <= hi(k);
      }
      if (!inside) continue;
      Vec y = x;
      for (Eigen::Index t = 0; t < nf; ++t) y(free_idx[static_cast<std::size_t>(t)]) = xs(t);
      const double val = f(y);
      if (val > best) {
        best = val;
        best_x = y;
      }
    }
  }
  InnerResult r;
  r.mode = SolveMode::exact;
  r.witness = Vec(best_x.array() + shift);
  r.value = best + shift * coef.sum();
  // Recompute in the original coordinates when that is representable.
  const double direct = softmax_component(*r.witness, m) + coef.dot(*r.witness);
  if (std::isfinite(direct)) r.value = direct;
  return r;
}

Interval softmax_range(Eigen::Index m, const Box& box) {
  Vec low = box.hi, high = box.lo;
  low(m) = box.lo(m);
  high(m) = box.hi(m);
  return {softmax_component(low, m), softmax_component(high, m)};
}

std::vector<double> uniform_grid(double t1, double tN, int n) {
  if (n < 2) throw ValueError("grid needs at least two points");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = t1 + (tN - t1) * static_cast<double>(i) / (n - 1);
  g.back() = tN;
  return g;
}

namespace {

// h(x_m) = coef_m x_m + sum_{j != m} max_{x_j} coef_j x_j - nu t exp(x_j - x_m), and h'.
struct CellInner {
  Eigen::Index m;
  const Vec& coef;
  const Box& box;
  double nt;

  double value(double xm, double* deriv) const {
    double v = coef(m) * xm;
    double d = coef(m);
    for (Eigen::Index j = 0; j < box.size(); ++j) {
      if (j == m) continue;
      const double cj = coef(j), l = box.lo(j), u = box.hi(j);
      if (nt == 0.0) {
        v += std::max(cj * l, cj * u);
        continue;
      }
      double xj = l;
      if (cj > 0.0) xj = std::clamp(xm + std::log(cj / nt), l, u);
      const double e = nt * safe_exp(xj - xm);
      v += cj * xj - e;
      d += e;
    }
    if (deriv) *deriv = d;
    return v;
  }
};

}  // namespace

double softmax_affine_cell_bound(Eigen::Index m, const Vec& coef, const Box& box, double t,
                                 double nu) {
  nu = std::max(nu, 0.0);
  const CellInner h{m, coef, box, nu * t};
  const ConcaveMax cm = concave_max_certified(
      [&](double xm) { return h.value(xm, nullptr); },
      [&](double xm) {
        double d;
        h.value(xm, &d);
        return d;
      },
      box.lo(m), box.hi(m));
  return nu * (1.0 - t) + cm.upper;
}

namespace {

// Minimizes a convex function over [0, inf) given a starting scale.
ScalarMin minimize_nonnegative(const std::function<double(double)>& F, double scale) {
  scale = std::max(scale, 1e-12);
  const double f0 = F(0.0);
  double hi = scale;
  double fhi = F(hi);
  double lo = 0.0;
  int guard = 0;
  while (fhi < f0 && guard++ < 80) {
    const double next = 2.0 * hi;
    const double fn = F(next);
    if (fn >= fhi) {
      hi = next;
      break;
    }
    lo = hi / 2.0;
    hi = next;
    fhi = fn;
  }
  ScalarMin best = golden_section_min(F, lo, hi, 100);
  if (f0 <= best.value) best = {0.0, f0};
  return best;
}

// Same over the whole real line.
ScalarMin minimize_real(const std::function<double(double)>& F, double scale) {
  const ScalarMin pos = minimize_nonnegative(F, scale);
  const ScalarMin neg = minimize_nonnegative([&](double v) { return F(-v); }, scale);
  if (neg.value < pos.value) return {-neg.arg, neg.value};
  return pos;
}

}  // namespace

InnerResult final_softmax_affine_bound(Eigen::Index m, const Vec& coef, const Box& box,
                                       const std::vector<double>& grid,
                                       std::span<const double> warm) {
  if (grid.size() < 2) throw ValueError("softmax grid needs at least two points");
  if (coef.size() != box.size()) throw ShapeError("final_softmax_affine_bound: dimension mismatch");
  InnerResult r;
  r.mode = SolveMode::upper_bound;
  r.value = kNegInf;
  const std::size_t cells = grid.size() - 1;
  for (std::size_t i = 0; i < cells; ++i) {
    const double t = grid[i];
    auto F = [&](double nu) { return softmax_affine_cell_bound(m, coef, box, t, nu); };
    const double scale = warm.size() == cells && warm[i] > 0.0 ? warm[i] : 1.0;
    const ScalarMin best = minimize_nonnegative(F, scale);
    r.internal_duals.push_back(best.arg);
    r.value = std::max(r.value, best.value + grid[i + 1]);
  }
  double mag = std::abs(grid.back());
  for (Eigen::Index i = 0; i < box.size(); ++i)
    mag += std::abs(coef(i)) * std::max(std::abs(box.lo(i)), std::abs(box.hi(i)));
  r.value = round_up(r.value, mag);
  return r;
}

double exp_quadratic_max(double a, double alpha, double beta, double l, double u) {
  auto f = [&](double z) { return a * safe_exp(z) - alpha * z - beta * z * z; };
  auto df = [&](double z) { return a * safe_exp(z) - alpha - 2.0 * beta * z; };
  auto concave_part = [&](double lo, double hi) {
    if (hi < lo) return kNegInf;
    return concave_max_certified(f, df, lo, hi, 120).upper;
  };
  auto convex_part = [&](double lo, double hi) {
    if (hi < lo) return kNegInf;
    return std::max(f(lo), f(hi));
  };
  if (a == 0.0) {
    double best = std::max(f(l), f(u));
    if (beta > 0.0) {
      const double v = -alpha / (2.0 * beta);
      if (v > l && v < u) best = std::max(best, f(v));
    }
    return best;
  }
  const double ratio = 2.0 * beta / a;
  if (!(ratio > 0.0)) {
    // second derivative a e^z - 2 beta has a fixed sign
    return a > 0.0 ? convex_part(l, u) : concave_part(l, u);
  }
  const double zs = std::log(ratio);
  if (a > 0.0) return std::max(concave_part(l, std::min(u, zs)), convex_part(std::max(l, zs), u));
  return std::max(convex_part(l, std::min(u, zs)), concave_part(std::max(l, zs), u));
}

double softmax_quadratic_cell_bound(const Vec& mu, const Vec& alpha, const Vec& beta,
                                    const Box& box, double t_lo, double t_hi, double theta) {
  double best = kNegInf;
  for (double t : {t_lo, t_hi}) {
    double v = t;
    for (Eigen::Index i = 0; i < box.size(); ++i)
      v += exp_quadratic_max((mu(i) - t) * theta, alpha(i), beta(i), box.lo(i), box.hi(i));
    best = std::max(best, v);
  }
  return best;
}

InnerResult final_softmax_quadratic_bound(const Vec& mu, const Vec& alpha, const Vec& beta,
                                          const Box& box, const std::vector<double>& grid,
                                          std::span<const double> warm) {
  if (grid.size() < 2) throw ValueError("softmax grid needs at least two points");
  if (mu.size() != box.size() || alpha.size() != box.size() || beta.size() != box.size())
    throw ShapeError("final_softmax_quadratic_bound: dimension mismatch");
  InnerResult r;
  r.mode = SolveMode::upper_bound;
  r.value = kNegInf;
  const std::size_t cells = grid.size() - 1;
  const double base_scale = std::exp(-std::min(kMaxExp, std::max(0.0, box.hi.maxCoeff())));
  for (std::size_t j = 0; j < cells; ++j) {
    auto F = [&](double theta) {
      return softmax_quadratic_cell_bound(mu, alpha, beta, box, grid[j], grid[j + 1], theta);
    };
    const double scale =
        warm.size() == cells && warm[j] != 0.0 ? std::abs(warm[j]) : base_scale;
    const ScalarMin best = minimize_real(F, scale);
    r.internal_duals.push_back(best.arg);
    r.value = std::max(r.value, best.value);
  }
  double mag = std::abs(grid.back()) + mu.cwiseAbs().sum();
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const double z = std::max(std::abs(box.lo(i)), std::abs(box.hi(i)));
    mag += (std::abs(alpha(i)) + std::abs(beta(i)) * z) * z;
  }
  r.value = round_up(r.value, mag);
  return r;
}

}  // namespace funlag
