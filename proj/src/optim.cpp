#include "funlag/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "funlag/errors.hpp"

namespace funlag {

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ShapeError("Adam: parameter/gradient size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

ScalarMin golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                             int iterations) {
  constexpr double invphi = 0.6180339887498949;
  ScalarMin best{lo, f(lo)};
  auto consider = [&](double x, double v) {
    if (v < best.value) best = {x, v};
  };
  consider(hi, f(hi));
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  consider(c, fc);
  consider(d, fd);
  for (int it = 0; it < iterations && b - a > 0.0; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
  }
  return best;
}

ConcaveMax concave_max_certified(const std::function<double(double)>& f,
                                 const std::function<double(double)>& df, double lo, double hi,
                                 int iterations) {
  ConcaveMax out;
  if (hi <= lo) {
    out.arg = lo;
    out.value = out.upper = f(lo);
    return out;
  }
  const auto m = golden_section_min([&](double x) { return -f(x); }, lo, hi, iterations);
  out.arg = m.arg;
  out.value = -m.value;
  const double slope = df(out.arg);
  out.upper = out.value + std::max(slope * (lo - out.arg), slope * (hi - out.arg));
  out.upper = std::max(out.upper, out.value);
  return out;
}

ScalarMin min_max_affine(const std::vector<AffinePiece>& pieces) {
  if (pieces.empty()) throw EmptyInput("min_max_affine: no pieces");
  auto eval = [&](double x) {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& p : pieces) v = std::max(v, p.slope * x + p.intercept);
    return v;
  };
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      const double ds = pieces[i].slope - pieces[j].slope;
      if (ds != 0.0) candidates.push_back((pieces[j].intercept - pieces[i].intercept) / ds);
    }
  ScalarMin best{candidates[0], eval(candidates[0])};
  for (double x : candidates) {
    const double v = eval(x);
    if (v < best.value || (v == best.value && x < best.arg)) best = {x, v};
  }
  return best;
}

}  // namespace funlag
