#include "funlag/qp_bound.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "funlag/errors.hpp"
#include "funlag/optim.hpp"

namespace funlag {

double gershgorin_upper(const Mat& A) {
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    best = std::max(best, A(i, i) + r);
  }
  return best;
}

double gershgorin_lower(const Mat& A) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    best = std::min(best, A(i, i) - r);
  }
  return best;
}

namespace {

Vec default_start(Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(1.0 + static_cast<double>(i));
  return v.normalized();
}

}  // namespace

EigenEstimate power_iteration(const Mat& A, const Vec& start, int max_iter, double tol) {
  const Eigen::Index n = A.rows();
  EigenEstimate out;
  if (n == 0) {
    out.converged = true;
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  const double shift = gershgorin_lower(A);
  Vec v = (start.size() == n && start.norm() > 0.0) ? Vec(start.normalized()) : default_start(n);
  double mu = v.dot(A * v);
  for (int it = 1; it <= max_iter; ++it) {
    Vec w = A * v - shift * v;
    const double nw = w.norm();
    out.iterations = it;
    if (!(nw > 0.0)) {
      out.converged = true;
      break;
    }
    v = w / nw;
    const double next = v.dot(A * v);
    const bool small = std::abs(next - mu) <= tol * std::max(1.0, std::abs(next));
    mu = next;
    if (small && it >= 30) {
      out.converged = true;
      break;
    }
  }
  out.value = mu;
  out.vector = v;
  return out;
}

EigenEstimate certified_lambda_max(const Mat& A, const Vec& start) {
  const Eigen::Index n = A.rows();
  EigenEstimate est = power_iteration(A, start);
  if (n == 0) return est;
  const double gu = gershgorin_upper(A);
  if (!std::isfinite(gu)) throw NumericalError("non-finite Gershgorin bound");
  const double fro = A.norm();
  const double eps = std::numeric_limits<double>::epsilon();
  const double nn = static_cast<double>(n + 1);
  const double residual = (A * est.vector - est.value * est.vector).norm();
  auto factors = [&](double ub) {
    Mat S = -A;
    S.diagonal().array() += ub;
    return Eigen::LLT<Mat>(S).info() == Eigen::Success;
  };
  double delta = std::max(residual, 1e-12 * std::max(1.0, fro));
  double lo = est.value;
  double hi = gu;
  bool found = false;
  for (int attempt = 0; attempt < 60; ++attempt) {
    const double ub = est.value + delta;
    if (ub >= gu) break;
    if (factors(ub)) {
      hi = ub;
      found = true;
      break;
    }
    lo = ub;
    delta *= 4.0;
  }
  if (!found) {
    est.value = gu;
    return est;
  }
  // shrink toward the smallest shift that still factors
  for (int it = 0; it < 30 && hi - lo > 1e-9 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (factors(mid))
      hi = mid;
    else
      lo = mid;
  }
  const double margin = 2.0 * nn * nn * eps * (std::abs(hi) + fro);
  est.value = std::min(hi + margin, gu);
  return est;
}

Mat BoxQuadratic::bordered() const {
  const Eigen::Index n = size();
  Mat M = Mat::Zero(n + 1, n + 1);
  M.block(1, 0, n, 1) = g;
  M.block(0, 1, 1, n) = g.transpose();
  M.block(1, 1, n, n) = 0.5 * (H + H.transpose());
  return M;
}

ShiftBound diagonal_shift_bound(const BoxQuadratic& f, const Vec& kappa, bool certified,
                                const Vec& warm) {
  if (kappa.size() != f.size() + 1)
    throw ShapeError("diagonal_shift_bound: kappa needs one entry per variable plus one");
  Mat M = f.bordered();
  M.diagonal() -= kappa;
  const EigenEstimate e = certified ? certified_lambda_max(M, warm) : power_iteration(M, warm);
  ShiftBound out;
  out.lambda = e.value;
  out.eigvec = e.vector;
  const double lp = std::max(e.value, 0.0);
  double s = 0.0;
  for (Eigen::Index i = 0; i < kappa.size(); ++i) s += std::max(kappa(i) + lp, 0.0);
  out.value = f.c0 + 0.5 * s;
  return out;
}

Vec gershgorin_shift(const BoxQuadratic& f) {
  const Eigen::Index n = f.size();
  Vec k(n + 1);
  k(0) = f.g.cwiseAbs().sum();
  const Mat Hs = 0.5 * (f.H + f.H.transpose());
  for (Eigen::Index i = 0; i < n; ++i)
    k(i + 1) = std::abs(f.g(i)) + Hs(i, i) + Hs.row(i).cwiseAbs().sum() - std::abs(Hs(i, i));
  return k;
}

double ReluQuadraticProblem::eval(const Vec& x) const {
  const Vec s = apply_activation(activation, x);
  return 0.5 * s.dot(A * s) + a.dot(s) - 0.5 * x.dot(B * x) - b.dot(x) + c;
}

Vec ReluQuadraticProblem::gradient(const Vec& x) const {
  const Vec s = apply_activation(activation, x);
  Vec ds = 0.5 * (A + A.transpose()) * s + a;
  if (activation == Activation::relu)
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!(x(i) > 0.0)) ds(i) = 0.0;
  return ds - 0.5 * (B + B.transpose()) * x - b;
}

namespace {

// max of q2 x^2 + q1 x on [lo, hi]
double quad_max(double q2, double q1, double lo, double hi) {
  auto f = [&](double x) { return q2 * x * x + q1 * x; };
  double best = std::max(f(lo), f(hi));
  if (q2 < 0.0) {
    const double v = -q1 / (2.0 * q2);
    if (v > lo && v < hi) best = std::max(best, f(v));
  }
  return best;
}

// max of coef * (p q) for p in [p0, p1], q in [q0, q1]
double bilinear_max(double coef, double p0, double p1, double q0, double q1) {
  const double c[4] = {coef * p0 * q0, coef * p0 * q1, coef * p1 * q0, coef * p1 * q1};
  return *std::max_element(c, c + 4);
}

}  // namespace

double separable_bound(const ReluQuadraticProblem& p) {
  const Eigen::Index n = p.size();
  const bool relu = p.activation == Activation::relu;
  double total = p.c;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = p.box.lo(i), u = p.box.hi(i);
    const double Aii = p.A(i, i), Bii = p.B(i, i);
    double best = -std::numeric_limits<double>::infinity();
    if (!relu) {
      best = quad_max(0.5 * (Aii - Bii), p.a(i) - p.b(i), l, u);
    } else {
      if (l <= 0.0) best = std::max(best, quad_max(-0.5 * Bii, -p.b(i), l, std::min(u, 0.0)));
      if (u >= 0.0)
        best = std::max(best, quad_max(0.5 * (Aii - Bii), p.a(i) - p.b(i), std::max(l, 0.0), u));
    }
    total += best;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double aij = p.A(i, j) + p.A(j, i);
      const double bij = p.B(i, j) + p.B(j, i);
      const double li = p.box.lo(i), ui = p.box.hi(i), lj = p.box.lo(j), uj = p.box.hi(j);
      if (aij != 0.0)
        total += 0.5 * bilinear_max(aij, apply_activation(p.activation, li),
                                    apply_activation(p.activation, ui),
                                    apply_activation(p.activation, lj),
                                    apply_activation(p.activation, uj));
      if (bij != 0.0) total += 0.5 * bilinear_max(-bij, li, ui, lj, uj);
    }
  return total;
}

namespace {

struct Lifted {
  std::vector<Eigen::Index> amb;
  BoxQuadratic base;
  std::vector<BoxQuadratic> terms;  // rho_i, tau_i, omega_i for each ambiguous unit
  std::vector<Mat> term_bordered;
  Mat base_bordered;
};

BoxQuadratic to_box(const Mat& P, const Vec& q, double q0, const Vec& mid, const Vec& rad) {
  BoxQuadratic f;
  f.c0 = 0.5 * mid.dot(P * mid) + q.dot(mid) + q0;
  f.g = rad.cwiseProduct(P * mid + q);
  f.H = rad.asDiagonal() * P * rad.asDiagonal();
  return f;
}

Lifted lift(const ReluQuadraticProblem& p) {
  const Eigen::Index n = p.size();
  Lifted L;
  const bool relu = p.activation == Activation::relu;
  for (Eigen::Index i = 0; i < n; ++i)
    if (relu && p.box.lo(i) < 0.0 && p.box.hi(i) > 0.0) L.amb.push_back(i);
  const Eigen::Index na = static_cast<Eigen::Index>(L.amb.size());
  const Eigen::Index nv = n + na;

  Mat S = Mat::Zero(n, nv);
  Mat X = Mat::Zero(n, nv);
  X.leftCols(n).setIdentity();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!relu || p.box.lo(i) >= 0.0) S(i, i) = 1.0;
  for (Eigen::Index t = 0; t < na; ++t) S(L.amb[t], n + t) = 1.0;

  Vec mid(nv), rad(nv);
  mid.head(n) = p.box.center();
  rad.head(n) = p.box.radius();
  for (Eigen::Index t = 0; t < na; ++t) {
    mid(n + t) = 0.5 * p.box.hi(L.amb[t]);
    rad(n + t) = 0.5 * p.box.hi(L.amb[t]);
  }

  const Mat As = 0.5 * (p.A + p.A.transpose());
  const Mat Bs = 0.5 * (p.B + p.B.transpose());
  const Mat P = S.transpose() * As * S - X.transpose() * Bs * X;
  const Vec q = S.transpose() * p.a - X.transpose() * p.b;
  L.base = to_box(P, q, p.c, mid, rad);

  const Mat Z = Mat::Zero(nv, nv);
  std::vector<BoxQuadratic> rho, tau, omega;
  for (Eigen::Index t = 0; t < na; ++t) {
    const Eigen::Index i = L.amb[t], y = n + t;
    const double l = p.box.lo(i), u = p.box.hi(i);
    Vec v1 = Vec::Zero(nv);
    v1(y) = 1.0;
    v1(i) = -1.0;
    rho.push_back(to_box(Z, v1, 0.0, mid, rad));
    Vec v2 = Vec::Zero(nv);
    const double slope = u / (u - l);
    v2(i) = slope;
    v2(y) = -1.0;
    tau.push_back(to_box(Z, v2, -slope * l, mid, rad));
    Mat P3 = Mat::Zero(nv, nv);
    P3(y, y) = 2.0;
    P3(i, y) = P3(y, i) = -1.0;
    omega.push_back(to_box(P3, Vec::Zero(nv), 0.0, mid, rad));
  }
  for (auto* group : {&rho, &tau, &omega})
    for (auto& f : *group) L.terms.push_back(std::move(f));
  L.base_bordered = L.base.bordered();
  for (const auto& f : L.terms) L.term_bordered.push_back(f.bordered());
  return L;
}

BoxQuadratic combine(const Lifted& L, std::span<const double> d) {
  BoxQuadratic f = L.base;
  for (std::size_t t = 0; t < L.terms.size(); ++t) {
    if (d[t] == 0.0) continue;
    f.c0 += d[t] * L.terms[t].c0;
    f.g += d[t] * L.terms[t].g;
    f.H += d[t] * L.terms[t].H;
  }
  return f;
}

void project(std::vector<double>& duals, std::size_t na) {
  for (std::size_t t = 0; t < 2 * na; ++t) duals[t] = std::max(duals[t], 0.0);
}

double eval_certified(const Lifted& L, std::span<const double> duals) {
  const std::size_t nd = L.terms.size();
  const BoxQuadratic f = combine(L, duals.subspan(0, nd));
  const auto k = duals.subspan(nd);
  const Vec kappa = Eigen::Map<const Vec>(k.data(), static_cast<Eigen::Index>(k.size()));
  return diagonal_shift_bound(f, kappa, true).value;
}

}  // namespace

namespace {

// size of the largest terms of p.eval over the box
double magnitude(const ReluQuadraticProblem& p) {
  Vec z(p.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std::max(std::abs(p.box.lo(i)), std::abs(p.box.hi(i)));
  return std::abs(p.c) + 0.5 * z.dot(p.A.cwiseAbs() * z) + p.a.cwiseAbs().dot(z) +
         0.5 * z.dot(p.B.cwiseAbs() * z) + p.b.cwiseAbs().dot(z);
}

}  // namespace

std::size_t relu_qcqp_num_duals(const ReluQuadraticProblem& p) {
  const Lifted L = lift(p);
  return L.terms.size() + static_cast<std::size_t>(L.base.size()) + 1;
}

double relu_qcqp_bound_at(const ReluQuadraticProblem& p, std::span<const double> duals) {
  const Lifted L = lift(p);
  const std::size_t need = L.terms.size() + static_cast<std::size_t>(L.base.size()) + 1;
  if (duals.size() != need) throw ShapeError("relu_qcqp_bound_at: wrong dual vector size");
  std::vector<double> d(duals.begin(), duals.end());
  project(d, L.amb.size());
  return round_up(eval_certified(L, d), magnitude(p));
}

QcqpResult relu_qcqp_bound(const ReluQuadraticProblem& p, const QcqpOptions& options,
                           std::span<const double> warm) {
  const Lifted L = lift(p);
  const std::size_t na = L.amb.size();
  const std::size_t nd = L.terms.size();
  const std::size_t nk = static_cast<std::size_t>(L.base.size()) + 1;

  std::vector<double> duals(nd + nk, 0.0);
  const Vec k0 = gershgorin_shift(L.base);
  if (warm.size() == duals.size()) {
    std::copy(warm.begin(), warm.end(), duals.begin());
    project(duals, na);
  } else {
    for (std::size_t i = 0; i < nk; ++i) duals[nd + i] = k0(static_cast<Eigen::Index>(i));
  }

  std::vector<double> init(nd + nk, 0.0);
  for (std::size_t i = 0; i < nk; ++i) init[nd + i] = k0(static_cast<Eigen::Index>(i));

  const double scale = std::max(1e-8, L.base_bordered.cwiseAbs().maxCoeff());
  Adam adam(duals.size());
  std::vector<double> best = duals;
  double best_est = std::numeric_limits<double>::infinity();
  Vec warm_vec;
  std::vector<double> grad(duals.size());
  for (int it = 0; it < options.iterations; ++it) {
    const BoxQuadratic f = combine(L, std::span<const double>(duals).subspan(0, nd));
    const Vec kappa = Eigen::Map<const Vec>(duals.data() + nd, static_cast<Eigen::Index>(nk));
    const ShiftBound sb = diagonal_shift_bound(f, kappa, false, warm_vec);
    warm_vec = sb.eigvec;
    if (sb.value < best_est) {
      best_est = sb.value;
      best = duals;
    }
    const double lp = std::max(sb.lambda, 0.0);
    double n_act = 0.0;
    for (std::size_t i = 0; i < nk; ++i)
      if (kappa(static_cast<Eigen::Index>(i)) + lp > 0.0) n_act += 1.0;
    const double w = sb.lambda > 0.0 ? 0.5 * n_act : 0.0;
    const Vec& v = sb.eigvec;
    for (std::size_t t = 0; t < nd; ++t)
      grad[t] = L.terms[t].c0 + w * v.dot(L.term_bordered[t] * v);
    for (std::size_t i = 0; i < nk; ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      grad[nd + i] = (kappa(ii) + lp > 0.0 ? 0.5 : 0.0) - w * v(ii) * v(ii);
    }
    const double lr = options.lr * scale * std::pow(0.99, it);
    adam.step(duals, grad, lr);
    project(duals, na);
  }

  QcqpResult out;
  const double from_best = eval_certified(L, best);
  const double from_init = eval_certified(L, init);
  if (from_init < from_best) {
    out.eigen_value = from_init;
    out.duals = init;
  } else {
    out.eigen_value = from_best;
    out.duals = best;
  }
  const double mag = magnitude(p);
  out.eigen_value = round_up(out.eigen_value, mag);
  out.separable_value = round_up(separable_bound(p), mag);
  out.value = std::min(out.eigen_value, out.separable_value);
  return out;
}

}  // namespace funlag
