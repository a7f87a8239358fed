#include "funlag/multiplier.hpp"

#include <cmath>

#include "funlag/errors.hpp"
#include "funlag/hexfloat.hpp"

namespace funlag {

using nlohmann::json;

const char* to_string(Family f) {
  switch (f) {
    case Family::zero:
      return "zero";
    case Family::linear:
      return "linear";
    case Family::linexp:
      return "linexp";
    case Family::quadratic:
      return "quadratic";
    case Family::diag_quadratic:
      return "diag_quadratic";
  }
  return "zero";
}

Family family_from_string(const std::string& name) {
  if (name == "zero") return Family::zero;
  if (name == "linear") return Family::linear;
  if (name == "linexp") return Family::linexp;
  if (name == "quadratic") return Family::quadratic;
  if (name == "diag_quadratic") return Family::diag_quadratic;
  throw SchemaError("unknown multiplier family '" + name + "'");
}

Multiplier Multiplier::zero(Eigen::Index n) {
  Multiplier m;
  m.family = Family::zero;
  m.lin = Vec::Zero(n);
  return m;
}

Multiplier Multiplier::linear(Vec theta) {
  Multiplier m;
  m.family = Family::linear;
  m.lin = std::move(theta);
  return m;
}

Multiplier Multiplier::linexp(Vec alpha, Vec gamma, double kappa) {
  if (alpha.size() != gamma.size()) throw ShapeError("linexp: alpha and gamma differ in length");
  Multiplier m;
  m.family = Family::linexp;
  m.lin = std::move(alpha);
  m.gamma = std::move(gamma);
  m.kappa = kappa;
  return m;
}

Multiplier Multiplier::quadratic(Mat Q, Vec q) {
  if (Q.rows() != q.size() || Q.cols() != q.size()) throw ShapeError("quadratic: Q/q shape mismatch");
  Multiplier m;
  m.family = Family::quadratic;
  m.Q = 0.5 * (Q + Q.transpose());
  m.lin = std::move(q);
  return m;
}

Multiplier Multiplier::diag_quadratic(Vec alpha, Vec beta) {
  if (alpha.size() != beta.size()) throw ShapeError("diag_quadratic: alpha/beta length mismatch");
  Multiplier m;
  m.family = Family::diag_quadratic;
  m.lin = std::move(alpha);
  m.beta = std::move(beta);
  return m;
}

double Multiplier::eval(const Vec& x) const {
  if (x.size() != dim()) throw ShapeError("multiplier evaluated at a point of the wrong dimension");
  switch (family) {
    case Family::zero:
      return 0.0;
    case Family::linear:
      return lin.dot(x);
    case Family::linexp:
      return lin.dot(x) + std::exp(gamma.dot(x) + kappa);
    case Family::quadratic:
      return lin.dot(x) + 0.5 * x.dot(Q * x);
    case Family::diag_quadratic:
      return lin.dot(x) + beta.dot(x.cwiseProduct(x));
  }
  return 0.0;
}

Vec Multiplier::grad_x(const Vec& x) const {
  switch (family) {
    case Family::zero:
      return Vec::Zero(dim());
    case Family::linear:
      return lin;
    case Family::linexp:
      return lin + std::exp(gamma.dot(x) + kappa) * gamma;
    case Family::quadratic:
      return lin + Q * x;
    case Family::diag_quadratic:
      return lin + 2.0 * beta.cwiseProduct(x);
  }
  return Vec::Zero(dim());
}

Multiplier Multiplier::zeros_like() const {
  Multiplier m = *this;
  m.lin.setZero();
  if (m.gamma.size()) m.gamma.setZero();
  m.kappa = 0.0;
  if (m.Q.size()) m.Q.setZero();
  if (m.beta.size()) m.beta.setZero();
  return m;
}

// Gradient records store, for Q, the derivative with respect to the
// upper-triangle parameter mirrored into both halves: d/dQ_ii on the
// diagonal and d/dQ_ij (= d/dQ_ji, shared) off the diagonal.
Multiplier Multiplier::param_gradient(const Vec& x) const {
  Multiplier g = zeros_like();
  switch (family) {
    case Family::zero:
      break;
    case Family::linear:
      g.lin = x;
      break;
    case Family::linexp: {
      const double e = std::exp(gamma.dot(x) + kappa);
      g.lin = x;
      g.gamma = e * x;
      g.kappa = e;
      break;
    }
    case Family::quadratic:
      g.lin = x;
      g.Q = x * x.transpose();
      g.Q.diagonal() *= 0.5;
      break;
    case Family::diag_quadratic:
      g.lin = x;
      g.beta = x.cwiseProduct(x);
      break;
  }
  return g;
}

std::size_t Multiplier::num_params() const {
  const auto n = static_cast<std::size_t>(dim());
  switch (family) {
    case Family::zero:
      return 0;
    case Family::linear:
      return n;
    case Family::linexp:
      return 2 * n + 1;
    case Family::quadratic:
      return n + n * (n + 1) / 2;
    case Family::diag_quadratic:
      return 2 * n;
  }
  return 0;
}

void Multiplier::pack(std::vector<double>& out) const {
  if (family == Family::zero) return;
  for (Eigen::Index i = 0; i < lin.size(); ++i) out.push_back(lin(i));
  if (family == Family::linexp) {
    for (Eigen::Index i = 0; i < gamma.size(); ++i) out.push_back(gamma(i));
    out.push_back(kappa);
  } else if (family == Family::quadratic) {
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
      for (Eigen::Index j = i; j < Q.cols(); ++j) out.push_back(Q(i, j));
  } else if (family == Family::diag_quadratic) {
    for (Eigen::Index i = 0; i < beta.size(); ++i) out.push_back(beta(i));
  }
}

std::size_t Multiplier::unpack(std::span<const double> in) {
  const std::size_t need = num_params();
  if (in.size() < need) throw ShapeError("parameter vector too short");
  std::size_t p = 0;
  if (family == Family::zero) return 0;
  for (Eigen::Index i = 0; i < lin.size(); ++i) lin(i) = in[p++];
  if (family == Family::linexp) {
    for (Eigen::Index i = 0; i < gamma.size(); ++i) gamma(i) = in[p++];
    kappa = in[p++];
  } else if (family == Family::quadratic) {
    for (Eigen::Index i = 0; i < Q.rows(); ++i)
      for (Eigen::Index j = i; j < Q.cols(); ++j) Q(i, j) = Q(j, i) = in[p++];
  } else if (family == Family::diag_quadratic) {
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta(i) = in[p++];
  }
  return p;
}

void Multiplier::add_scaled(const Multiplier& other, double c) {
  if (other.family != family || other.dim() != dim())
    throw ShapeError("add_scaled: multiplier families or widths differ");
  lin += c * other.lin;
  if (gamma.size()) gamma += c * other.gamma;
  kappa += c * other.kappa;
  if (Q.size()) Q += c * other.Q;
  if (beta.size()) beta += c * other.beta;
}

Multiplier Multiplier::as_quadratic() const {
  switch (family) {
    case Family::zero:
    case Family::linear:
      return quadratic(Mat::Zero(dim(), dim()), lin);
    case Family::quadratic:
      return *this;
    case Family::diag_quadratic: {
      Mat q = Mat::Zero(dim(), dim());
      q.diagonal() = 2.0 * beta;
      return quadratic(q, lin);
    }
    case Family::linexp:
      break;
  }
  throw UnsupportedCombination("linexp multiplier has no quadratic form");
}

bool Multiplier::has_quadratic_part() const {
  if (family == Family::quadratic) return (Q.array() != 0.0).any();
  if (family == Family::diag_quadratic) return (beta.array() != 0.0).any();
  return false;
}

std::vector<double> MultiplierStack::pack() const {
  std::vector<double> out;
  for (const auto& m : lambdas) m.pack(out);
  return out;
}

void MultiplierStack::unpack(std::span<const double> in) {
  std::size_t p = 0;
  for (auto& m : lambdas) p += m.unpack(in.subspan(p));
  if (p != in.size()) throw ShapeError("parameter vector length does not match the stack");
}

MultiplierStack MultiplierStack::zeros_like() const {
  MultiplierStack s;
  for (const auto& m : lambdas) s.lambdas.push_back(m.zeros_like());
  return s;
}

void MultiplierStack::add_scaled(const MultiplierStack& other, double c) {
  if (other.depth() != depth()) throw ShapeError("stack depths differ");
  for (std::size_t i = 0; i < lambdas.size(); ++i) lambdas[i].add_scaled(other.lambdas[i], c);
}

MultiplierStack init_stack(const std::vector<Family>& families,
                           const std::vector<Eigen::Index>& widths, const InitOptions& options) {
  if (widths.size() != families.size() + 1)
    throw ShapeError("init_stack: need one family per layer boundary x_1..x_K");
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noise = [&](Eigen::Index n) {
    Vec v = Vec::Zero(n);
    if (options.strategy == InitStrategy::noise)
      for (Eigen::Index i = 0; i < n; ++i) v(i) = options.noise_scale * normal(rng);
    return v;
  };
  MultiplierStack stack;
  for (std::size_t k = 0; k < families.size(); ++k) {
    const Eigen::Index n = widths[k + 1];
    switch (families[k]) {
      case Family::zero:
        stack.lambdas.push_back(Multiplier::zero(n));
        break;
      case Family::linear:
        stack.lambdas.push_back(Multiplier::linear(noise(n)));
        break;
      case Family::linexp: {
        Vec alpha = noise(n);
        Vec gamma = noise(n);
        stack.lambdas.push_back(Multiplier::linexp(alpha, gamma, options.linexp_kappa));
        break;
      }
      case Family::quadratic: {
        Vec q = noise(n);
        Mat Q = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) Q.col(i) = noise(n);
        stack.lambdas.push_back(Multiplier::quadratic(Q, q));
        break;
      }
      case Family::diag_quadratic: {
        Vec alpha = noise(n);
        Vec beta = noise(n);
        stack.lambdas.push_back(Multiplier::diag_quadratic(alpha, beta));
        break;
      }
    }
  }
  return stack;
}

LayerMoments layer_moments(const CanonicalLayer& layer, const Vec& x) {
  if (x.size() != layer.in_dim()) throw ShapeError("layer input dimension mismatch");
  const Vec s = apply_activation(layer.activation, x);
  LayerMoments m;
  m.mean = layer.weights.mean() * s + layer.bias.mean().col(0);
  m.variance = layer.weights.variance() * s.cwiseProduct(s) + layer.bias.variance().col(0);
  return m;
}

double log_mgf(const WeightDistribution& w, Eigen::Index i, Eigen::Index j, double t) {
  switch (w.kind) {
    case WeightDistribution::Kind::gaussian: {
      const double sd = w.stddev(i, j);
      return w.values(i, j) * t + 0.5 * sd * sd * t * t;
    }
    case WeightDistribution::Kind::dropout: {
      const double p = w.keep(i, j);
      const double vt = w.values(i, j) * t;
      if (p >= 1.0) return vt;
      if (p <= 0.0) return 0.0;
      // log(p e^{vt} + 1 - p), evaluated without overflow
      if (vt > 0.0) return vt + std::log(p + (1.0 - p) * std::exp(-vt));
      return std::log1p(p * std::expm1(vt));
    }
    default:
      return w.values(i, j) * t;
  }
}

double log_mgf_derivative(const WeightDistribution& w, Eigen::Index i, Eigen::Index j, double t) {
  switch (w.kind) {
    case WeightDistribution::Kind::gaussian: {
      const double sd = w.stddev(i, j);
      return w.values(i, j) + sd * sd * t;
    }
    case WeightDistribution::Kind::dropout: {
      const double p = w.keep(i, j);
      const double v = w.values(i, j);
      if (p >= 1.0) return v;
      if (p <= 0.0) return 0.0;
      const double vt = v * t;
      // p v e^{vt} / (p e^{vt} + 1 - p)
      if (vt > 0.0) return p * v / (p + (1.0 - p) * std::exp(-vt));
      const double e = std::exp(vt);
      return p * v * e / (p * e + 1.0 - p);
    }
    default:
      return w.values(i, j);
  }
}

double log_mgf_of_output(const CanonicalLayer& layer, const Vec& activated, const Vec& gamma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
    if (gamma(i) == 0.0) continue;
    for (Eigen::Index j = 0; j < layer.in_dim(); ++j)
      acc += log_mgf(layer.weights, i, j, gamma(i) * activated(j));
    acc += log_mgf(layer.bias, i, 0, gamma(i));
  }
  return acc;
}

double expected_under_layer(const Multiplier& lambda_next, const CanonicalLayer& layer, const Vec& x) {
  if (lambda_next.dim() != layer.out_dim())
    throw ShapeError("multiplier width does not match the layer output");
  switch (lambda_next.family) {
    case Family::zero:
      return 0.0;
    case Family::linear: {
      const Vec s = apply_activation(layer.activation, x);
      return lambda_next.lin.dot(layer.weights.mean() * s + layer.bias.mean().col(0));
    }
    case Family::quadratic: {
      const auto m = layer_moments(layer, x);
      return lambda_next.lin.dot(m.mean) + 0.5 * m.mean.dot(lambda_next.Q * m.mean) +
             0.5 * lambda_next.Q.diagonal().dot(m.variance);
    }
    case Family::diag_quadratic: {
      const auto m = layer_moments(layer, x);
      return lambda_next.lin.dot(m.mean) +
             lambda_next.beta.dot(m.mean.cwiseProduct(m.mean) + m.variance);
    }
    case Family::linexp: {
      const Vec s = apply_activation(layer.activation, x);
      const Vec mean = layer.weights.mean() * s + layer.bias.mean().col(0);
      return lambda_next.lin.dot(mean) +
             std::exp(lambda_next.kappa + log_mgf_of_output(layer, s, lambda_next.gamma));
    }
  }
  throw UnsupportedCombination("unsupported multiplier family");
}

Multiplier expected_param_gradient(const Multiplier& lambda_next, const CanonicalLayer& layer,
                                   const Vec& x) {
  Multiplier g = lambda_next.zeros_like();
  switch (lambda_next.family) {
    case Family::zero:
      break;
    case Family::linear: {
      const Vec s = apply_activation(layer.activation, x);
      g.lin = layer.weights.mean() * s + layer.bias.mean().col(0);
      break;
    }
    case Family::quadratic: {
      const auto m = layer_moments(layer, x);
      g.lin = m.mean;
      g.Q = m.mean * m.mean.transpose();
      g.Q.diagonal() = 0.5 * (m.mean.cwiseProduct(m.mean) + m.variance);
      break;
    }
    case Family::diag_quadratic: {
      const auto m = layer_moments(layer, x);
      g.lin = m.mean;
      g.beta = m.mean.cwiseProduct(m.mean) + m.variance;
      break;
    }
    case Family::linexp: {
      const Vec s = apply_activation(layer.activation, x);
      g.lin = layer.weights.mean() * s + layer.bias.mean().col(0);
      const double e = std::exp(lambda_next.kappa + log_mgf_of_output(layer, s, lambda_next.gamma));
      g.kappa = e;
      for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
        const double gi = lambda_next.gamma(i);
        double d = log_mgf_derivative(layer.bias, i, 0, gi);
        for (Eigen::Index j = 0; j < layer.in_dim(); ++j)
          d += s(j) * log_mgf_derivative(layer.weights, i, j, gi * s(j));
        g.gamma(i) = e * d;
      }
      break;
    }
  }
  return g;
}

Vec expected_grad_x(const Multiplier& lambda_next, const CanonicalLayer& layer, const Vec& x) {
  const Vec s = apply_activation(layer.activation, x);
  Vec ds = Vec::Ones(x.size());
  if (layer.activation == Activation::relu)
    for (Eigen::Index j = 0; j < x.size(); ++j) ds(j) = x(j) > 0.0 ? 1.0 : 0.0;

  Vec g_s;
  switch (lambda_next.family) {
    case Family::zero:
      return Vec::Zero(x.size());
    case Family::linear:
      g_s = layer.weights.mean().transpose() * lambda_next.lin;
      break;
    case Family::quadratic:
    case Family::diag_quadratic: {
      const auto form = expected_quadratic_form(lambda_next, layer);
      g_s = form.A * s + form.a;
      break;
    }
    case Family::linexp: {
      g_s = layer.weights.mean().transpose() * lambda_next.lin;
      const double e = std::exp(lambda_next.kappa + log_mgf_of_output(layer, s, lambda_next.gamma));
      for (Eigen::Index j = 0; j < layer.in_dim(); ++j) {
        double d = 0.0;
        for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
          const double gi = lambda_next.gamma(i);
          if (gi != 0.0) d += gi * log_mgf_derivative(layer.weights, i, j, gi * s(j));
        }
        g_s(j) += e * d;
      }
      break;
    }
  }
  return g_s.cwiseProduct(ds);
}

QuadraticForm expected_quadratic_form(const Multiplier& lambda_next, const CanonicalLayer& layer) {
  const Multiplier q = lambda_next.as_quadratic();
  const Mat W = layer.weights.mean();
  const Vec b = layer.bias.mean().col(0);
  const Mat V = layer.weights.variance();
  const Vec vb = layer.bias.variance().col(0);
  QuadraticForm f;
  f.A = W.transpose() * q.Q * W;
  f.A.diagonal() += V.transpose() * q.Q.diagonal();
  f.a = W.transpose() * (q.Q * b + q.lin);
  f.c = 0.5 * b.dot(q.Q * b) + 0.5 * q.Q.diagonal().dot(vb) + q.lin.dot(b);
  return f;
}

json multiplier_to_json(const Multiplier& m) {
  json params = json::object();
  switch (m.family) {
    case Family::zero:
      params["dim"] = m.dim();
      break;
    case Family::linear:
      params["theta"] = hex_vector(m.lin);
      break;
    case Family::linexp:
      params["alpha"] = hex_vector(m.lin);
      params["gamma"] = hex_vector(m.gamma);
      params["kappa"] = to_hex(m.kappa);
      break;
    case Family::quadratic:
      params["Q"] = hex_matrix(m.Q);
      params["q"] = hex_vector(m.lin);
      break;
    case Family::diag_quadratic:
      params["alpha"] = hex_vector(m.lin);
      params["beta"] = hex_vector(m.beta);
      break;
  }
  return json{{"family", to_string(m.family)}, {"params", params}};
}

Multiplier multiplier_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j.contains("params"))
    throw SchemaError("multiplier needs 'family' and 'params'");
  const auto& p = j.at("params");
  switch (family_from_string(j.at("family").get<std::string>())) {
    case Family::zero:
      return Multiplier::zero(p.at("dim").get<Eigen::Index>());
    case Family::linear:
      return Multiplier::linear(vector_from_json(p.at("theta")));
    case Family::linexp:
      return Multiplier::linexp(vector_from_json(p.at("alpha")), vector_from_json(p.at("gamma")),
                                real_from_json(p.at("kappa")));
    case Family::quadratic:
      return Multiplier::quadratic(matrix_from_json(p.at("Q")), vector_from_json(p.at("q")));
    case Family::diag_quadratic:
      return Multiplier::diag_quadratic(vector_from_json(p.at("alpha")),
                                        vector_from_json(p.at("beta")));
  }
  throw SchemaError("unknown multiplier family");
}

json stack_to_json(const MultiplierStack& s) {
  json out = json::array();
  for (const auto& m : s.lambdas) out.push_back(multiplier_to_json(m));
  return out;
}

MultiplierStack stack_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("multiplier stack must be an array");
  MultiplierStack s;
  for (const auto& m : j) s.lambdas.push_back(multiplier_from_json(m));
  return s;
}

}  // namespace funlag
