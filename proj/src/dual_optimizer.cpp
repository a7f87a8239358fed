#include "funlag/dual_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "funlag/errors.hpp"
#include "funlag/hexfloat.hpp"
#include "funlag/optim.hpp"
#include "funlag/parallel.hpp"

namespace funlag {

using nlohmann::json;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

LayerBounds problem_bounds(const VerificationProblem& problem) {
  return propagate_intervals(problem.net, problem.input.support());
}

namespace {

bool linear_like(const Multiplier& m) {
  return m.family == Family::zero || m.family == Family::linear;
}

bool quadratic_like(const Multiplier& m) { return m.family != Family::linexp; }

Multiplier negated(const Multiplier& g) {
  Multiplier out = g.zeros_like();
  out.add_scaled(g, -1.0);
  return out;
}

struct TermOut {
  InnerResult result;
  std::optional<Multiplier> grad_k;
  std::optional<Multiplier> grad_next;
};

struct Context {
  const VerificationProblem& problem;
  const MultiplierStack& stack;
  const LayerBounds& bounds;
  EvalMode mode;
  const DualOptions& options;
  DualState* state;
  std::uint64_t seed;
  bool want_gradient;
};

std::span<const double> warm_for(const Context& ctx, std::size_t k) {
  if (!ctx.state || k >= ctx.state->duals.size()) return {};
  return ctx.state->duals[k];
}

void store_duals(const Context& ctx, std::size_t k, const InnerResult& r) {
  if (ctx.state && k < ctx.state->duals.size() && !r.internal_duals.empty())
    ctx.state->duals[k] = r.internal_duals;
}

InnerResult run_qcqp(const Context& ctx, std::size_t k, const ReluQuadraticProblem& p) {
  const QcqpResult q = relu_qcqp_bound(p, ctx.options.qcqp, warm_for(ctx, k));
  InnerResult r;
  r.mode = SolveMode::upper_bound;
  r.value = q.value;
  r.internal_duals = q.duals;
  store_duals(ctx, k, r);
  return r;
}

ReluQuadraticProblem middle_quadratic(const CanonicalLayer& layer, const Multiplier& lk,
                                      const Multiplier& ln, const Box& box) {
  const QuadraticForm F = expected_quadratic_form(ln, layer);
  const Multiplier qk = lk.as_quadratic();
  ReluQuadraticProblem p;
  p.activation = layer.activation;
  p.A = F.A;
  p.a = F.a;
  p.c = F.c;
  p.B = qk.Q;
  p.b = qk.lin;
  p.box = box;
  return p;
}

TermOut noise_input_term(const Context& ctx, const CanonicalLayer& layer, const Multiplier& ln) {
  const InputSet& in = ctx.problem.input;
  TermOut out;
  const Vec m = layer.weights.mean() * in.center + layer.bias.mean().col(0);
  if (linear_like(ln)) {
    out.result.mode = SolveMode::upper_bound;
    out.result.value = ln.lin.dot(m);
    out.result.witness = in.center;
    if (ctx.want_gradient) {
      Multiplier g = ln.zeros_like();
      g.lin = m;
      out.grad_next = g;
    }
    return out;
  }
  if (ln.family != Family::linexp)
    throw UnsupportedCombination("noise input sets need linear or linexp multipliers on the first layer");
  out.result = inner_linexp_input(in.center, in.sigma, layer, ln);
  if (ctx.want_gradient) {
    const Mat& w = layer.weights.values;
    const Vec wg = w.transpose() * ln.gamma;
    const double s2 = in.sigma * in.sigma;
    const double e = std::exp(0.5 * s2 * wg.squaredNorm() + ln.gamma.dot(m) + ln.kappa);
    Multiplier g = ln.zeros_like();
    g.lin = m;
    g.gamma = e * (s2 * (w * wg) + m);
    g.kappa = e;
    out.grad_next = g;
  }
  return out;
}

TermOut middle_term(const Context& ctx, std::size_t k) {
  const CanonicalNetwork& net = ctx.problem.net;
  const CanonicalLayer& layer = net.layer(k);
  const Box& box = ctx.bounds[k];
  const Multiplier lk = k == 0 ? Multiplier::zero(layer.in_dim()) : ctx.stack.at(k);
  const Multiplier& ln = ctx.stack.at(k + 1);

  if (k == 0 && ctx.problem.input.kind == InputSet::Kind::subgaussian)
    return noise_input_term(ctx, layer, ln);

  TermOut out;
  if (linear_like(lk) && linear_like(ln)) {
    out.result = inner_linear(layer, lk.lin, ln.lin, box);
  } else if (ctx.mode == EvalMode::certify) {
    if (k == 0 && ln.family == Family::linexp) {
      out.result = inner_linexp_box_input(layer, ln, box);
    } else if (lk.family == Family::linexp && linear_like(ln)) {
      out.result = inner_linexp_transition(lk, ln.lin, layer, box);
    } else if (quadratic_like(lk) && quadratic_like(ln)) {
      out.result = run_qcqp(ctx, k, middle_quadratic(layer, lk, ln, box));
    } else {
      throw UnsupportedCombination(std::string("no solver for multipliers ") + to_string(lk.family) +
                                   " -> " + to_string(ln.family) + " at layer " + std::to_string(k));
    }
  } else {
    if (!(k == 0 && ln.family == Family::linexp) &&
        !(lk.family == Family::linexp && linear_like(ln)) &&
        !(quadratic_like(lk) && quadratic_like(ln)))
      throw UnsupportedCombination(std::string("no solver for multipliers ") + to_string(lk.family) +
                                   " -> " + to_string(ln.family) + " at layer " + std::to_string(k));
    SmoothObjective f{
        [&](const Vec& x) { return expected_under_layer(ln, layer, x) - lk.eval(x); },
        [&](const Vec& x) { return Vec(expected_grad_x(ln, layer, x) - lk.grad_x(x)); }};
    out.result = heuristic_inner_max(f, box, mix_seed(ctx.seed, k), {box.lo, box.hi},
                                     ctx.options.ascent);
  }
  if (ctx.want_gradient && out.result.witness) {
    const Vec& x = *out.result.witness;
    out.grad_next = expected_param_gradient(ln, layer, x);
    if (k > 0) out.grad_k = negated(lk.param_gradient(x));
  }
  return out;
}

TermOut final_term(const Context& ctx) {
  const CanonicalNetwork& net = ctx.problem.net;
  const std::size_t K = net.num_layers();
  const Box& box = ctx.bounds[K];
  const Multiplier& lk = ctx.stack.at(K);
  const SpecObjective& obj = ctx.problem.objective;
  const Eigen::Index n = box.size();
  TermOut out;

  if (obj.is_linear()) {
    const Vec c = obj.coefficients(n);
    if (linear_like(lk)) {
      out.result = final_linear(c, lk.lin, box);
    } else if (ctx.mode == EvalMode::certify) {
      if (lk.family == Family::linexp) {
        // -exp(.) <= 0, so dropping it keeps an upper bound
        out.result = final_linear(c, lk.lin, box);
        out.result.mode = SolveMode::upper_bound;
        out.result.witness.reset();
      } else {
        const Multiplier q = lk.as_quadratic();
        ReluQuadraticProblem p;
        p.activation = Activation::identity;
        p.A = Mat::Zero(n, n);
        p.a = c;
        p.B = q.Q;
        p.b = q.lin;
        p.box = box;
        out.result = run_qcqp(ctx, K, p);
      }
    } else {
      SmoothObjective f{[&](const Vec& x) { return c.dot(x) - lk.eval(x); },
                        [&](const Vec& x) { return Vec(c - lk.grad_x(x)); }};
      out.result = heuristic_inner_max(f, box, mix_seed(ctx.seed, K), {box.lo, box.hi},
                                       ctx.options.ascent);
    }
  } else {
    const Eigen::Index m = obj.target;
    if (ctx.mode == EvalMode::certify) {
      if (linear_like(lk) || lk.family == Family::linexp) {
        const Vec coef = -lk.lin;
        if (n <= ctx.options.exact_cap) {
          out.result = final_softmax_exact(m, coef, box, ctx.options.exact_cap);
        } else {
          const Interval t = softmax_range(m, box);
          out.result = final_softmax_affine_bound(m, coef, box,
                                                  uniform_grid(t.lo, t.hi, ctx.options.grid_n),
                                                  warm_for(ctx, K));
          store_duals(ctx, K, out.result);
        }
        if (lk.family == Family::linexp) {
          out.result.mode = SolveMode::upper_bound;
          out.result.witness.reset();
        }
      } else if (lk.family == Family::diag_quadratic) {
        Vec mu = Vec::Zero(n);
        mu(m) = 1.0;
        out.result = final_softmax_quadratic_bound(mu, lk.lin, lk.beta, box,
                                                   uniform_grid(0.0, 1.0, ctx.options.grid_n),
                                                   warm_for(ctx, K));
        store_duals(ctx, K, out.result);
      } else {
        throw UnsupportedCombination("softmax objectives need a linear, linexp or diagonal quadratic final multiplier");
      }
    } else {
      if (lk.family == Family::quadratic)
        throw UnsupportedCombination("softmax objectives need a linear, linexp or diagonal quadratic final multiplier");
      if (linear_like(lk) && n <= std::min(ctx.options.train_exact_cap, ctx.options.exact_cap)) {
        out.result = final_softmax_exact(m, -lk.lin, box, ctx.options.exact_cap);
      } else {
        SmoothObjective f{[&](const Vec& x) { return softmax_component(x, m) - lk.eval(x); },
                          [&](const Vec& x) {
                            const Vec p = softmax(x);
                            Vec g = -p(m) * p;
                            g(m) += p(m);
                            return Vec(g - lk.grad_x(x));
                          }};
        Vec s1 = box.lo;
        s1(m) = box.hi(m);
        Vec s2(n);
        for (Eigen::Index i = 0; i < n; ++i) s2(i) = -lk.lin(i) >= 0.0 ? box.hi(i) : box.lo(i);
        out.result = heuristic_inner_max(f, box, mix_seed(ctx.seed, K), {s1, s2}, ctx.options.ascent);
      }
    }
  }
  if (ctx.want_gradient && out.result.witness) out.grad_k = negated(lk.param_gradient(*out.result.witness));
  return out;
}

}  // namespace

DualEvaluation evaluate_dual(const VerificationProblem& problem, const MultiplierStack& stack,
                             const LayerBounds& bounds, EvalMode mode, const DualOptions& options,
                             DualState* state, std::uint64_t seed, MultiplierStack* gradient) {
  const std::size_t K = problem.net.num_layers();
  if (stack.depth() != K)
    throw ShapeError("multiplier stack has " + std::to_string(stack.depth()) + " entries, network has " +
                     std::to_string(K) + " layers");
  if (bounds.size() != K + 1) throw ShapeError("layer bounds do not match the network depth");
  const auto widths = problem.net.widths();
  for (std::size_t k = 1; k <= K; ++k)
    if (stack.at(k).dim() != widths[k])
      throw ShapeError("multiplier " + std::to_string(k) + " has the wrong width");
  if (state && state->duals.size() != K + 1) state->duals.assign(K + 1, {});

  const Context ctx{problem, stack, bounds, mode, options, state, seed, gradient != nullptr};
  std::vector<TermOut> terms(K + 1);
  parallel_for(K + 1, options.threads, [&](std::size_t k) {
    terms[k] = k < K ? middle_term(ctx, k) : final_term(ctx);
  });

  DualEvaluation ev;
  ev.mode = mode;
  ev.total = 0.0;
  for (std::size_t k = 0; k <= K; ++k) {
    if (mode == EvalMode::certify && terms[k].result.mode == SolveMode::heuristic_lower)
      throw NumericalError("heuristic solver used in certify mode");
    ev.values.push_back(terms[k].result.value);
    ev.total += terms[k].result.value;
    ev.results.push_back(std::move(terms[k].result));
  }
  if (gradient) {
    *gradient = stack.zeros_like();
    for (std::size_t k = 0; k <= K; ++k) {
      if (terms[k].grad_next) gradient->at(k + 1).add_scaled(*terms[k].grad_next, 1.0);
      if (terms[k].grad_k) gradient->at(k).add_scaled(*terms[k].grad_k, 1.0);
    }
  }
  return ev;
}

MultiplierStack subgradient(const VerificationProblem& problem, const MultiplierStack& stack,
                            const LayerBounds& bounds, std::uint64_t seed, const DualOptions& options,
                            DualState* state) {
  MultiplierStack g;
  evaluate_dual(problem, stack, bounds, EvalMode::train, options, state, seed, &g);
  return g;
}

std::vector<Family> family_layout(Family choice, std::size_t depth, const SpecObjective& objective,
                                  InputSet::Kind input) {
  if (depth == 0) throw StructureError("network has no layers");
  std::vector<Family> f(depth, Family::linear);
  switch (choice) {
    case Family::linear:
    case Family::zero:
      break;
    case Family::linexp:
      f[0] = Family::linexp;
      break;
    case Family::quadratic:
    case Family::diag_quadratic:
      std::fill(f.begin(), f.end(), Family::quadratic);
      if (!objective.is_linear()) f.back() = Family::diag_quadratic;
      if (input == InputSet::Kind::subgaussian) f[0] = Family::linear;
      break;
  }
  return f;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json bounds_to_json(const LayerBounds& b) {
  json out = json::array();
  for (const auto& box : b.boxes) out.push_back({{"lo", hex_vector(box.lo)}, {"hi", hex_vector(box.hi)}});
  return out;
}

json make_fingerprint(const VerificationProblem& p, const LayerBounds& b) {
  return {{"model", hex64(fnv1a64(model_to_json(p.net).dump()))},
          {"spec", hex64(fnv1a64(p.to_json().dump()))},
          {"bounds", hex64(fnv1a64(bounds_to_json(b).dump()))}};
}

json truncations(const CanonicalNetwork& net) {
  json out = json::array();
  for (const auto& layer : net.layers())
    out.push_back(layer.weights.kind == WeightDistribution::Kind::gaussian ? json(to_hex(layer.weights.truncation))
                                                                           : json(nullptr));
  return out;
}

}  // namespace

json Certificate::to_json() const {
  json j;
  j["problem"] = problem_name;
  j["bound"] = to_hex(bound);
  j["threshold"] = to_hex(threshold);
  j["verified"] = verified;
  j["last_certified"] = to_hex(last_certified);
  json tr = json::array();
  for (const auto& e : trace)
    tr.push_back({{"step", e.step},
                  {"train_value", to_hex(e.train_value)},
                  {"certified_value", e.certified_value ? json(to_hex(*e.certified_value)) : json(nullptr)}});
  j["trace"] = tr;
  j["multipliers"] = stack_to_json(multipliers);
  j["metadata"] = metadata;
  j["fingerprint"] = fingerprint;
  return j;
}

Certificate Certificate::from_json(const json& j) {
  try {
    Certificate c;
    c.problem_name = j.value("problem", std::string());
    c.bound = real_from_json(j.at("bound"));
    c.threshold = real_from_json(j.at("threshold"));
    c.verified = j.at("verified").get<bool>();
    c.last_certified = j.contains("last_certified") ? real_from_json(j.at("last_certified")) : c.bound;
    for (const auto& e : j.at("trace")) {
      TraceEntry t;
      t.step = e.at("step").get<int>();
      t.train_value = real_from_json(e.at("train_value"));
      if (!e.at("certified_value").is_null()) t.certified_value = real_from_json(e.at("certified_value"));
      c.trace.push_back(t);
    }
    c.multipliers = stack_from_json(j.at("multipliers"));
    c.metadata = j.value("metadata", json::object());
    c.fingerprint = j.value("fingerprint", json::object());
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("certificate: ") + e.what());
  }
}

Certificate optimize(const VerificationProblem& problem, Family family, const OptimizeConfig& config) {
  const auto families = family_layout(family, problem.net.num_layers(), problem.objective, problem.input.kind);
  InitOptions init = config.init;
  init.seed = mix_seed(config.seed, 0x5eed);
  MultiplierStack stack = init_stack(families, problem.net.widths(), init);
  return optimize(problem, std::move(stack), config, to_string(family));
}

Certificate optimize(const VerificationProblem& problem, MultiplierStack stack,
                     const OptimizeConfig& config, const std::string& family_name) {
  if (config.steps < 0) throw ValueError("steps must be nonnegative");
  if (config.certify_every < 1) throw ValueError("certify_every must be positive");
  if (config.decay_every < 1) throw ValueError("decay_every must be positive");
  problem.validate();
  const LayerBounds bounds = problem_bounds(problem);

  Certificate cert;
  cert.problem_name = problem.name;
  cert.threshold = problem.threshold;
  cert.bound = std::numeric_limits<double>::infinity();
  cert.multipliers = stack;

  DualState train_state, certify_state;
  Adam adam(stack.pack().size());
  bool stopped = false;

  auto certify = [&](const MultiplierStack& s) {
    const double v = evaluate_dual(problem, s, bounds, EvalMode::certify, config.dual, &certify_state).total;
    if (!std::isfinite(v)) throw NumericalError("certified dual value is not finite");
    cert.last_certified = v;
    if (v < cert.bound) {
      cert.bound = v;
      cert.multipliers = s;
    }
    return v;
  };

  int step = 0;
  for (; step < config.steps; ++step) {
    MultiplierStack grad;
    const DualEvaluation tr = evaluate_dual(problem, stack, bounds, EvalMode::train, config.dual,
                                            &train_state, mix_seed(config.seed, static_cast<std::uint64_t>(step)),
                                            &grad);
    TraceEntry entry{step, tr.total, std::nullopt};
    if (step % config.certify_every == 0) entry.certified_value = certify(stack);
    cert.trace.push_back(entry);
    if (config.early_stop && cert.bound <= problem.threshold) {
      stopped = true;
      break;
    }
    const double lr = config.lr * std::pow(config.decay_factor, static_cast<double>(step / config.decay_every));
    std::vector<double> params = stack.pack();
    adam.step(params, grad.pack(), lr);
    stack.unpack(params);
  }
  if (!stopped) {
    const DualEvaluation tr = evaluate_dual(problem, stack, bounds, EvalMode::train, config.dual,
                                            &train_state, mix_seed(config.seed, static_cast<std::uint64_t>(step)));
    cert.trace.push_back({step, tr.total, certify(stack)});
  }
  cert.verified = cert.bound <= problem.threshold;

  json meta;
  meta["family"] = family_name;
  meta["objective"] = problem.objective.is_linear() ? "logit_diff" : "expected_softmax";
  meta["input_set"] = problem.input.kind == InputSet::Kind::box ? "box" : "subgaussian";
  meta["noise_input_bound"] = "mgf_with_center_term";
  meta["gaussian_moments"] = "untruncated";
  meta["truncation_k"] = truncations(problem.net);
  meta["grid_n"] = config.dual.grid_n;
  meta["exact_cap"] = config.dual.exact_cap;
  meta["steps"] = config.steps;
  meta["steps_run"] = step;
  meta["lr"] = to_hex(config.lr);
  meta["decay_every"] = config.decay_every;
  meta["certify_every"] = config.certify_every;
  meta["seed"] = config.seed;
  cert.metadata = meta;
  cert.fingerprint = make_fingerprint(problem, bounds);
  return cert;
}

MultiplierStack lambda_star_affine(const CanonicalNetwork& net, const Vec& c) {
  const std::size_t K = net.num_layers();
  for (std::size_t k = 0; k < K; ++k) {
    const auto& layer = net.layer(k);
    if (layer.activation != Activation::identity)
      throw StructureError("lambda_star_affine needs identity activations throughout");
    if (!layer.is_deterministic()) throw StructureError("lambda_star_affine needs deterministic layers");
  }
  if (c.size() != net.output_dim()) throw ShapeError("objective width does not match the network output");
  MultiplierStack s;
  s.lambdas.resize(K);
  Vec theta = c;
  s.at(K) = Multiplier::linear(theta);
  for (std::size_t k = K - 1; k >= 1; --k) {
    theta = net.layer(k).weights.values.transpose() * theta;
    s.at(k) = Multiplier::linear(theta);
  }
  return s;
}

SampledValue estimate_objective(const VerificationProblem& problem, const Vec& x, int samples,
                                std::uint64_t seed) {
  SampledValue out;
  out.input = x;
  if (problem.net.is_deterministic() || samples <= 1) {
    out.value = problem.net.is_deterministic()
                    ? problem.objective.evaluate(forward_mean(problem.net, x))
                    : problem.objective.evaluate(forward_sample(problem.net, x, seed));
    return out;
  }
  std::mt19937_64 rng(seed);
  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double v = problem.objective.evaluate(forward_sample(problem.net, x, rng));
    sum += v;
    sq += v * v;
  }
  const double n = samples;
  out.value = sum / n;
  const double var = std::max(0.0, (sq - n * out.value * out.value) / (n - 1.0));
  out.standard_error = std::sqrt(var / n);
  return out;
}

namespace {

// E over noise (and weights) of psi(center + noise), one weight draw per noise draw.
SampledValue estimate_noise(const VerificationProblem& problem, int draws, std::uint64_t seed,
                            bool rademacher) {
  const InputSet& in = problem.input;
  const Box sup = in.support();
  const Eigen::Index d = in.center.size();
  Vec radius(d);
  for (Eigen::Index i = 0; i < d; ++i)
    radius(i) = std::max(0.0, std::min({in.epsilon, in.center(i) - sup.lo(i), sup.hi(i) - in.center(i)}));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  double sum = 0.0, sq = 0.0;
  for (int s = 0; s < draws; ++s) {
    Vec x = in.center;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (radius(i) == 0.0 || in.sigma == 0.0) continue;
      if (rademacher) {
        const double a = std::min(in.sigma, radius(i));
        x(i) += coin(rng) ? a : -a;
      } else {
        double z;
        do z = in.sigma * normal(rng);
        while (std::abs(z) > radius(i));
        x(i) += z;
      }
    }
    const double v = problem.objective.evaluate(
        problem.net.is_deterministic() ? forward_mean(problem.net, x) : forward_sample(problem.net, x, rng));
    sum += v;
    sq += v * v;
  }
  const double n = draws;
  SampledValue out;
  out.input = in.center;
  out.value = sum / n;
  out.standard_error = draws > 1 ? std::sqrt(std::max(0.0, (sq - n * out.value * out.value) / (n - 1.0)) / n) : 0.0;
  return out;
}

}  // namespace

SampledValue sample_lower_bound(const VerificationProblem& problem, const SampleOptions& options,
                                std::uint64_t seed) {
  const bool stochastic = !problem.net.is_deterministic();
  if (problem.input.kind == InputSet::Kind::subgaussian) {
    const int wdraws = stochastic ? options.weight_samples : 1;
    SampledValue best = estimate_objective(problem, problem.input.center, wdraws, mix_seed(seed, 1));
    const int draws = std::max(options.weight_samples, 1000);
    for (bool rad : {false, true}) {
      const SampledValue v = estimate_noise(problem, draws, mix_seed(seed, rad ? 3 : 2), rad);
      if (v.value > best.value) best = v;
    }
    return best;
  }

  const Box box = problem.input.support();
  const Eigen::Index d = box.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int screen = stochastic ? options.screen_samples : 1;
  const std::uint64_t crn = mix_seed(seed, 7);  // common random numbers while screening
  auto screen_value = [&](const Vec& x) { return estimate_objective(problem, x, screen, crn).value; };

  std::vector<std::pair<double, Vec>> cands;
  cands.reserve(static_cast<std::size_t>(std::max(1, options.n_inputs)));
  cands.push_back({screen_value(box.center()), box.center()});
  for (int s = 1; s < options.n_inputs; ++s) {
    Vec x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = box.lo(i) + unif(rng) * (box.hi(i) - box.lo(i));
    cands.push_back({screen_value(x), x});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  // coordinate hill climbing from the best screened point
  Vec x = cands.front().second;
  double fx = cands.front().first;
  Vec delta = 0.5 * box.radius();
  for (int it = 0; it < options.hill_steps && d > 0; ++it) {
    const Eigen::Index i = it % d;
    bool moved = false;
    for (double sgn : {1.0, -1.0}) {
      Vec y = x;
      y(i) = std::clamp(y(i) + sgn * delta(i), box.lo(i), box.hi(i));
      const double fy = screen_value(y);
      if (fy > fx) {
        x = y;
        fx = fy;
        moved = true;
        break;
      }
    }
    if (!moved && i == d - 1) delta *= 0.5;
  }

  if (!stochastic) {
    SampledValue out;
    out.value = fx;
    out.input = x;
    if (cands.front().first > fx) {
      out.value = cands.front().first;
      out.input = cands.front().second;
    }
    return out;
  }
  std::vector<Vec> finalists{x};
  for (int t = 0; t < options.refine_top && t < static_cast<int>(cands.size()); ++t)
    finalists.push_back(cands[static_cast<std::size_t>(t)].second);
  SampledValue best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < finalists.size(); ++t) {
    const SampledValue v = estimate_objective(problem, finalists[t], options.weight_samples, mix_seed(seed, 100 + t));
    if (v.value > best.value) best = v;
  }
  return best;
}

}  // namespace funlag
