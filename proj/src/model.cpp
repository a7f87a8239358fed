#include "funlag/model.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "funlag/errors.hpp"

namespace funlag {

using nlohmann::json;

const char* to_string(Activation s) { return s == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw SchemaError("unknown activation '" + name + "'");
}

Vec apply_activation(Activation s, const Vec& x) {
  if (s == Activation::identity) return x;
  return x.cwiseMax(0.0);
}

WeightDistribution WeightDistribution::deterministic(Mat values) {
  WeightDistribution w;
  w.kind = Kind::deterministic;
  w.values = std::move(values);
  return w;
}

WeightDistribution WeightDistribution::gaussian(Mat mean, Mat stddev, double truncation) {
  WeightDistribution w;
  w.kind = Kind::gaussian;
  w.values = std::move(mean);
  w.stddev = std::move(stddev);
  w.truncation = truncation;
  return w;
}

WeightDistribution WeightDistribution::dropout(Mat values, Mat keep) {
  WeightDistribution w;
  w.kind = Kind::dropout;
  w.values = std::move(values);
  w.keep = std::move(keep);
  return w;
}

Mat WeightDistribution::mean() const {
  if (kind == Kind::dropout) return values.cwiseProduct(keep);
  return values;
}

Mat WeightDistribution::variance() const {
  switch (kind) {
    case Kind::gaussian:
      return stddev.cwiseProduct(stddev);
    case Kind::dropout:
      return values.cwiseProduct(values).cwiseProduct(keep).cwiseProduct(
          (1.0 - keep.array()).matrix());
    default:
      return Mat::Zero(values.rows(), values.cols());
  }
}

bool WeightDistribution::is_random() const {
  switch (kind) {
    case Kind::gaussian:
      return (stddev.array() > 0.0).any();
    case Kind::dropout:
      return ((keep.array() > 0.0) && (keep.array() < 1.0) && (values.array() != 0.0)).any();
    default:
      return false;
  }
}

void WeightDistribution::validate(const std::string& where) const {
  if (!values.allFinite()) throw ValueError(where + ": non-finite entry");
  if (kind == Kind::gaussian) {
    if (stddev.rows() != values.rows() || stddev.cols() != values.cols())
      throw ShapeError(where + ": stddev shape differs from mean shape");
    if (!stddev.allFinite()) throw ValueError(where + ": non-finite stddev");
    if ((stddev.array() < 0.0).any()) throw ValueError(where + ": negative stddev");
    if (!std::isfinite(truncation) || truncation <= 0.0)
      throw ValueError(where + ": truncation must be positive");
  } else if (kind == Kind::dropout) {
    if (keep.rows() != values.rows() || keep.cols() != values.cols())
      throw ShapeError(where + ": keep shape differs from value shape");
    if (!keep.allFinite() || (keep.array() < 0.0).any() || (keep.array() > 1.0).any())
      throw ValueError(where + ": keep probability outside [0,1]");
  }
}

CanonicalNetwork::CanonicalNetwork(std::vector<CanonicalLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw StructureError("network has no layers");
  if (layers_.front().activation != Activation::identity)
    throw StructureError("layer 0 must use the identity activation");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const std::string where = "layer " + std::to_string(k);
    l.weights.validate(where + " weights");
    l.bias.validate(where + " bias");
    if (l.bias.rows() != l.weights.rows() || l.bias.cols() != 1)
      throw ShapeError(where + ": bias length " + std::to_string(l.bias.rows()) +
                       " does not match " + std::to_string(l.weights.rows()) + " outputs");
    if (l.weights.rows() == 0 || l.weights.cols() == 0) throw ShapeError(where + ": empty weights");
    if (k > 0 && l.in_dim() != layers_[k - 1].out_dim())
      throw ShapeError(where + ": expects " + std::to_string(l.in_dim()) + " inputs but layer " +
                       std::to_string(k - 1) + " produces " +
                       std::to_string(layers_[k - 1].out_dim()));
  }
}

std::vector<Eigen::Index> CanonicalNetwork::widths() const {
  std::vector<Eigen::Index> w;
  w.reserve(layers_.size() + 1);
  w.push_back(input_dim());
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

bool CanonicalNetwork::is_deterministic() const {
  for (const auto& l : layers_)
    if (!l.is_deterministic()) return false;
  return true;
}

RawLayer RawLayer::affine(WeightDistribution w, WeightDistribution b) {
  RawLayer r;
  r.kind = Kind::affine;
  r.weights = std::move(w);
  r.bias = std::move(b);
  return r;
}

RawLayer RawLayer::act(Activation s) {
  RawLayer r;
  r.kind = Kind::activation;
  r.activation = s;
  return r;
}

CanonicalNetwork normalize_layers(const std::vector<RawLayer>& raw) {
  if (raw.empty()) throw StructureError("empty layer list");
  if (raw.front().kind != RawLayer::Kind::affine)
    throw StructureError("layer list must begin with an affine map");
  if (raw.back().kind != RawLayer::Kind::affine)
    throw StructureError("trailing activation has no affine map to fuse with");

  std::vector<CanonicalLayer> out;
  Activation pending = Activation::identity;
  bool have_pending = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (r.kind == RawLayer::Kind::activation) {
      if (have_pending)
        throw StructureError("two consecutive activations at position " + std::to_string(i));
      pending = r.activation;
      have_pending = true;
      continue;
    }
    if (!have_pending && !out.empty())
      throw StructureError("two consecutive affine maps at position " + std::to_string(i));
    CanonicalLayer layer;
    layer.activation = have_pending ? pending : Activation::identity;
    layer.weights = r.weights;
    layer.bias = r.bias;
    out.push_back(std::move(layer));
    have_pending = false;
  }
  return CanonicalNetwork(std::move(out));
}

std::vector<RawLayer> to_raw_layers(const CanonicalNetwork& net) {
  std::vector<RawLayer> raw;
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const auto& l = net.layer(k);
    if (k > 0) raw.push_back(RawLayer::act(l.activation));
    raw.push_back(RawLayer::affine(l.weights, l.bias));
  }
  return raw;
}

namespace {

void require_keys(const json& obj, const std::set<std::string>& required,
                  const std::set<std::string>& optional, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": expected an object");
  for (const auto& key : required)
    if (!obj.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!required.count(it.key()) && !optional.count(it.key()))
      throw SchemaError(where + ": unexpected field '" + it.key() + "'");
}

double read_real(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValueError(where + ": non-finite value");
  return d;
}

Mat read_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw SchemaError(where + ": expected a non-empty 2-D array");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array()) throw SchemaError(where + ": expected a 2-D array");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw SchemaError(where + ": expected a 2-D array");
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ShapeError(where + ": ragged rows");
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = read_real(row[static_cast<std::size_t>(j)], where);
  }
  return m;
}

Mat read_vector(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw SchemaError(where + ": expected a non-empty array");
  Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i)
    m(static_cast<Eigen::Index>(i), 0) = read_real(v[i], where);
  return m;
}

WeightDistribution read_distribution(const json& obj, bool vector_shaped, const std::string& where) {
  if (!obj.is_object() || !obj.contains("kind"))
    throw SchemaError(where + ": missing field 'kind'");
  const auto& kind_v = obj.at("kind");
  if (!kind_v.is_string()) throw SchemaError(where + ": 'kind' must be a string");
  const std::string kind = kind_v.get<std::string>();
  auto read = [&](const char* key) {
    const std::string w = where + "." + key;
    return vector_shaped ? read_vector(obj.at(key), w) : read_matrix(obj.at(key), w);
  };
  WeightDistribution d;
  if (kind == "deterministic") {
    require_keys(obj, {"kind", "values"}, {}, where);
    d = WeightDistribution::deterministic(read("values"));
  } else if (kind == "gaussian") {
    require_keys(obj, {"kind", "mean", "stddev"}, {"truncation"}, where);
    const double k = obj.contains("truncation") ? read_real(obj.at("truncation"), where) : 3.0;
    d = WeightDistribution::gaussian(read("mean"), read("stddev"), k);
  } else if (kind == "dropout") {
    require_keys(obj, {"kind", "values", "keep"}, {}, where);
    d = WeightDistribution::dropout(read("values"), read("keep"));
  } else {
    throw SchemaError(where + ": unknown kind '" + kind + "'");
  }
  d.validate(where);
  return d;
}

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Mat& m) {
  json v = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) v.push_back(m(i, 0));
  return v;
}

json distribution_json(const WeightDistribution& d, bool vector_shaped) {
  auto put = [&](const Mat& m) { return vector_shaped ? vector_json(m) : matrix_json(m); };
  json out;
  switch (d.kind) {
    case WeightDistribution::Kind::deterministic:
      out["kind"] = "deterministic";
      out["values"] = put(d.values);
      break;
    case WeightDistribution::Kind::gaussian:
      out["kind"] = "gaussian";
      out["mean"] = put(d.values);
      out["stddev"] = put(d.stddev);
      out["truncation"] = d.truncation;
      break;
    case WeightDistribution::Kind::dropout:
      out["kind"] = "dropout";
      out["values"] = put(d.values);
      out["keep"] = put(d.keep);
      break;
  }
  return out;
}

}  // namespace

CanonicalNetwork parse_model(const json& doc) {
  require_keys(doc, {"input_dim", "layers"}, {}, "model");
  const auto& in = doc.at("input_dim");
  if (!in.is_number_integer() || in.get<long long>() <= 0)
    throw SchemaError("model.input_dim must be a positive integer");
  const auto& layers_v = doc.at("layers");
  if (!layers_v.is_array() || layers_v.empty())
    throw SchemaError("model.layers must be a non-empty array");

  std::vector<CanonicalLayer> layers;
  for (std::size_t k = 0; k < layers_v.size(); ++k) {
    const std::string where = "model.layers[" + std::to_string(k) + "]";
    const auto& lv = layers_v[k];
    require_keys(lv, {"activation", "weights", "bias"}, {}, where);
    if (!lv.at("activation").is_string()) throw SchemaError(where + ".activation must be a string");
    CanonicalLayer layer;
    layer.activation = activation_from_string(lv.at("activation").get<std::string>());
    layer.weights = read_distribution(lv.at("weights"), false, where + ".weights");
    layer.bias = read_distribution(lv.at("bias"), true, where + ".bias");
    layers.push_back(std::move(layer));
  }
  CanonicalNetwork net(std::move(layers));
  if (net.input_dim() != in.get<long long>())
    throw ShapeError("model.input_dim is " + std::to_string(in.get<long long>()) +
                     " but layer 0 expects " + std::to_string(net.input_dim()));
  return net;
}

CanonicalNetwork load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("malformed model file '" + path.string() + "': " + e.what());
  }
  return parse_model(doc);
}

json model_to_json(const CanonicalNetwork& net) {
  json doc;
  doc["input_dim"] = net.input_dim();
  json layers = json::array();
  for (const auto& l : net.layers()) {
    json lv;
    lv["activation"] = to_string(l.activation);
    lv["weights"] = distribution_json(l.weights, false);
    lv["bias"] = distribution_json(l.bias, true);
    layers.push_back(std::move(lv));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

double sample_entry(const WeightDistribution& w, Eigen::Index i, Eigen::Index j,
                    std::mt19937_64& rng) {
  switch (w.kind) {
    case WeightDistribution::Kind::gaussian: {
      const double mu = w.values(i, j);
      const double sd = w.stddev(i, j);
      if (sd == 0.0) return mu;
      std::normal_distribution<double> normal(0.0, 1.0);
      for (;;) {
        const double z = normal(rng);
        if (std::abs(z) <= w.truncation) return mu + sd * z;
      }
    }
    case WeightDistribution::Kind::dropout: {
      const double p = w.keep(i, j);
      if (p >= 1.0) return w.values(i, j);
      if (p <= 0.0) return 0.0;
      std::bernoulli_distribution keep(p);
      return keep(rng) ? w.values(i, j) : 0.0;
    }
    default:
      return w.values(i, j);
  }
}

SampledLayer sample_layer(const CanonicalLayer& layer, std::mt19937_64& rng) {
  SampledLayer s;
  s.weights.resize(layer.out_dim(), layer.in_dim());
  s.bias.resize(layer.out_dim());
  for (Eigen::Index i = 0; i < layer.out_dim(); ++i)
    for (Eigen::Index j = 0; j < layer.in_dim(); ++j)
      s.weights(i, j) = sample_entry(layer.weights, i, j, rng);
  for (Eigen::Index i = 0; i < layer.out_dim(); ++i) s.bias(i) = sample_entry(layer.bias, i, 0, rng);
  return s;
}

Vec forward_sample(const CanonicalNetwork& net, const Vec& x, std::mt19937_64& rng) {
  if (x.size() != net.input_dim())
    throw ShapeError("input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(net.input_dim()));
  Vec h = x;
  for (const auto& layer : net.layers()) {
    Vec a = apply_activation(layer.activation, h);
    if (layer.is_deterministic()) {
      h = layer.weights.mean() * a + layer.bias.mean().col(0);
    } else {
      const auto s = sample_layer(layer, rng);
      h = s.weights * a + s.bias;
    }
  }
  return h;
}

Vec forward_sample(const CanonicalNetwork& net, const Vec& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return forward_sample(net, x, rng);
}

Vec forward_mean(const CanonicalNetwork& net, const Vec& x) {
  if (x.size() != net.input_dim()) throw ShapeError("input dimension mismatch");
  Vec h = x;
  for (const auto& layer : net.layers())
    h = layer.weights.mean() * apply_activation(layer.activation, h) + layer.bias.mean().col(0);
  return h;
}

Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

SoftmaxEstimate mean_softmax_estimate(const CanonicalNetwork& net, const Vec& x, int n_samples,
                                      std::uint64_t seed) {
  if (n_samples < 1) throw ValueError("n_samples must be at least 1");
  const Eigen::Index l = net.output_dim();
  if (net.is_deterministic()) {
    SoftmaxEstimate est;
    est.probabilities = softmax(forward_mean(net, x));
    est.standard_error = Vec::Zero(l);
    return est;
  }
  std::mt19937_64 rng(seed);
  Vec sum = Vec::Zero(l);
  Vec sum_sq = Vec::Zero(l);
  for (int s = 0; s < n_samples; ++s) {
    const Vec p = softmax(forward_sample(net, x, rng));
    sum += p;
    sum_sq += p.cwiseProduct(p);
  }
  SoftmaxEstimate est;
  const double n = n_samples;
  est.probabilities = sum / n;
  est.standard_error = Vec::Zero(l);
  if (n_samples > 1) {
    for (Eigen::Index i = 0; i < l; ++i) {
      const double var = std::max(0.0, (sum_sq(i) - n * est.probabilities(i) * est.probabilities(i)) / (n - 1.0));
      est.standard_error(i) = std::sqrt(var / n);
    }
  }
  return est;
}

}  // namespace funlag
