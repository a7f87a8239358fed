#include "funlag/bounds.hpp"

#include <algorithm>

#include "funlag/errors.hpp"

namespace funlag {

Box::Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw ShapeError("box bounds differ in length");
  if (!lo.allFinite() || !hi.allFinite()) throw ValueError("box bounds must be finite");
  if ((lo.array() > hi.array()).any()) throw ValueError("box has lo > hi");
}

bool Box::contains(const Vec& x) const {
  return x.size() == lo.size() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

bool Box::contains(const Box& other) const {
  return other.size() == size() && (other.lo.array() >= lo.array()).all() &&
         (other.hi.array() <= hi.array()).all();
}

IntervalMatrix weight_support(const WeightDistribution& w) {
  IntervalMatrix out;
  switch (w.kind) {
    case WeightDistribution::Kind::deterministic:
      out.lo = w.values;
      out.hi = w.values;
      break;
    case WeightDistribution::Kind::gaussian:
      out.lo = w.values - w.truncation * w.stddev;
      out.hi = w.values + w.truncation * w.stddev;
      break;
    case WeightDistribution::Kind::dropout:
      out.lo.resize(w.rows(), w.cols());
      out.hi.resize(w.rows(), w.cols());
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          const double v = w.values(i, j);
          const double p = w.keep(i, j);
          if (p <= 0.0) {
            out.lo(i, j) = out.hi(i, j) = 0.0;
          } else if (p >= 1.0) {
            out.lo(i, j) = out.hi(i, j) = v;
          } else {
            out.lo(i, j) = std::min(0.0, v);
            out.hi(i, j) = std::max(0.0, v);
          }
        }
      }
      break;
  }
  return out;
}

Box interval_affine(const Box& x, const IntervalMatrix& w, const Box& b) {
  if (w.lo.cols() != x.size() || w.lo.rows() != b.size())
    throw ShapeError("interval_affine: shapes do not compose");
  const Eigen::Index rows = w.lo.rows();
  Vec lo = b.lo;
  Vec hi = b.hi;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double c1 = w.lo(i, j) * x.lo(j);
      const double c2 = w.lo(i, j) * x.hi(j);
      const double c3 = w.hi(i, j) * x.lo(j);
      const double c4 = w.hi(i, j) * x.hi(j);
      lo(i) += std::min({c1, c2, c3, c4});
      hi(i) += std::max({c1, c2, c3, c4});
    }
  }
  return Box(std::move(lo), std::move(hi));
}

Box interval_activation(const Box& x, Activation s) {
  if (s == Activation::identity) return x;
  return Box(x.lo.cwiseMax(0.0), x.hi.cwiseMax(0.0));
}

LayerBounds propagate_intervals(const CanonicalNetwork& net, const Box& input_box) {
  if (input_box.size() != net.input_dim())
    throw ShapeError("input box has " + std::to_string(input_box.size()) +
                     " entries, network expects " + std::to_string(net.input_dim()));
  LayerBounds bounds;
  bounds.boxes.push_back(input_box);
  for (const auto& layer : net.layers()) {
    const auto bias = weight_support(layer.bias);
    const Box b(bias.lo.col(0), bias.hi.col(0));
    bounds.boxes.push_back(interval_affine(interval_activation(bounds.boxes.back(), layer.activation),
                                           weight_support(layer.weights), b));
  }
  return bounds;
}

}  // namespace funlag
