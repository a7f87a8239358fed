#pragma once

#include <vector>

#include "funlag/model.hpp"

namespace funlag {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_);
  static Box point(const Vec& x) { return Box(x, x); }

  Eigen::Index size() const { return lo.size(); }
  Interval operator[](Eigen::Index i) const { return {lo(i), hi(i)}; }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec radius() const { return 0.5 * (hi - lo); }
  bool contains(const Vec& x) const;
  bool contains(const Box& other) const;
};

struct IntervalMatrix {
  Mat lo;
  Mat hi;
};

/// Boxes for the activations x_0..x_K; boxes[0] is the input support.
struct LayerBounds {
  std::vector<Box> boxes;

  const Box& operator[](std::size_t k) const { return boxes.at(k); }
  std::size_t size() const { return boxes.size(); }
};

IntervalMatrix weight_support(const WeightDistribution& w);
Box interval_affine(const Box& x, const IntervalMatrix& w, const Box& b);
Box interval_activation(const Box& x, Activation s);
LayerBounds propagate_intervals(const CanonicalNetwork& net, const Box& input_box);

}  // namespace funlag
