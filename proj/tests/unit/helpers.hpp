#pragma once

#include <random>

#include "doctest.h"
#include "funlag/model.hpp"

namespace th {

using funlag::Mat;
using funlag::Vec;

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.begin()->size());
  Mat out(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double x : row) out(i, j++) = x;
    ++i;
  }
  return out;
}

inline funlag::CanonicalLayer det_layer(const Mat& w, const Vec& b,
                                        funlag::Activation s = funlag::Activation::identity) {
  funlag::CanonicalLayer L;
  L.activation = s;
  L.weights = funlag::WeightDistribution::deterministic(w);
  L.bias = funlag::WeightDistribution::deterministic(b);
  return L;
}

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace th
