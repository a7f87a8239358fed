#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace funlag {

// Pads an upper bound against rounding in its own evaluation. `magnitude` is
// the size of the largest terms summed into v.
inline double round_up(double v, double magnitude) {
  if (!std::isfinite(v)) return v;
  return v + 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(v) + std::abs(magnitude));
}

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // params -= lr * adam_direction(grad)
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct ScalarMin {
  double arg = 0.0;
  double value = 0.0;
};

// Golden-section search for a unimodal function on [lo, hi]. The returned
// point is the best one evaluated (endpoints included).
ScalarMin golden_section_min(const std::function<double(double)>& f, double lo, double hi,
                             int iterations = 80);

struct ConcaveMax {
  double arg = 0.0;    // best point found
  double value = 0.0;  // f(arg), a lower bound on the maximum
  double upper = 0.0;  // certified upper bound on the maximum
};

// Maximizes a concave f on [lo, hi]; the upper bound comes from the tangent
// line at the best point, f(a) + max(f'(a)(lo - a), f'(a)(hi - a)).
ConcaveMax concave_max_certified(const std::function<double(double)>& f,
                                 const std::function<double(double)>& df, double lo, double hi,
                                 int iterations = 100);

struct AffinePiece {
  double slope = 0.0;
  double intercept = 0.0;
};

// Minimizes max_k (slope_k x + intercept_k) over x in R. Requires pieces with
// both signs of slope (or a zero slope) so that the minimum is finite.
ScalarMin min_max_affine(const std::vector<AffinePiece>& pieces);

}  // namespace funlag
