#pragma once

#include "lookbo/common.hpp"

#include <functional>
#include <optional>

namespace lookbo {

/// Objective callback: returns f(x) and, when grad != nullptr, writes the
/// gradient into *grad (resized by the callee).
using Objective = std::function<double(const Point& x, Vector* grad)>;

struct Box {
  Vector lo;
  Vector hi;

  static Box unit(int dim) {
    Box b;
    b.lo = Vector::Zero(dim);
    b.hi = Vector::Ones(dim);
    return b;
  }
  int dim() const { return static_cast<int>(lo.size()); }
  Point project(const Point& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
};

struct OptimizerConfig {
  int n_starts = 16;
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  int lbfgs_memory = 8;
  // Feasible box; unset means the unit cube of the objective's dimension.
  std::optional<Box> bounds;
  // Start distribution p_x; unset means uniform on the box.
  std::function<Point(Rng&)> start_sampler;
};

struct LocalAscentResult {
  Point x;
  double value = 0.0;
  int iterations = 0;
  // True when the start already satisfied the gradient tolerance and no step
  // was accepted, i.e. the objective looked locally constant.
  bool stationary_start = false;
};

/// Projected L-BFGS ascent with a monotone backtracking line search.
/// Accepted iterates never decrease the objective.
LocalAscentResult local_ascent(const Objective& f, const Point& start,
                               const Box& box, const OptimizerConfig& cfg);

struct MaximizeResult {
  Point argmax;
  double max = 0.0;
  // All starts were stationary with gradients under tolerance: the returned
  // point is the first sampled start, i.e. a draw from the start distribution.
  bool flat = false;
  int best_start = 0;
};

/// Best-of-n-starts local ascent over the box. Ties between equal-valued
/// starts break toward the lowest start index. Starts with a non-finite
/// objective value are discarded; if every start is discarded, throws
/// NumericalError. If the objective is flat at every start (gradient below
/// tolerance, no accepted step anywhere), the first sampled start is
/// returned so that a constant objective yields a p_x draw.
MaximizeResult multistart_maximize(const Objective& f, int dim,
                                   const OptimizerConfig& cfg, Rng& rng);

}  // namespace lookbo
