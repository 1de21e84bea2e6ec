#include "lookbo/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace lookbo {

namespace {

// Infinity norm of the projected gradient step P(x + g) - x; the natural
// stationarity measure on a box.
double projected_gradient_norm(const Point& x, const Vector& g, const Box& box) {
  return (box.project(x + g) - x).lpNorm<Eigen::Infinity>();
}

struct Correction {
  Vector s;
  Vector y;
  double rho;
};

// Two-loop recursion on the minimization form (phi = -f), returning an
// ascent direction for f.
Vector lbfgs_direction(const Vector& grad_f, const std::deque<Correction>& mem) {
  Vector q = -grad_f;  // gradient of phi
  std::vector<double> alpha(mem.size());
  for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
    const auto& c = mem[static_cast<std::size_t>(i)];
    alpha[static_cast<std::size_t>(i)] = c.rho * c.s.dot(q);
    q -= alpha[static_cast<std::size_t>(i)] * c.y;
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    const double gamma = last.s.dot(last.y) / last.y.squaredNorm();
    q *= gamma;
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& c = mem[i];
    const double beta = c.rho * c.y.dot(q);
    q += (alpha[i] - beta) * c.s;
  }
  return -q;  // descent direction for phi == ascent direction for f
}

}  // namespace

LocalAscentResult local_ascent(const Objective& f, const Point& start,
                               const Box& box, const OptimizerConfig& cfg) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 40;

  LocalAscentResult res;
  Point x = box.project(start);
  Vector g(x.size());
  double fx = f(x, &g);
  if (!std::isfinite(fx)) {
    res.x = x;
    res.value = fx;
    return res;
  }

  std::deque<Correction> mem;
  bool any_step = false;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (projected_gradient_norm(x, g, box) <= cfg.gradient_tolerance) break;

    Vector dir = lbfgs_direction(g, mem);
    if (!dir.allFinite() || dir.dot(g) <= 0.0) dir = g;  // safeguard: steepest ascent

    double step = 1.0;
    bool accepted = false;
    Point x_new;
    Vector g_new(x.size());
    double f_new = 0.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_new = box.project(x + step * dir);
      const Vector dx = x_new - x;
      if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;  // direction blocked by the box
      f_new = f(x_new, &g_new);
      if (std::isfinite(f_new) && f_new >= fx + kArmijo * g.dot(dx)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // monotone search found no increase

    Vector s = x_new - x;
    Vector yv = g - g_new;  // curvature pair in minimization form
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      mem.push_back({std::move(s), std::move(yv), 1.0 / sy});
      if (static_cast<int>(mem.size()) > cfg.lbfgs_memory) mem.pop_front();
    }
    x = std::move(x_new);
    g = std::move(g_new);
    fx = f_new;
    any_step = true;
    res.iterations = iter + 1;
  }

  res.x = std::move(x);
  res.value = fx;
  res.stationary_start = !any_step &&
      projected_gradient_norm(res.x, g, box) <= cfg.gradient_tolerance;
  return res;
}

MaximizeResult multistart_maximize(const Objective& f, int dim,
                                   const OptimizerConfig& cfg, Rng& rng) {
  if (cfg.n_starts < 1) throw std::invalid_argument("multistart_maximize: n_starts >= 1");
  const Box box = cfg.bounds ? *cfg.bounds : Box::unit(dim);

  MaximizeResult best;
  bool have_best = false;
  bool all_stationary = true;
  Point first_start;
  double first_start_value = 0.0;
  bool have_first = false;
  int discarded = 0;

  for (int s = 0; s < cfg.n_starts; ++s) {
    Point start = cfg.start_sampler ? cfg.start_sampler(rng) : [&] {
      Point p(box.dim());
      for (int i = 0; i < box.dim(); ++i) p[i] = rng.uniform(box.lo[i], box.hi[i]);
      return p;
    }();
    start = box.project(start);

    LocalAscentResult r = local_ascent(f, start, box, cfg);
    if (!std::isfinite(r.value)) {
      ++discarded;
      all_stationary = false;
      continue;
    }
    if (!have_first) {
      // For a stationary start r.x == start and r.value == f(start).
      first_start = start;
      first_start_value = r.value;
      have_first = true;
    }
    if (!r.stationary_start) all_stationary = false;
    if (!have_best || r.value > best.max) {
      best.argmax = r.x;
      best.max = r.value;
      best.best_start = s;
      have_best = true;
    }
  }

  if (!have_best) {
    throw NumericalError("multistart_maximize: all " + std::to_string(discarded) +
                         " starts produced non-finite objective values");
  }
  if (all_stationary && have_first) {
    // Constant-looking objective: report the first start, which is a draw
    // from the start distribution.
    best.argmax = first_start;
    best.max = first_start_value;
    best.flat = true;
    best.best_start = 0;
  }
  return best;
}

}  // namespace lookbo
