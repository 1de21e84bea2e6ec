#pragma once

#include "lookbo/common.hpp"

#include <functional>

namespace lookbo {

/// Forward-mode scalar carrying a fixed subgradient convention through
/// nondifferentiable primitives: abs takes the right branch at 0, max takes
/// its first argument at ties. Probing expressions built from these
/// primitives therefore returns one well-defined member of the
/// subdifferential, reproducibly.
struct Dual {
  double v = 0.0;
  Vector g;

  Dual() = default;
  Dual(double value, Vector grad) : v(value), g(std::move(grad)) {}
};

inline Dual dual_const(double value, int dim) { return {value, Vector::Zero(dim)}; }

inline Dual dual_var(double value, int dim, int index) {
  Vector g = Vector::Zero(dim);
  g[index] = 1.0;
  return {value, std::move(g)};
}

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.g + b.g}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.g - b.g}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.g}; }
inline Dual operator*(const Dual& a, const Dual& b) {
  return {a.v * b.v, a.v * b.g + b.v * a.g};
}
inline Dual operator*(double c, const Dual& a) { return {c * a.v, c * a.g}; }
inline Dual operator*(const Dual& a, double c) { return c * a; }
inline Dual operator+(const Dual& a, double c) { return {a.v + c, a.g}; }
inline Dual operator+(double c, const Dual& a) { return a + c; }
inline Dual operator-(const Dual& a, double c) { return {a.v - c, a.g}; }
inline Dual operator-(double c, const Dual& a) { return {c - a.v, -a.g}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  return {a.v / b.v, (a.g * b.v - a.v * b.g) / (b.v * b.v)};
}

inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.g}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.g}; }
inline Dual exp(const Dual& a) { return {std::exp(a.v), std::exp(a.v) * a.g}; }
inline Dual log(const Dual& a) { return {std::log(a.v), a.g / a.v}; }
inline Dual sqrt(const Dual& a) {
  const double r = std::sqrt(a.v);
  return {r, a.g / (2.0 * r)};
}

/// |a| with the right branch (slope +1) at the kink.
inline Dual abs(const Dual& a) {
  const double slope = a.v >= 0.0 ? 1.0 : -1.0;
  return {std::abs(a.v), slope * a.g};
}

/// max(a, b); at a tie the first argument's branch is taken.
inline Dual max(const Dual& a, const Dual& b) {
  return a.v >= b.v ? a : b;
}

using DualField = std::function<Dual(const std::vector<Dual>&)>;

/// Evaluates a piecewise-differentiable expression at x and returns the
/// subdifferential member selected by the conventions above.
inline Vector subgradient_probe(const DualField& f, const Point& x) {
  const int d = static_cast<int>(x.size());
  std::vector<Dual> vars;
  vars.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) vars.push_back(dual_var(x[i], d, i));
  return f(vars).g;
}

}  // namespace lookbo
