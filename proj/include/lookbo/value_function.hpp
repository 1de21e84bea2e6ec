#pragma once

#include "lookbo/common.hpp"
#include "lookbo/dataset.hpp"
#include "lookbo/gp.hpp"
#include "lookbo/optimize.hpp"

namespace lookbo {

enum class ValueKind { Identity, PI, EI, UCB };

enum class TargetPolicy { Fixed, BestObserved, PosteriorMeanMax };

/// Choice of the horizon utility: which closed form to evaluate on the
/// posterior moments and how its target parameter is resolved.
struct ValueFunctionSpec {
  ValueKind kind = ValueKind::Identity;
  TargetPolicy target_policy = TargetPolicy::BestObserved;  // PI and EI only
  double fixed_target = 0.0;                                // Fixed policy
  double beta = 2.0;                                        // UCB only

  bool needs_target() const { return kind == ValueKind::PI || kind == ValueKind::EI; }

  void validate() const {
    if (kind == ValueKind::UCB && !(beta > 0.0)) {
      throw std::invalid_argument("ValueFunctionSpec: UCB requires beta > 0");
    }
    if (!std::isfinite(fixed_target) || !std::isfinite(beta)) {
      throw std::invalid_argument("ValueFunctionSpec: non-finite parameter");
    }
  }
};

struct TargetContext {
  double resolved_target = 0.0;
  double resolution_time = 0.0;
};

/// Resolves the improvement target: Fixed passes through, BestObserved takes
/// the running best observation, PosteriorMeanMax maximizes the posterior
/// mean at time t by multistart ascent (32 starts).
TargetContext resolve_target(const ValueFunctionSpec& spec, const FittedGP& gp,
                             const Dataset& data, double t, Rng& rng);

/// Closed form on given moments. sigma = 0 uses the degenerate limits:
/// EI -> max(mu - xi, 0), PI -> {0, 0.5, 1} by sign of mu - xi, UCB -> mu.
double value_from_moments(double mu, double sigma, const ValueFunctionSpec& spec,
                          double target);

/// (d value / d mu, d value / d sigma) at the given moments; at sigma = 0 the
/// partials of the degenerate form, with ties resolved toward the first
/// branch of the corresponding max().
std::pair<double, double> value_moment_partials(double mu, double sigma,
                                                const ValueFunctionSpec& spec,
                                                double target);

/// upsilon(x, T): the chosen closed form on the posterior at (x, T).
double evaluate_value(const FittedGP& gp, const Point& x, double T,
                      const ValueFunctionSpec& spec, const TargetContext& ctx);

/// Gradient of evaluate_value with respect to x.
Vector value_gradient(const FittedGP& gp, const Point& x, double T,
                      const ValueFunctionSpec& spec, const TargetContext& ctx);

/// Maximum of the posterior mean over the unit box at time t; the knowledge
/// gradient subtrahend and the PosteriorMeanMax resolver.
std::pair<Point, double> max_posterior_mean(const FittedGP& gp, double t, Rng& rng,
                                            int n_starts = 32);

}  // namespace lookbo
