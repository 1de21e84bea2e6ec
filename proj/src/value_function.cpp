#include "lookbo/value_function.hpp"

#include <cmath>

namespace lookbo {

std::pair<Point, double> max_posterior_mean(const FittedGP& gp, double t, Rng& rng,
                                            int n_starts) {
  const int d = gp.dim() > 0 ? gp.dim() : 1;
  Objective mean_field = [&](const Point& x, Vector* grad) {
    if (grad != nullptr) *grad = gp.posterior_input_gradient(x, t).first;
    return gp.posterior(x, t).mean;
  };
  OptimizerConfig cfg;
  cfg.n_starts = n_starts;
  MaximizeResult r = multistart_maximize(mean_field, d, cfg, rng);
  return {r.argmax, r.max};
}

TargetContext resolve_target(const ValueFunctionSpec& spec, const FittedGP& gp,
                             const Dataset& data, double t, Rng& rng) {
  spec.validate();
  TargetContext ctx;
  ctx.resolution_time = t;
  switch (spec.target_policy) {
    case TargetPolicy::Fixed:
      ctx.resolved_target = spec.fixed_target;
      break;
    case TargetPolicy::BestObserved:
      if (data.empty()) {
        throw std::invalid_argument("resolve_target: BestObserved needs n >= 1");
      }
      ctx.resolved_target = data.max_observed();
      break;
    case TargetPolicy::PosteriorMeanMax:
      ctx.resolved_target = max_posterior_mean(gp, t, rng).second;
      break;
  }
  return ctx;
}

double value_from_moments(double mu, double sigma, const ValueFunctionSpec& spec,
                          double target) {
  switch (spec.kind) {
    case ValueKind::Identity:
      return mu;
    case ValueKind::PI: {
      if (sigma <= 0.0) {
        if (mu > target) return 1.0;
        if (mu < target) return 0.0;
        return 0.5;  // continuous tie-break at mu == target
      }
      return norm_cdf((mu - target) / sigma);
    }
    case ValueKind::EI: {
      if (sigma <= 0.0) return std::max(mu - target, 0.0);
      const double z = (mu - target) / sigma;
      return std::max(0.0, sigma * (z * norm_cdf(z) + norm_pdf(z)));
    }
    case ValueKind::UCB:
      return mu + std::sqrt(spec.beta) * sigma;
  }
  throw std::logic_error("value_from_moments: unknown kind");
}

std::pair<double, double> value_moment_partials(double mu, double sigma,
                                                const ValueFunctionSpec& spec,
                                                double target) {
  switch (spec.kind) {
    case ValueKind::Identity:
      return {1.0, 0.0};
    case ValueKind::PI: {
      if (sigma <= 0.0) return {0.0, 0.0};  // piecewise-constant limit
      const double z = (mu - target) / sigma;
      const double phi = norm_pdf(z);
      return {phi / sigma, -phi * z / sigma};
    }
    case ValueKind::EI: {
      if (sigma <= 0.0) {
        // Limit max(mu - target, 0); the first branch wins the tie.
        return {mu >= target ? 1.0 : 0.0, 0.0};
      }
      const double z = (mu - target) / sigma;
      return {norm_cdf(z), norm_pdf(z)};
    }
    case ValueKind::UCB:
      return {1.0, std::sqrt(spec.beta)};
  }
  throw std::logic_error("value_moment_partials: unknown kind");
}

double evaluate_value(const FittedGP& gp, const Point& x, double T,
                      const ValueFunctionSpec& spec, const TargetContext& ctx) {
  const PosteriorMoments m = gp.posterior(x, T);
  return value_from_moments(m.mean, m.stddev(), spec, ctx.resolved_target);
}

Vector value_gradient(const FittedGP& gp, const Point& x, double T,
                      const ValueFunctionSpec& spec, const TargetContext& ctx) {
  const PosteriorMoments m = gp.posterior(x, T);
  const auto [dmu, dstd] = gp.posterior_input_gradient(x, T);
  const auto [v_mu, v_sigma] = value_moment_partials(m.mean, m.stddev(), spec,
                                                     ctx.resolved_target);
  return v_mu * dmu + v_sigma * dstd;
}

}  // namespace lookbo
