#pragma once

#include "lookbo/common.hpp"
#include "lookbo/dataset.hpp"

#include <optional>
#include <utility>

namespace lookbo {

/// Product squared-exponential covariance over the joint action-time space:
///   k((x,t),(x',t')) = output_scale * exp(-|x-x'|^2 / (2 theta_x^2))
///                                   * exp(-(t-t')^2 / (2 theta_t^2)).
/// Throws std::invalid_argument on non-finite inputs.
double kernel_eval(const Point& xa, double ta, const Point& xb, double tb,
                   const Hyperparameters& hyp);

/// Derivative of kernel_eval with respect to xa.
Vector kernel_grad_x(const Point& xa, double ta, const Point& xb, double tb,
                     const Hyperparameters& hyp);

/// Log marginal likelihood of the raw targets under the given kernel:
///   -1/2 y^T (K + s2 I)^-1 y - 1/2 log det(K + s2 I) - n/2 log 2pi.
/// Requires n >= 1. Throws NumericalError if the covariance cannot be
/// factorized even after jitter escalation.
double log_marginal_likelihood(const Dataset& data, const Hyperparameters& hyp);

struct PosteriorMoments {
  double mean = 0.0;
  double variance = 0.0;
  double stddev() const { return std::sqrt(std::max(variance, 0.0)); }
};

struct GpOptions {
  // Diagonal jitter, relative to output_scale: the base amount is always
  // added; on factorization failure it doubles until max_jitter_rel.
  double base_jitter_rel = 1e-10;
  double max_jitter_rel = 1e-4;
  // Constant subtracted from targets before solving and re-added on
  // prediction. Defaults to the sample mean of the observations so the
  // zero-mean prior is tenable on uncentered data.
  std::optional<double> center;
};

/// Immutable conditioned GP posterior. Holds the lower-triangular factor L of
/// K_n + sigma_eps^2 I (plus jitter) and the pre-solved targets, so queries
/// are O(n) / O(n^2) and conditioning is an O(n^2) factor extension.
///
/// Safe to read from many threads; condition() returns a new value.
class FittedGP {
public:
  FittedGP(const Dataset& data, Hyperparameters hyp, GpOptions opts = {});

  int n() const { return static_cast<int>(records_.size()); }
  int dim() const { return dim_; }
  const Hyperparameters& hyperparameters() const { return hyp_; }
  const std::vector<Observation>& records() const { return records_; }
  double center() const { return center_; }
  double applied_jitter() const { return jitter_; }
  const Matrix& factor() const { return chol_; }

  /// Posterior mean and variance at (x, t); variance clipped to [0, inf).
  PosteriorMoments posterior(const Point& x, double t) const;

  /// New GP conditioned on one extra record (x, t, fantasized_y) via a
  /// rank-one extension of the factor; falls back to a full refactorization
  /// when the extension pivot degenerates. Requires t >= last time.
  FittedGP condition(const Point& x, double t, double fantasized_y) const;

  /// Analytic (d mean / d x, d stddev / d x) at fixed t. The stddev gradient
  /// is defined as zero where the posterior variance vanishes.
  std::pair<Vector, Vector> posterior_input_gradient(const Point& x, double t) const;

  /// Reparameterized draw mean + stddev * gamma (gamma supplied externally
  /// to support common random numbers).
  double sample_posterior(const Point& x, double t, double gamma) const;

  /// Covariances k_n between (x, t) and every record.
  Vector cross_covariances(const Point& x, double t) const;

  /// (K + s2 I)^-1 v via two triangular solves.
  Vector solve(const Vector& v) const;

  /// Pre-solved (K + s2 I)^-1 (y - center).
  const Vector& solved_targets() const { return alpha_; }

private:
  FittedGP() = default;

  void factorize();

  std::vector<Observation> records_;
  Hyperparameters hyp_;
  GpOptions opts_;
  int dim_ = 0;
  double center_ = 0.0;
  double jitter_ = 0.0;
  Matrix chol_;   // lower triangular, n x n
  Vector alpha_;  // (K + s2 I)^-1 (y - center)
};

/// Helper for the two-step machinery: all quantities of the one-point
/// fantasy update at a fixed conditioning input u = (x_new, t_new), amortized
/// across many horizon queries.
///
/// With v = sigma_n^2(u) + noise and a fantasy draw y = mu_n(u) + s * gamma,
/// the updated moments at a query q are
///   mu_{n,1}(q)      = mu_n(q) + cov_n(q,u) * s * gamma / v
///   sigma_{n,1}^2(q) = sigma_n^2(q) - cov_n(q,u)^2 / v,
/// where cov_n(q,u) is the posterior covariance and s^2 is v with or without
/// the observation-noise term depending on the sampling mode.
class FantasyUpdate {
public:
  FantasyUpdate(const FittedGP& gp, const Point& x_new, double t_new,
                bool observation_noise_in_draw);

  double predictive_mean() const { return mean_u_; }
  double draw_stddev() const { return s_; }            // sampling std of y
  double conditioned_variance() const { return v_; }   // denominator v

  /// Fantasy posterior moments at (xq, tq) given standard-normal draw gamma.
  PosteriorMoments moments_at(const Point& xq, double tq, double gamma) const;

  /// Gradient with respect to the conditioning input x_new of the fantasy
  /// mean and stddev at a fixed query (envelope treatment: the query does
  /// not move). Returned as (d mean / d x_new, d stddev / d x_new).
  std::pair<Vector, Vector> input_gradients_at(const Point& xq, double tq,
                                               double gamma) const;

private:
  const FittedGP* gp_;
  Point x_new_;
  double t_new_;
  Vector b_;        // k_n(u)
  Vector a_inv_b_;  // (K + s2 I)^-1 b
  Matrix db_dx_;    // n x d, derivative of b wrt x_new
  double mean_u_ = 0.0;
  double var_u_ = 0.0;   // posterior variance at u (clipped)
  double v_ = 0.0;       // var_u + model noise (+ jitter floor)
  double s_ = 0.0;       // sampling std
  Vector dvar_dx_;       // d sigma_n^2(u) / d x_new
};

struct FitBounds {
  std::pair<double, double> theta_x{1e-2, 10.0};
  std::pair<double, double> theta_t{1e-2, 10.0};
  std::pair<double, double> noise_variance{1e-8, 1.0};
  std::pair<double, double> output_scale{1e-2, 1e2};
};

struct FitOptions {
  FitBounds bounds;
  int n_starts = 8;          // log-uniform multistart over the bounds
  int max_iterations = 60;
  double gradient_tolerance = 1e-5;
  bool fit_noise = true;          // false: pin noise_variance
  bool fit_output_scale = true;   // false: pin output_scale
  double pinned_noise_variance = 1e-3;
  double pinned_output_scale = 1.0;
  std::optional<Hyperparameters> warm_start;  // evaluated before the random starts
  bool center_data = true;
};

struct FitResult {
  Hyperparameters hyp;
  double log_marginal = -std::numeric_limits<double>::infinity();
  double center = 0.0;
  // False when no optimizer start improved on its initial value; the best
  // start is still returned.
  bool improved = false;
};

/// Maximizes the (centered-data) log marginal likelihood over the bounds by
/// multistart projected quasi-newton ascent in log-parameter space.
/// Requires n >= 2.
FitResult fit_hyperparameters(const Dataset& data, const FitOptions& opts, Rng& rng);

}  // namespace lookbo
