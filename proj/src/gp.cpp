#include "lookbo/gp.hpp"

#include "lookbo/optimize.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lookbo {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_query(const Point& x, double t) {
  if (!x.allFinite() || !std::isfinite(t)) {
    throw std::invalid_argument("gp: non-finite query input");
  }
}

struct Factorization {
  Matrix chol;
  double jitter = 0.0;
};

// Cholesky of K + (noise + jitter) I with jitter escalation: the base amount
// is always present, doubling on failure until the relative cap.
Factorization factorize_covariance(const std::vector<Observation>& records,
                                   const Hyperparameters& hyp,
                                   double base_jitter_rel, double max_jitter_rel) {
  const int n = static_cast<int>(records.size());
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = kernel_eval(records[static_cast<std::size_t>(i)].x,
                                   records[static_cast<std::size_t>(i)].t,
                                   records[static_cast<std::size_t>(j)].x,
                                   records[static_cast<std::size_t>(j)].t, hyp);
      k(i, j) = v;
      k(j, i) = v;
    }
  }

  const double max_jitter = max_jitter_rel * hyp.output_scale;
  double jitter = base_jitter_rel * hyp.output_scale;
  while (true) {
    Matrix a = k;
    a.diagonal().array() += hyp.noise_variance + jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      return {Matrix(llt.matrixL()), jitter};
    }
    jitter *= 2.0;
    if (jitter > max_jitter) {
      std::ostringstream msg;
      msg << "gp: covariance factorization failed after jitter escalation to "
          << jitter << " (n=" << n << ", noise_variance=" << hyp.noise_variance
          << ", theta_x=" << hyp.theta_x << ", theta_t=" << hyp.theta_t
          << ", min diag=" << k.diagonal().minCoeff()
          << ", max offdiag=" << (n > 1 ? (k - Matrix(k.diagonal().asDiagonal())).maxCoeff() : 0.0)
          << ")";
      throw NumericalError(msg.str());
    }
  }
}

Vector triangular_solve(const Matrix& l, const Vector& v) {
  return l.triangularView<Eigen::Lower>().solve(v);
}

}  // namespace

double kernel_eval(const Point& xa, double ta, const Point& xb, double tb,
                   const Hyperparameters& hyp) {
  hyp.validate();
  if (!xa.allFinite() || !xb.allFinite() || !std::isfinite(ta) || !std::isfinite(tb)) {
    throw std::invalid_argument("kernel_eval: non-finite input");
  }
  if (xa.size() != xb.size()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  }
  const double dx2 = (xa - xb).squaredNorm();
  const double dt = ta - tb;
  return hyp.output_scale *
         std::exp(-dx2 / (2.0 * hyp.theta_x * hyp.theta_x)) *
         std::exp(-dt * dt / (2.0 * hyp.theta_t * hyp.theta_t));
}

Vector kernel_grad_x(const Point& xa, double ta, const Point& xb, double tb,
                     const Hyperparameters& hyp) {
  const double k = kernel_eval(xa, ta, xb, tb, hyp);
  return (k / (hyp.theta_x * hyp.theta_x)) * (xb - xa);
}

double log_marginal_likelihood(const Dataset& data, const Hyperparameters& hyp) {
  hyp.validate();
  if (data.size() < 1) {
    throw std::invalid_argument("log_marginal_likelihood: need n >= 1");
  }
  GpOptions opts;
  Factorization f = factorize_covariance(data.records(), hyp,
                                         opts.base_jitter_rel, opts.max_jitter_rel);
  const Vector y = data.targets();
  const Vector w = triangular_solve(f.chol, y);
  const double quad = w.squaredNorm();
  const double logdet = 2.0 * f.chol.diagonal().array().log().sum();
  return -0.5 * quad - 0.5 * logdet - 0.5 * data.size() * kLog2Pi;
}

FittedGP::FittedGP(const Dataset& data, Hyperparameters hyp, GpOptions opts)
    : records_(data.records()), hyp_(std::move(hyp)), opts_(std::move(opts)) {
  hyp_.validate();
  dim_ = data.dim();
  center_ = opts_.center.value_or(data.mean_observed());
  factorize();
}

void FittedGP::factorize() {
  const int n = this->n();
  if (n == 0) {
    chol_.resize(0, 0);
    alpha_.resize(0);
    jitter_ = 0.0;
    return;
  }
  Factorization f = factorize_covariance(records_, hyp_, opts_.base_jitter_rel,
                                         opts_.max_jitter_rel);
  chol_ = std::move(f.chol);
  jitter_ = f.jitter;
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = records_[static_cast<std::size_t>(i)].y - center_;
  alpha_ = solve(y);
}

Vector FittedGP::cross_covariances(const Point& x, double t) const {
  check_query(x, t);
  Vector k(n());
  for (int i = 0; i < n(); ++i) {
    k[i] = kernel_eval(x, t, records_[static_cast<std::size_t>(i)].x,
                       records_[static_cast<std::size_t>(i)].t, hyp_);
  }
  return k;
}

Vector FittedGP::solve(const Vector& v) const {
  Vector w = triangular_solve(chol_, v);
  return chol_.triangularView<Eigen::Lower>().transpose().solve(w);
}

PosteriorMoments FittedGP::posterior(const Point& x, double t) const {
  check_query(x, t);
  if (n() == 0) return {center_, hyp_.output_scale};
  const Vector k = cross_covariances(x, t);
  const Vector w = triangular_solve(chol_, k);
  PosteriorMoments m;
  m.mean = center_ + k.dot(alpha_);
  m.variance = std::max(0.0, hyp_.output_scale - w.squaredNorm());
  return m;
}

double FittedGP::sample_posterior(const Point& x, double t, double gamma) const {
  const PosteriorMoments m = posterior(x, t);
  return m.mean + m.stddev() * gamma;
}

FittedGP FittedGP::condition(const Point& x, double t, double fantasized_y) const {
  check_query(x, t);
  if (!std::isfinite(fantasized_y)) {
    throw std::invalid_argument("condition: non-finite fantasized value");
  }
  if (n() > 0 && x.size() != dim_) {
    throw std::invalid_argument("condition: dimension mismatch");
  }
  if (n() > 0 && t < records_.back().t) {
    throw std::invalid_argument("condition: new time precedes the last observation");
  }

  FittedGP out;
  out.records_ = records_;
  out.records_.push_back({x, t, fantasized_y});
  out.hyp_ = hyp_;
  out.opts_ = opts_;
  out.opts_.center = center_;  // conditioning never re-centers
  out.dim_ = n() == 0 ? static_cast<int>(x.size()) : dim_;
  out.center_ = center_;

  const int n_old = n();
  if (n_old == 0) {
    out.factorize();
    return out;
  }

  const Vector b = cross_covariances(x, t);
  const Vector l = triangular_solve(chol_, b);
  const double kappa = hyp_.output_scale + hyp_.noise_variance + jitter_;
  const double pivot2 = kappa - l.squaredNorm();
  if (!(pivot2 > 1e-12 * kappa)) {
    // Degenerate extension; refactorize the augmented system from scratch.
    out.factorize();
    return out;
  }

  out.chol_ = Matrix::Zero(n_old + 1, n_old + 1);
  out.chol_.topLeftCorner(n_old, n_old) = chol_;
  out.chol_.row(n_old).head(n_old) = l.transpose();
  out.chol_(n_old, n_old) = std::sqrt(pivot2);
  out.jitter_ = jitter_;

  Vector y(n_old + 1);
  for (int i = 0; i <= n_old; ++i) {
    y[i] = out.records_[static_cast<std::size_t>(i)].y - center_;
  }
  out.alpha_ = out.solve(y);
  return out;
}

std::pair<Vector, Vector> FittedGP::posterior_input_gradient(const Point& x,
                                                             double t) const {
  check_query(x, t);
  const int d = n() == 0 ? static_cast<int>(x.size()) : dim_;
  if (n() == 0) return {Vector::Zero(d), Vector::Zero(d)};

  const Vector k = cross_covariances(x, t);
  Matrix jac(n(), d);  // d k_i / d x
  for (int i = 0; i < n(); ++i) {
    jac.row(i) = kernel_grad_x(x, t, records_[static_cast<std::size_t>(i)].x,
                               records_[static_cast<std::size_t>(i)].t, hyp_)
                     .transpose();
  }
  Vector dmean = jac.transpose() * alpha_;

  const Vector a_inv_k = solve(k);
  const double variance = std::max(0.0, hyp_.output_scale - k.dot(a_inv_k));
  Vector dstd = Vector::Zero(d);
  if (variance > 0.0) {
    const Vector dvar = -2.0 * (jac.transpose() * a_inv_k);
    dstd = dvar / (2.0 * std::sqrt(variance));
  }
  return {std::move(dmean), std::move(dstd)};
}

FantasyUpdate::FantasyUpdate(const FittedGP& gp, const Point& x_new, double t_new,
                             bool observation_noise_in_draw)
    : gp_(&gp), x_new_(x_new), t_new_(t_new) {
  check_query(x_new, t_new);
  const auto& hyp = gp.hyperparameters();
  const int n = gp.n();
  const int d = static_cast<int>(x_new.size());

  b_ = gp.cross_covariances(x_new, t_new);
  a_inv_b_ = n > 0 ? gp.solve(b_) : Vector();
  db_dx_.resize(n, d);
  for (int i = 0; i < n; ++i) {
    db_dx_.row(i) = kernel_grad_x(x_new, t_new, gp.records()[static_cast<std::size_t>(i)].x,
                                  gp.records()[static_cast<std::size_t>(i)].t, hyp)
                        .transpose();
  }

  const double var_raw = hyp.output_scale - (n > 0 ? b_.dot(a_inv_b_) : 0.0);
  var_u_ = std::max(0.0, var_raw);
  mean_u_ = gp.center() + (n > 0 ? b_.dot(gp.solved_targets()) : 0.0);

  // The conditioned system adds noise + jitter to the new diagonal entry, so
  // the update denominator uses the raw (unclipped) variance for exact
  // agreement with FittedGP::condition.
  const double jitter = n > 0 ? gp.applied_jitter()
                              : GpOptions{}.base_jitter_rel * hyp.output_scale;
  v_ = var_raw + hyp.noise_variance + jitter;
  s_ = std::sqrt(var_u_ + (observation_noise_in_draw ? hyp.noise_variance : 0.0));
  dvar_dx_ = n > 0 ? Vector(-2.0 * (db_dx_.transpose() * a_inv_b_))
                   : Vector(Vector::Zero(d));
}

PosteriorMoments FantasyUpdate::moments_at(const Point& xq, double tq,
                                           double gamma) const {
  const PosteriorMoments base = gp_->posterior(xq, tq);
  const Vector kq = gp_->cross_covariances(xq, tq);
  const double cov =
      kernel_eval(xq, tq, x_new_, t_new_, gp_->hyperparameters()) -
      (gp_->n() > 0 ? kq.dot(a_inv_b_) : 0.0);
  PosteriorMoments out;
  out.mean = base.mean + cov * s_ * gamma / v_;
  out.variance = std::max(0.0, base.variance - cov * cov / v_);
  return out;
}

std::pair<Vector, Vector> FantasyUpdate::input_gradients_at(const Point& xq, double tq,
                                                            double gamma) const {
  const auto& hyp = gp_->hyperparameters();
  const int d = static_cast<int>(x_new_.size());
  const Vector kq = gp_->cross_covariances(xq, tq);
  const double cov = kernel_eval(xq, tq, x_new_, t_new_, hyp) -
                     (gp_->n() > 0 ? kq.dot(a_inv_b_) : 0.0);

  // d cov_n(q,u) / d x_new; the direct kernel term differentiates in the
  // second argument, which is the first argument of kernel_grad_x here.
  Vector dcov = kernel_grad_x(x_new_, t_new_, xq, tq, hyp);
  if (gp_->n() > 0) {
    const Vector a_inv_kq = gp_->solve(kq);
    dcov -= db_dx_.transpose() * a_inv_kq;
  }

  const double var_q = std::max(0.0, gp_->posterior(xq, tq).variance);
  const double sigma1_sq = var_q - cov * cov / v_;
  const double sigma1 = std::sqrt(std::max(0.0, sigma1_sq));

  Vector ds = Vector::Zero(d);
  if (s_ > 0.0) ds = dvar_dx_ / (2.0 * s_);  // d s / d x: s^2 = var_u (+ const)

  // mean update m(q) = mu_n(q) + cov * s * gamma / v, with dv/dx = dvar/dx.
  Vector dmean = (gamma / v_) * (dcov * s_ + cov * ds) -
                 (gamma * cov * s_ / (v_ * v_)) * dvar_dx_;

  Vector dstd = Vector::Zero(d);
  if (sigma1 > 0.0) {
    dstd = (-cov / v_ * dcov + (cov * cov) / (2.0 * v_ * v_) * dvar_dx_) / sigma1;
  }
  return {std::move(dmean), std::move(dstd)};
}

namespace {

// Log marginal likelihood of centered targets plus its gradient with respect
// to the active log-parameters. Returns -inf when the proposal cannot be
// factorized, which the line search treats as a rejected step.
struct LmlWorkspace {
  Matrix dist2_x;
  Matrix dist2_t;
  Vector y;  // centered targets
  int n = 0;
};

double lml_and_grad(const LmlWorkspace& ws, const Hyperparameters& hyp,
                    bool fit_noise, bool fit_output_scale, Vector* grad) {
  const int n = ws.n;
  const double tx2 = hyp.theta_x * hyp.theta_x;
  const double tt2 = hyp.theta_t * hyp.theta_t;
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = hyp.output_scale *
                       std::exp(-0.5 * ws.dist2_x(i, j) / tx2 - 0.5 * ws.dist2_t(i, j) / tt2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  Matrix a = k;
  a.diagonal().array() += hyp.noise_variance + 1e-10 * hyp.output_scale;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();

  const Vector alpha = llt.solve(ws.y);
  const Matrix l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double lml = -0.5 * ws.y.dot(alpha) - 0.5 * logdet - 0.5 * n * kLog2Pi;

  if (grad != nullptr) {
    const Matrix a_inv = llt.solve(Matrix::Identity(n, n));
    const Matrix w = alpha * alpha.transpose() - a_inv;

    // dA/d theta_x = K .* dist2_x / theta_x^3, and log-space multiplies by theta.
    const double d_tx = 0.5 * (w.array() * k.array() * ws.dist2_x.array()).sum() /
                        (tx2 * hyp.theta_x);
    const double d_tt = 0.5 * (w.array() * k.array() * ws.dist2_t.array()).sum() /
                        (tt2 * hyp.theta_t);
    int idx = 0;
    grad->resize(2 + (fit_noise ? 1 : 0) + (fit_output_scale ? 1 : 0));
    (*grad)[idx++] = d_tx * hyp.theta_x;
    (*grad)[idx++] = d_tt * hyp.theta_t;
    if (fit_noise) {
      (*grad)[idx++] = 0.5 * w.trace() * hyp.noise_variance;  // dA/ds2 = I
    }
    if (fit_output_scale) {
      // dA/d os = K / os (jitter term ignored at 1e-10 relative).
      (*grad)[idx++] = 0.5 * (w.array() * k.array()).sum();
    }
  }
  return lml;
}

}  // namespace

FitResult fit_hyperparameters(const Dataset& data, const FitOptions& opts, Rng& rng) {
  if (data.size() < 2) {
    throw std::invalid_argument("fit_hyperparameters: need n >= 2");
  }
  const int n = data.size();

  LmlWorkspace ws;
  ws.n = n;
  ws.dist2_x.resize(n, n);
  ws.dist2_t.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      ws.dist2_x(i, j) = (data[i].x - data[j].x).squaredNorm();
      const double dt = data[i].t - data[j].t;
      ws.dist2_t(i, j) = dt * dt;
    }
  }
  const double center = opts.center_data ? data.mean_observed() : 0.0;
  ws.y = (data.targets().array() - center).matrix();

  const bool fn = opts.fit_noise;
  const bool fo = opts.fit_output_scale;
  const int p = 2 + (fn ? 1 : 0) + (fo ? 1 : 0);

  Box box;
  box.lo.resize(p);
  box.hi.resize(p);
  int idx = 0;
  auto set_bound = [&](const std::pair<double, double>& b) {
    box.lo[idx] = std::log(b.first);
    box.hi[idx] = std::log(b.second);
    ++idx;
  };
  set_bound(opts.bounds.theta_x);
  set_bound(opts.bounds.theta_t);
  if (fn) set_bound(opts.bounds.noise_variance);
  if (fo) set_bound(opts.bounds.output_scale);

  auto to_hyp = [&](const Point& q) {
    Hyperparameters h;
    int i = 0;
    h.theta_x = std::exp(q[i++]);
    h.theta_t = std::exp(q[i++]);
    h.noise_variance = fn ? std::exp(q[i++]) : opts.pinned_noise_variance;
    h.output_scale = fo ? std::exp(q[i++]) : opts.pinned_output_scale;
    return h;
  };

  Objective objective = [&](const Point& q, Vector* grad) {
    return lml_and_grad(ws, to_hyp(q), fn, fo, grad);
  };

  OptimizerConfig cfg;
  cfg.max_iterations = opts.max_iterations;
  cfg.gradient_tolerance = opts.gradient_tolerance;
  cfg.bounds = box;

  std::vector<Point> starts;
  if (opts.warm_start) {
    Point q(p);
    int i = 0;
    q[i++] = std::log(opts.warm_start->theta_x);
    q[i++] = std::log(opts.warm_start->theta_t);
    if (fn) q[i++] = std::log(std::max(opts.warm_start->noise_variance, opts.bounds.noise_variance.first));
    if (fo) q[i++] = std::log(opts.warm_start->output_scale);
    starts.push_back(box.project(q));
  }
  for (int s = 0; s < opts.n_starts; ++s) {
    Point q(p);
    for (int i2 = 0; i2 < p; ++i2) q[i2] = rng.uniform(box.lo[i2], box.hi[i2]);
    starts.push_back(q);
  }

  FitResult result;
  result.center = center;
  bool have = false;
  for (const auto& start : starts) {
    LocalAscentResult r = local_ascent(objective, start, box, cfg);
    if (!std::isfinite(r.value)) continue;
    if (r.iterations > 0) result.improved = true;
    if (!have || r.value > result.log_marginal) {
      result.log_marginal = r.value;
      result.hyp = to_hyp(r.x);
      have = true;
    }
  }
  if (!have) {
    throw NumericalError("fit_hyperparameters: every start failed to factorize");
  }
  return result;
}

}  // namespace lookbo
