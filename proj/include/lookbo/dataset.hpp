#pragma once

#include "lookbo/common.hpp"

#include <limits>
#include <vector>

namespace lookbo {

/// Kernel + noise parameters of the surrogate. Length-scales are shared
/// across action coordinates; time gets its own scale.
struct Hyperparameters {
  double theta_x = 0.5;        // action length-scale, > 0
  double theta_t = 1.0;        // time length-scale, > 0
  double noise_variance = 1e-3;  // observation noise variance, >= 0
  double output_scale = 1.0;   // prior amplitude k((x,t),(x,t)), > 0

  void validate() const {
    if (!(theta_x > 0.0) || !std::isfinite(theta_x) ||
        !(theta_t > 0.0) || !std::isfinite(theta_t) ||
        !(noise_variance >= 0.0) || !std::isfinite(noise_variance) ||
        !(output_scale > 0.0) || !std::isfinite(output_scale)) {
      throw std::invalid_argument("Hyperparameters: require theta_x>0, theta_t>0, "
                                  "noise_variance>=0, output_scale>0, all finite");
    }
  }
};

struct Observation {
  Point x;
  double t = 0.0;
  double y = 0.0;
};

/// Ordered history of observations. Times must be strictly increasing: the
/// oracle can be queried once per time, never in the past.
class Dataset {
public:
  Dataset() = default;

  explicit Dataset(std::vector<Observation> records) {
    for (auto& r : records) append(std::move(r));
  }

  void append(Observation obs) {
    if (obs.x.size() < 1) throw std::invalid_argument("Dataset: point must have dimension >= 1");
    if (!obs.x.allFinite() || !std::isfinite(obs.t) || !std::isfinite(obs.y)) {
      throw std::invalid_argument("Dataset: non-finite observation");
    }
    if (!records_.empty()) {
      if (obs.x.size() != records_.front().x.size()) {
        throw std::invalid_argument("Dataset: inconsistent point dimension");
      }
      if (obs.t <= records_.back().t) {
        throw std::invalid_argument("Dataset: times must be strictly increasing");
      }
    }
    records_.push_back(std::move(obs));
  }

  int size() const { return static_cast<int>(records_.size()); }
  bool empty() const { return records_.empty(); }
  int dim() const { return records_.empty() ? 0 : static_cast<int>(records_.front().x.size()); }

  const Observation& operator[](int i) const { return records_[static_cast<std::size_t>(i)]; }
  const std::vector<Observation>& records() const { return records_; }

  double last_time() const {
    return records_.empty() ? -std::numeric_limits<double>::infinity() : records_.back().t;
  }

  double max_observed() const {
    if (records_.empty()) throw std::invalid_argument("Dataset: max_observed on empty dataset");
    double best = records_.front().y;
    for (const auto& r : records_) best = std::max(best, r.y);
    return best;
  }

  double mean_observed() const {
    if (records_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records_) s += r.y;
    return s / static_cast<double>(records_.size());
  }

  Vector targets() const {
    Vector y(size());
    for (int i = 0; i < size(); ++i) y[i] = records_[static_cast<std::size_t>(i)].y;
    return y;
  }

private:
  std::vector<Observation> records_;
};

}  // namespace lookbo
