#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lookbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A location in the normalized action space [0,1]^d.
using Point = Eigen::VectorXd;

/// Thrown when linear algebra breaks down (non-PD covariance after max jitter, etc.).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown on ask/tell misuse (tell before ask, ask past the schedule, ...).
class ProtocolError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an oracle evaluation fails (bad reply, timeout, nonzero exit).
class OracleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double norm_pdf(double z) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double norm_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Mixes an arbitrary list of integers into a single well-dispersed seed.
/// Used for the (base_seed, replication, strategy, step) derivation scheme so
/// that every cell of an experiment grid gets an independent stream.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x8e51ecbb6e2b3e07ULL;
  for (std::uint64_t p : parts) {
    state ^= p + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2);
    (void)detail::splitmix64(state);
  }
  return detail::splitmix64(state);
}

inline std::uint64_t hash_string(const std::string& s) {
  // FNV-1a; stable across platforms, unlike std::hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic random stream with platform-independent uniform and normal
/// draws (std::*_distribution are implementation-defined, so we avoid them).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller on the portable uniform.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = normal();
    return out;
  }

  Point uniform_point(int dim) {
    Point p(dim);
    for (int i = 0; i < dim; ++i) p[i] = uniform();
    return p;
  }

  /// Derives an independent child stream. Children with distinct tags never
  /// collide, regardless of how many draws the parent has consumed.
  Rng child(std::uint64_t tag) const {
    return Rng(derive_seed({seed_, tag}));
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace lookbo
