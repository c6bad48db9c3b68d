#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace sparseids {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double two_pi = 6.283185307179586476925286766559;

// stable for |x| up to at least 1e2 in both directions
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// d softplus / dx
inline double softplus_grad(double x) { return sigmoid(x); }

// max-subtracted, sums to exactly the normalized weights
inline Vec softmax(const Vec& z) {
  const double m = z.maxCoeff();
  Vec e = (z.array() - m).exp();
  return e / e.sum();
}

inline double logsumexp(const Vec& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

// log-normal with underlying normal(mu, sigma); sigma > 0 enforced at the call sites
inline double lognormal_sample(double mu, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) throw std::invalid_argument("lognormal_sample: sigma must be > 0");
  std::normal_distribution<double> n(0.0, 1.0);
  double z = mu + sigma * n(rng);
  // exp of an unbounded draw overflows long before the action range matters
  z = std::clamp(z, -40.0, 40.0);
  return std::exp(z);
}

inline double lognormal_log_density(double x, double mu, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("lognormal_log_density: sigma must be > 0");
  if (x <= 0.0) throw std::invalid_argument("lognormal_log_density: x must be > 0");
  const double d = std::log(x) - mu;
  return -std::log(x) - std::log(sigma) - 0.5 * std::log(two_pi) - d * d / (2.0 * sigma * sigma);
}

// differential entropy: mu + ln(sigma) + 0.5 ln(2 pi e)
inline double lognormal_entropy(double mu, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("lognormal_entropy: sigma must be > 0");
  return mu + std::log(sigma) + 0.5 * std::log(two_pi * std::exp(1.0));
}

// mean of the distribution, used for deployment-mode action selection;
// exponent clamped like sampling so extreme heads yield a huge finite skip
inline double lognormal_mean(double mu, double sigma) {
  return std::exp(std::clamp(mu + 0.5 * sigma * sigma, -40.0, 40.0));
}

// round half away from zero, the convention used by every count-style calibration
inline long long round_half_away(double x) {
  return static_cast<long long>(x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

// splitmix64 mix, used to derive independent per-item rng seeds from one run seed
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace sparseids
