#include "sparseids/baseline_samplers.hpp"

#include <algorithm>

#include "sparseids/errors.hpp"
#include "sparseids/math.hpp"

namespace sparseids {

namespace {

void check_rate(double p) {
  if (!(p > 0.0) || p > 1.0) throw config_error("sampling rate must be in (0,1]");
}

void check_len(int n) {
  if (n < 1) throw config_error("flow length must be >= 1");
}

}  // namespace

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "rl") return PolicyKind::rl;
  if (name == "random") return PolicyKind::random_iid;
  if (name == "relative-first-m") return PolicyKind::relative_first_m;
  if (name == "first-m") return PolicyKind::first_m;
  if (name == "every-ith") return PolicyKind::every_ith;
  throw config_error("unknown sampling policy '" + name +
                     "' (expected rl, random, relative-first-m, first-m, every-ith)");
}

std::string policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::rl: return "rl";
    case PolicyKind::random_iid: return "random";
    case PolicyKind::relative_first_m: return "relative-first-m";
    case PolicyKind::first_m: return "first-m";
    case PolicyKind::every_ith: return "every-ith";
  }
  throw config_error("unknown sampling policy kind");
}

std::vector<char> random_mask(int n, double p, std::mt19937_64& rng) {
  check_len(n);
  check_rate(p);
  std::vector<char> mask(static_cast<size_t>(n), 0);
  mask[0] = 1;
  if (n == 1) return mask;
  // packet 0 is free, so the remaining draws are adjusted to keep E[fraction] = p
  const double adjusted = std::clamp((p * n - 1.0) / (n - 1.0), 0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 1; i < n; ++i) mask[static_cast<size_t>(i)] = u(rng) < adjusted ? 1 : 0;
  return mask;
}

std::vector<char> relative_first_m_mask(int n, double p) {
  check_len(n);
  check_rate(p);
  const long long m = std::max(1LL, round_half_away(n * p));
  std::vector<char> mask(static_cast<size_t>(n), 0);
  for (int i = 0; i < n && i < m; ++i) mask[static_cast<size_t>(i)] = 1;
  return mask;
}

std::vector<char> first_m_mask(int n, double p, double avg_len) {
  check_len(n);
  check_rate(p);
  if (!(avg_len > 0.0)) throw config_error("first-m requires a positive average flow length");
  const long long m = std::max(1LL, round_half_away(avg_len * p));
  std::vector<char> mask(static_cast<size_t>(n), 0);
  for (int i = 0; i < n && i < m; ++i) mask[static_cast<size_t>(i)] = 1;
  return mask;
}

std::vector<char> every_ith_mask(int n, double p) {
  check_len(n);
  check_rate(p);
  const long long stride = std::max(1LL, round_half_away(1.0 / p));
  std::vector<char> mask(static_cast<size_t>(n), 0);
  for (long long i = 0; i < n; i += stride) mask[static_cast<size_t>(i)] = 1;
  return mask;
}

std::vector<char> make_mask(const SamplingPolicy& policy, int n, std::mt19937_64& rng) {
  switch (policy.kind) {
    case PolicyKind::random_iid: return random_mask(n, policy.rate, rng);
    case PolicyKind::relative_first_m: return relative_first_m_mask(n, policy.rate);
    case PolicyKind::first_m: return first_m_mask(n, policy.rate, policy.avg_len);
    case PolicyKind::every_ith: return every_ith_mask(n, policy.rate);
    case PolicyKind::rl: break;
  }
  throw config_error("the rl policy selects packets adaptively and has no precomputed mask");
}

}  // namespace sparseids
