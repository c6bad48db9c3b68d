#pragma once

#include <random>
#include <string>
#include <vector>

namespace sparseids {

enum class PolicyKind { rl, random_iid, relative_first_m, first_m, every_ith };

PolicyKind parse_policy_kind(const std::string& name);
std::string policy_kind_name(PolicyKind kind);

// non-rl kinds consume packet 0 unconditionally and target an overall fraction p
struct SamplingPolicy {
  PolicyKind kind = PolicyKind::rl;
  double rate = 1.0;      // p, in (0,1]
  double avg_len = 0.0;   // first_m only; from past flows
};

std::vector<char> random_mask(int n, double p, std::mt19937_64& rng);
std::vector<char> relative_first_m_mask(int n, double p);
std::vector<char> first_m_mask(int n, double p, double avg_len);
std::vector<char> every_ith_mask(int n, double p);

// dispatches on kind; PolicyKind::rl is not mask-driven and is rejected here
std::vector<char> make_mask(const SamplingPolicy& policy, int n, std::mt19937_64& rng);

}  // namespace sparseids
