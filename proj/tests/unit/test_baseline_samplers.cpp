#include <random>
#include <vector>

#include "doctest.h"
#include "sparseids/baseline_samplers.hpp"
#include "sparseids/errors.hpp"

using namespace sparseids;

namespace {

int ones(const std::vector<char>& mask) {
  int n = 0;
  for (char c : mask) n += c != 0;
  return n;
}

}  // namespace

TEST_CASE("policy names round-trip and unknown names are listed") {
  for (PolicyKind k : {PolicyKind::rl, PolicyKind::random_iid, PolicyKind::relative_first_m,
                       PolicyKind::first_m, PolicyKind::every_ith})
    CHECK(parse_policy_kind(policy_kind_name(k)) == k);
  CHECK(policy_kind_name(PolicyKind::rl) == "rl");
  CHECK(policy_kind_name(PolicyKind::random_iid) == "random");
  CHECK(policy_kind_name(PolicyKind::relative_first_m) == "relative-first-m");
  CHECK(policy_kind_name(PolicyKind::first_m) == "first-m");
  CHECK(policy_kind_name(PolicyKind::every_ith) == "every-ith");
  CHECK_THROWS_WITH_AS(parse_policy_kind("nope"), doctest::Contains("every-ith"),
                       config_error);
}

TEST_CASE("relative first-m keeps a length-proportional prefix") {
  // m = max(1, round(N p)), rounding half away from zero
  auto m10 = relative_first_m_mask(10, 0.2);
  CHECK(ones(m10) == 2);
  CHECK(m10[0] == 1);
  CHECK(m10[1] == 1);
  CHECK(m10[2] == 0);

  CHECK(ones(relative_first_m_mask(40, 0.2)) == 8);
  CHECK(ones(relative_first_m_mask(10, 0.25)) == 3);   // round(2.5) away from zero
  CHECK(ones(relative_first_m_mask(3, 0.01)) == 1);    // floor at one packet
  CHECK(ones(relative_first_m_mask(10, 1.0)) == 10);

  CHECK_THROWS_AS(relative_first_m_mask(0, 0.2), config_error);
  CHECK_THROWS_AS(relative_first_m_mask(10, 0.0), config_error);
  CHECK_THROWS_AS(relative_first_m_mask(10, 1.5), config_error);
}

TEST_CASE("fixed first-m derives its prefix from the historical average length") {
  // m = max(1, round(avg_len p)), capped at the flow length
  auto m = first_m_mask(10, 0.2, 10.0);
  CHECK(ones(m) == 2);
  CHECK(ones(first_m_mask(10, 0.2, 37.0)) == 7);  // round(7.4)
  CHECK(ones(first_m_mask(3, 0.9, 10.0)) == 3);   // cap at N
  CHECK(ones(first_m_mask(1, 0.01, 50.0)) == 1);

  // the prefix is the same for every flow length above the cap
  CHECK(ones(first_m_mask(20, 0.2, 10.0)) == 2);

  CHECK_THROWS_AS(first_m_mask(10, 0.2, 0.0), config_error);
}

TEST_CASE("every-ith keeps the arithmetic progression of one stride") {
  // stride = max(1, round(1/p))
  auto m = every_ith_mask(10, 0.25);
  std::vector<int> kept;
  for (int i = 0; i < 10; ++i)
    if (m[static_cast<size_t>(i)]) kept.push_back(i);
  CHECK(kept == std::vector<int>{0, 4, 8});

  auto m3 = every_ith_mask(10, 0.3);  // stride round(3.33) = 3
  kept.clear();
  for (int i = 0; i < 10; ++i)
    if (m3[static_cast<size_t>(i)]) kept.push_back(i);
  CHECK(kept == std::vector<int>{0, 3, 6, 9});

  CHECK(ones(every_ith_mask(5, 1.0)) == 5);  // stride 1 keeps everything
  CHECK(ones(every_ith_mask(4, 0.01)) == 1);

  CHECK_THROWS_AS(every_ith_mask(10, 0.0), config_error);
}

TEST_CASE("random masks always keep the first packet and hit the target rate") {
  std::mt19937_64 rng(31);

  // the first packet is free, so the tail rate is adjusted to (pN-1)/(N-1)
  const int n = 11;
  const double p = 0.5;
  long long kept = 0, total = 0;
  for (int rep = 0; rep < 20000; ++rep) {
    const auto m = random_mask(n, p, rng);
    REQUIRE(m.size() == static_cast<size_t>(n));
    CHECK(m[0] == 1);
    kept += ones(m);
    total += n;
  }
  // overall expectation is exactly p once the forced first packet is priced in
  CHECK(static_cast<double>(kept) / static_cast<double>(total) ==
        doctest::Approx(p).epsilon(0.02));

  // tiny p clamps the tail probability at zero: only the first packet survives
  for (int rep = 0; rep < 50; ++rep) CHECK(ones(random_mask(20, 0.01, rng)) == 1);
  for (int rep = 0; rep < 50; ++rep) CHECK(ones(random_mask(20, 1.0, rng)) == 20);

  // a one-packet flow is consumed whatever the rate
  CHECK(ones(random_mask(1, 0.2, rng)) == 1);

  CHECK_THROWS_AS(random_mask(0, 0.5, rng), config_error);
  CHECK_THROWS_AS(random_mask(10, -0.1, rng), config_error);
}

TEST_CASE("mask dispatch follows the policy kind and rejects the adaptive one") {
  std::mt19937_64 rng(1);
  SamplingPolicy pol;
  pol.kind = PolicyKind::every_ith;
  pol.rate = 0.25;
  CHECK(ones(make_mask(pol, 8, rng)) == 2);

  pol.kind = PolicyKind::first_m;
  pol.rate = 0.2;
  pol.avg_len = 10.0;
  CHECK(ones(make_mask(pol, 8, rng)) == 2);

  pol.kind = PolicyKind::rl;
  CHECK_THROWS_AS(make_mask(pol, 8, rng), config_error);
}
