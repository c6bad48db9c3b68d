#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "sparseids/rl_sampler.hpp"

using namespace sparseids;

namespace {

// naive oracle: scan backwards for the nearest preceding consumed packet
std::vector<double> oracle_inherited(const EpisodeTrace& tr) {
  std::vector<double> out(static_cast<size_t>(tr.flow_length), 0.0);
  for (int i = 0; i < tr.flow_length; ++i) {
    int best = -1;
    for (size_t k = 0; k < tr.consumed.size(); ++k)
      if (tr.consumed[k] <= i) best = static_cast<int>(k);
    REQUIRE(best >= 0);
    out[static_cast<size_t>(i)] = tr.confidences[static_cast<size_t>(best)];
  }
  return out;
}

double oracle_r_cls(const EpisodeTrace& tr, size_t k, int label) {
  const std::vector<double> eff = oracle_inherited(tr);
  const int n = tr.consumed[k];
  double acc = 0.0;
  int cnt = 0;
  for (int i = n + 1; i < tr.flow_length; ++i) {
    acc += 1.0 - std::abs(static_cast<double>(label) - eff[static_cast<size_t>(i)]);
    ++cnt;
  }
  REQUIRE(cnt > 0);
  return acc / cnt;
}

double oracle_r_sp(const EpisodeTrace& tr, size_t k) {
  const int n = tr.consumed[k];
  int consumed_future = 0;
  for (int c : tr.consumed)
    if (c > n) ++consumed_future;
  const int f = tr.flow_length - 1 - n;
  return static_cast<double>(f - consumed_future) / f;
}

// a structurally valid random episode: consumed indices strictly increasing
// from 0, actions reproducing the jumps, final landing at or past the end
EpisodeTrace random_trace(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len_d(2, 12);
  std::uniform_real_distribution<double> conf_d(0.01, 0.99);
  std::uniform_int_distribution<int> hop_d(1, 4);
  std::uniform_int_distribution<int> over_d(0, 3);

  EpisodeTrace tr;
  tr.flow_length = len_d(rng);
  int at = 0;
  while (at < tr.flow_length) {
    tr.consumed.push_back(at);
    tr.confidences.push_back(conf_d(rng));
    const int hop = hop_d(rng);
    tr.actions.push_back(hop);
    at += hop;
  }
  // the last action must leave the flow; stretch it by a random overshoot
  const int last = tr.consumed.back();
  tr.actions.back() = tr.flow_length - last + over_d(rng);
  return tr;
}

}  // namespace

TEST_CASE("skipped packets inherit the nearest preceding consumed confidence") {
  EpisodeTrace tr;
  tr.flow_length = 7;
  tr.consumed = {0, 2, 5};
  tr.confidences = {0.9, 0.2, 0.6};
  const std::vector<double> eff = inherited_confidences(tr);
  const std::vector<double> expected = {0.9, 0.9, 0.2, 0.2, 0.2, 0.6, 0.6};
  REQUIRE(eff.size() == expected.size());
  for (size_t i = 0; i < eff.size(); ++i) CHECK(eff[i] == doctest::Approx(expected[i]));

  EpisodeTrace bad = tr;
  bad.consumed[0] = 1;
  CHECK_THROWS_AS(inherited_confidences(bad), std::invalid_argument);
}

TEST_CASE("episode mask marks exactly the consumed indices") {
  EpisodeTrace tr;
  tr.flow_length = 6;
  tr.consumed = {0, 3, 4};
  const auto m = tr.mask();
  REQUIRE(m.size() == 6);
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);
  CHECK(m[2] == 0);
  CHECK(m[3] == 1);
  CHECK(m[4] == 1);
  CHECK(m[5] == 0);
}

TEST_CASE("one skip out of five future packets scores two fifths sparsity") {
  EpisodeTrace tr;
  tr.flow_length = 6;
  tr.consumed = {0, 1, 3, 5};
  tr.confidences = {0.5, 0.5, 0.5, 0.5};
  // packet 0 sees future {1,2,3,4,5}; {1,3,5} are consumed, {2,4} skipped
  CHECK(compute_sparsity_reward(tr, 0) == doctest::Approx(2.0 / 5.0));
  CHECK(compute_sparsity_reward(tr, 1) == doctest::Approx(2.0 / 4.0));
  CHECK(compute_sparsity_reward(tr, 2) == doctest::Approx(1.0 / 2.0));
  CHECK_THROWS_AS(compute_sparsity_reward(tr, 3), std::invalid_argument);
}

TEST_CASE("terminal sparsity reward charges only the overshoot") {
  // landing exactly one past the last packet is free
  CHECK(compute_terminal_sparsity_reward(5, 5, 10) == doctest::Approx(1.0));
  // overshoot o = 5 against F = 4 future packets
  CHECK(compute_terminal_sparsity_reward(5, 10, 10) == doctest::Approx(4.0 / 9.0));
  CHECK(compute_terminal_sparsity_reward(0, 100, 10) == doctest::Approx(9.0 / 99.0));
  // an action that stays inside the flow is not terminal
  CHECK_THROWS_AS(compute_terminal_sparsity_reward(5, 4, 10), std::invalid_argument);
  CHECK_THROWS_AS(compute_terminal_sparsity_reward(9, 1, 10), std::invalid_argument);
  CHECK_THROWS_AS(compute_terminal_sparsity_reward(5, 0, 10), std::invalid_argument);
}

TEST_CASE("reward series matches a brute-force oracle on random episodes") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const EpisodeTrace tr = random_trace(rng);
    const int label = rep % 2;
    const auto rewards = compute_rewards(tr, label);
    REQUIRE(rewards.size() == tr.consumed.size());

    for (size_t k = 0; k < tr.consumed.size(); ++k) {
      const int n = tr.consumed[k];
      const int f = tr.flow_length - 1 - n;
      if (f == 0) {
        // no future packets: the entry carries no reward terms at all
        CHECK_FALSE(rewards[k].has_value());
        continue;
      }
      REQUIRE(rewards[k].has_value());
      CHECK(rewards[k]->r_cls == doctest::Approx(oracle_r_cls(tr, k, label)).epsilon(1e-12));
      const bool is_last = k + 1 == tr.consumed.size();
      const double want_sp =
          is_last ? compute_terminal_sparsity_reward(n, tr.actions[k], tr.flow_length)
                  : oracle_r_sp(tr, k);
      CHECK(rewards[k]->r_sp == doctest::Approx(want_sp).epsilon(1e-12));
      CHECK(rewards[k]->r_cls >= 0.0);
      CHECK(rewards[k]->r_cls <= 1.0);
      CHECK(rewards[k]->r_sp >= 0.0);
      CHECK(rewards[k]->r_sp <= 1.0);
    }
  }
}

TEST_CASE("single-packet episodes carry no reward terms") {
  EpisodeTrace tr;
  tr.flow_length = 1;
  tr.consumed = {0};
  tr.confidences = {0.7};
  tr.actions = {3};
  const auto rewards = compute_rewards(tr, 1);
  REQUIRE(rewards.size() == 1);
  CHECK_FALSE(rewards[0].has_value());
}

TEST_CASE("utility and loss helpers match hand-computed values") {
  // (0.9 + 0.5*0.4) - (0.6 + 0.5*0.2) = 1.1 - 0.7
  CHECK(compute_utility(0.9, 0.4, 0.6, 0.2, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
  // alpha = 0 ignores the sparsity channel entirely
  CHECK(compute_utility(0.9, 0.4, 0.6, 0.2, 0.0) == doctest::Approx(0.3).epsilon(1e-12));

  // (0.2-0.5)^2 + (0.5-0.3)^2 = 0.09 + 0.04
  CHECK(critic_loss({0.5}, {0.3}, {0.2}, {0.5}) == doctest::Approx(0.13).epsilon(1e-12));
  CHECK_THROWS_AS(critic_loss({0.5}, {0.3}, {0.2, 0.1}, {0.5}), std::invalid_argument);

  // (0.1 - 0.01*1.0) + (-0.1 - 0.01*2.0) = 0.09 - 0.12
  CHECK(actor_loss({-0.5, -1.0}, {0.2, -0.1}, {1.0, 2.0}, 0.01) ==
        doctest::Approx(-0.03).epsilon(1e-12));
  CHECK_THROWS_AS(actor_loss({-0.5}, {0.2, 0.1}, {1.0}, 0.01), std::invalid_argument);
}

TEST_CASE("log-normal helpers agree with closed forms and quadrature") {
  CHECK(lognormal_entropy(0.0, 1.0) == doctest::Approx(1.4189385332046727).epsilon(1e-12));

  // entropy shifts linearly in mu and logarithmically in sigma
  CHECK(lognormal_entropy(1.3, 1.0) - lognormal_entropy(0.0, 1.0) ==
        doctest::Approx(1.3).epsilon(1e-12));
  CHECK(lognormal_entropy(0.0, 2.0) - lognormal_entropy(0.0, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // the density integrates to one (composite Simpson over a generous range)
  const double mu = 0.4, sigma = 0.7;
  const double lo = 1e-4, hi = 120.0;
  const int steps = 200000;  // even
  const double dx = (hi - lo) / steps;
  auto dens = [&](double x) { return std::exp(lognormal_log_density(x, mu, sigma)); };
  double integral = dens(lo) + dens(hi);
  for (int i = 1; i < steps; ++i)
    integral += dens(lo + i * dx) * (i % 2 == 1 ? 4.0 : 2.0);
  integral *= dx / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-5));

  CHECK_THROWS_AS(lognormal_log_density(-1.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lognormal_log_density(1.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(lognormal_entropy(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("log-normal sampling hits the analytic mean") {
  std::mt19937_64 rng(99);
  const double mu = 0.0, sigma = 0.5;
  const int n = 200000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lognormal_sample(mu, sigma, rng);
    CHECK(x > 0.0);
    acc += x;
  }
  const double expected = std::exp(mu + 0.5 * sigma * sigma);  // 1.1331...
  CHECK(acc / n == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("continuous action selection discretizes with floor plus one") {
  ActionDistribution dist;
  dist.space = ActionSpace::continuous;
  dist.sigma = 0.2;

  std::mt19937_64 rng(5);
  // deployment takes the distribution mean; mean 2.7 -> floor(2.7) + 1 = 3
  dist.mu = std::log(2.7) - 0.5 * dist.sigma * dist.sigma;
  REQUIRE(dist.mu > 0.0);
  CHECK(select_action(dist, RunMode::deployment, rng).action == 3);

  // both location parameters come out of a softplus, so mu > 0 always holds
  // and the deployment mean exp(mu + sigma^2/2) > 1: the mode never picks 1
  dist.mu = 1e-9;
  dist.sigma = 0.1;
  CHECK(select_action(dist, RunMode::deployment, rng).action == 2);

  // deployment ignores the rng stream entirely
  std::mt19937_64 r1(1), r2(999);
  CHECK(select_action(dist, RunMode::deployment, r1).action ==
        select_action(dist, RunMode::deployment, r2).action);

  // training records the raw draw, its density, and floors it into the action
  dist.mu = 0.1;
  dist.sigma = 1.2;  // wide enough that draws below one occur
  bool saw_consume_next = false;
  for (int i = 0; i < 1000; ++i) {
    const ActionChoice c = select_action(dist, RunMode::training, rng);
    CHECK(c.raw > 0.0);
    CHECK(c.action == static_cast<long long>(std::floor(c.raw)) + 1);
    CHECK(c.action >= 1);
    if (c.raw < 1.0) {
      CHECK(c.action == 1);
      saw_consume_next = true;
    }
    CHECK(c.log_prob ==
          doctest::Approx(lognormal_log_density(c.raw, dist.mu, dist.sigma)).epsilon(1e-12));
  }
  CHECK(saw_consume_next);

  CHECK(distribution_entropy(dist) ==
        doctest::Approx(lognormal_entropy(dist.mu, dist.sigma)).epsilon(1e-12));

  dist.sigma = 0.0;
  CHECK_THROWS_AS(select_action(dist, RunMode::training, rng), std::invalid_argument);
  dist.sigma = 0.5;
  dist.mu = -0.1;
  CHECK_THROWS_AS(select_action(dist, RunMode::deployment, rng), std::invalid_argument);
}

TEST_CASE("discrete action selection takes the arg-max with ties toward smaller") {
  ActionDistribution dist;
  dist.space = ActionSpace::discrete;
  std::mt19937_64 rng(8);

  dist.probs = Vec(3);
  dist.probs << 0.2, 0.5, 0.3;
  const ActionChoice top = select_action(dist, RunMode::deployment, rng);
  CHECK(top.action == 2);
  CHECK(top.log_prob == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  dist.probs << 0.4, 0.2, 0.4;  // tie between actions 1 and 3
  CHECK(select_action(dist, RunMode::deployment, rng).action == 1);
  dist.probs << 0.1, 0.45, 0.45;  // tie between 2 and 3
  CHECK(select_action(dist, RunMode::deployment, rng).action == 2);

  // training samples with the stated frequencies
  dist.probs << 0.2, 0.5, 0.3;
  std::vector<int> hits(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const ActionChoice c = select_action(dist, RunMode::training, rng);
    REQUIRE(c.action >= 1);
    REQUIRE(c.action <= 3);
    CHECK(c.log_prob ==
          doctest::Approx(std::log(dist.probs[static_cast<int>(c.action) - 1]))
              .epsilon(1e-9));
    ++hits[static_cast<size_t>(c.action)];
  }
  CHECK(static_cast<double>(hits[1]) / n == doctest::Approx(0.2).epsilon(0.1));
  CHECK(static_cast<double>(hits[2]) / n == doctest::Approx(0.5).epsilon(0.05));
  CHECK(static_cast<double>(hits[3]) / n == doctest::Approx(0.3).epsilon(0.1));

  // entropy equals the naive sum
  double naive = 0.0;
  for (int i = 0; i < 3; ++i) naive -= dist.probs[i] * std::log(dist.probs[i]);
  CHECK(distribution_entropy(dist) == doctest::Approx(naive).epsilon(1e-12));

  dist.probs = Vec(0);
  CHECK_THROWS_AS(select_action(dist, RunMode::training, rng), std::invalid_argument);
}
