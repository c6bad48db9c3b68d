#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "sparseids/math.hpp"

namespace sparseids {

enum class ActionSpace { continuous, discrete };
enum class RunMode { training, deployment };

// skip-amount distribution produced by the actor head at one consumed packet;
// action a >= 1, a = 1 means "consume the next packet"
struct ActionDistribution {
  ActionSpace space = ActionSpace::continuous;
  double mu = 0.0;     // log-normal underlying mean, > 0 (softplus output)
  double sigma = 0.0;  // log-normal underlying std, > 0 (softplus output)
  Vec probs;           // discrete: probabilities over actions 1..k
};

struct ActionChoice {
  long long action = 1;   // >= 1
  double log_prob = 0.0;  // log pi(a) (discrete) or log-density of the raw draw (continuous)
  double raw = 0.0;       // continuous pre-discretization sample; action = floor(raw) + 1
};

// training samples the distribution; deployment takes the distribution mean
// (continuous, discretized like a sample) or the arg-max action (discrete,
// ties resolved toward the smaller action)
ActionChoice select_action(const ActionDistribution& dist, RunMode mode, std::mt19937_64& rng);

double distribution_entropy(const ActionDistribution& dist);

// everything one episode produced; entries below consumed.size() align with it
struct EpisodeTrace {
  int flow_length = 0;               // N after truncation
  std::vector<int> consumed;         // strictly increasing, first element 0
  std::vector<double> logits;        // classifier head pre-activation per consumed packet
  std::vector<double> confidences;   // sigmoid(logit), in (0,1)
  std::vector<long long> actions;    // skip decision taken at each consumed packet
  std::vector<double> raw_samples;   // continuous only
  std::vector<double> log_probs;
  std::vector<double> v_cls, v_sp;   // critic outputs, training mode only
  std::optional<double> tradeoff;    // feature value fed to every packet, when present

  std::vector<std::uint8_t> mask() const;  // length N, 1 = consumed
};

// effective confidence per packet index: consumed packets keep their own value,
// skipped ones inherit the nearest preceding consumed packet's
std::vector<double> inherited_confidences(const EpisodeTrace& trace);

// F(n) = N - 1 - n strictly-future packets of consumed index n
inline int future_count(int n_index, int flow_length) { return flow_length - 1 - n_index; }

// mean over strictly-future packets of 1 - |label - confidence|; k indexes trace.consumed
double compute_classification_reward(const EpisodeTrace& trace, int k, int label);

// skipped-future count / F(n); k indexes trace.consumed; undefined at the final
// consumed packet (the terminal rule below replaces it)
double compute_sparsity_reward(const EpisodeTrace& trace, int k);

// reward at the last consumed packet: F / (F + o) with overshoot
// o = max(0, last + a - N); landing exactly at N (one past the flow) is free.
// Calling it while the action stays inside the flow (last + a < N) is an error.
double compute_terminal_sparsity_reward(int last_index, long long a_last, int flow_length);

struct RewardValue {
  double r_cls = 0.0;
  double r_sp = 0.0;
};

// single-pass reward computation for a finished episode; entries align with
// trace.consumed and are empty where F(n) = 0 (such packets carry no reward
// terms and are excluded from both losses)
std::vector<std::optional<RewardValue>> compute_rewards(const EpisodeTrace& trace, int label);

// U = (r_cls + alpha r_sp) - (v_cls + alpha v_sp); used as a detached constant
double compute_utility(double r_cls, double r_sp, double v_cls, double v_sp, double alpha);

// sum of squared residuals of both value heads against their (detached) reward targets
double critic_loss(const std::vector<double>& v_cls, const std::vector<double>& v_sp,
                   const std::vector<double>& r_cls, const std::vector<double>& r_sp);

// sum of -log pi(a_n) U_n - beta H_n
double actor_loss(const std::vector<double>& log_probs, const std::vector<double>& utilities,
                  const std::vector<double>& entropies, double beta);

}  // namespace sparseids
