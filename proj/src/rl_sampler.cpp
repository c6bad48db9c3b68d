#include "sparseids/rl_sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace sparseids {

ActionChoice select_action(const ActionDistribution& dist, RunMode mode, std::mt19937_64& rng) {
  ActionChoice out;
  if (dist.space == ActionSpace::continuous) {
    if (dist.mu <= 0.0 || dist.sigma <= 0.0)
      throw std::invalid_argument("select_action: mu and sigma must be > 0");
    const double x = mode == RunMode::training ? lognormal_sample(dist.mu, dist.sigma, rng)
                                               : lognormal_mean(dist.mu, dist.sigma);
    out.raw = x;
    out.action = static_cast<long long>(std::floor(x)) + 1;
    out.log_prob = lognormal_log_density(x, dist.mu, dist.sigma);
  } else {
    const auto k = static_cast<int>(dist.probs.size());
    if (k < 1) throw std::invalid_argument("select_action: empty discrete distribution");
    int idx = 0;
    if (mode == RunMode::training) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double u = unit(rng);
      double acc = 0.0;
      idx = k - 1;  // guards against round-off leaving u above the final cumulative sum
      for (int i = 0; i < k; ++i) {
        acc += dist.probs[i];
        if (u < acc) {
          idx = i;
          break;
        }
      }
    } else {
      for (int i = 1; i < k; ++i)
        if (dist.probs[i] > dist.probs[idx]) idx = i;  // strict: ties keep the smaller action
    }
    out.action = idx + 1;
    out.raw = static_cast<double>(idx + 1);
    out.log_prob = std::log(std::max(dist.probs[idx], 1e-300));
  }
  return out;
}

double distribution_entropy(const ActionDistribution& dist) {
  if (dist.space == ActionSpace::continuous) return lognormal_entropy(dist.mu, dist.sigma);
  double h = 0.0;
  for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
    const double p = dist.probs[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::vector<std::uint8_t> EpisodeTrace::mask() const {
  std::vector<std::uint8_t> m(static_cast<size_t>(flow_length), 0);
  for (int idx : consumed) m[static_cast<size_t>(idx)] = 1;
  return m;
}

std::vector<double> inherited_confidences(const EpisodeTrace& trace) {
  if (trace.consumed.empty() || trace.consumed.front() != 0)
    throw std::invalid_argument("inherited_confidences: episode must start at packet 0");
  std::vector<double> conf(static_cast<size_t>(trace.flow_length), 0.0);
  size_t k = 0;
  double current = trace.confidences.at(0);
  for (int i = 0; i < trace.flow_length; ++i) {
    if (k < trace.consumed.size() && trace.consumed[k] == i) {
      current = trace.confidences[k];
      ++k;
    }
    conf[static_cast<size_t>(i)] = current;
  }
  return conf;
}

double compute_classification_reward(const EpisodeTrace& trace, int k, int label) {
  const int n = trace.consumed.at(static_cast<size_t>(k));
  const int f = future_count(n, trace.flow_length);
  if (f < 1)
    throw std::invalid_argument("compute_classification_reward: no future packets at this index");
  const std::vector<double> conf = inherited_confidences(trace);
  double acc = 0.0;
  for (int i = n + 1; i < trace.flow_length; ++i)
    acc += 1.0 - std::abs(static_cast<double>(label) - conf[static_cast<size_t>(i)]);
  return acc / static_cast<double>(f);
}

double compute_sparsity_reward(const EpisodeTrace& trace, int k) {
  const int n = trace.consumed.at(static_cast<size_t>(k));
  const int f = future_count(n, trace.flow_length);
  if (f < 1)
    throw std::invalid_argument("compute_sparsity_reward: no future packets at this index");
  const auto m = trace.mask();
  int skipped = 0;
  for (int i = n + 1; i < trace.flow_length; ++i)
    if (!m[static_cast<size_t>(i)]) ++skipped;
  return static_cast<double>(skipped) / static_cast<double>(f);
}

double compute_terminal_sparsity_reward(int last_index, long long a_last, int flow_length) {
  if (last_index < 0 || last_index >= flow_length)
    throw std::invalid_argument("compute_terminal_sparsity_reward: index outside the flow");
  if (a_last < 1) throw std::invalid_argument("compute_terminal_sparsity_reward: action must be >= 1");
  if (last_index + a_last < flow_length)
    throw std::invalid_argument(
        "compute_terminal_sparsity_reward: action does not leave the flow");
  const int f = future_count(last_index, flow_length);
  if (f < 1)
    throw std::invalid_argument("compute_terminal_sparsity_reward: no future packets");
  const double o = static_cast<double>(last_index + a_last - flow_length);
  return static_cast<double>(f) / (static_cast<double>(f) + o);
}

std::vector<std::optional<RewardValue>> compute_rewards(const EpisodeTrace& trace, int label) {
  const size_t m = trace.consumed.size();
  if (m == 0) throw std::invalid_argument("compute_rewards: empty episode");
  if (trace.actions.size() != m)
    throw std::invalid_argument("compute_rewards: one action per consumed packet required");
  const int n_total = trace.flow_length;

  // suffix sums over packet indices, one backward sweep
  const std::vector<double> conf = inherited_confidences(trace);
  const auto mask = trace.mask();
  std::vector<double> cls_suffix(static_cast<size_t>(n_total) + 1, 0.0);
  std::vector<int> skip_suffix(static_cast<size_t>(n_total) + 1, 0);
  for (int i = n_total - 1; i >= 0; --i) {
    cls_suffix[static_cast<size_t>(i)] =
        cls_suffix[static_cast<size_t>(i) + 1] +
        (1.0 - std::abs(static_cast<double>(label) - conf[static_cast<size_t>(i)]));
    skip_suffix[static_cast<size_t>(i)] =
        skip_suffix[static_cast<size_t>(i) + 1] + (mask[static_cast<size_t>(i)] ? 0 : 1);
  }

  std::vector<std::optional<RewardValue>> out(m);
  for (size_t k = 0; k < m; ++k) {
    const int n = trace.consumed[k];
    const int f = future_count(n, n_total);
    if (f < 1) continue;
    RewardValue r;
    r.r_cls = cls_suffix[static_cast<size_t>(n) + 1] / static_cast<double>(f);
    if (k + 1 == m) {
      r.r_sp = compute_terminal_sparsity_reward(n, trace.actions[k], n_total);
    } else {
      r.r_sp = static_cast<double>(skip_suffix[static_cast<size_t>(n) + 1]) /
               static_cast<double>(f);
    }
    out[k] = r;
  }
  return out;
}

double compute_utility(double r_cls, double r_sp, double v_cls, double v_sp, double alpha) {
  return (r_cls + alpha * r_sp) - (v_cls + alpha * v_sp);
}

double critic_loss(const std::vector<double>& v_cls, const std::vector<double>& v_sp,
                   const std::vector<double>& r_cls, const std::vector<double>& r_sp) {
  if (v_cls.size() != v_sp.size() || v_cls.size() != r_cls.size() || r_cls.size() != r_sp.size())
    throw std::invalid_argument("critic_loss: mismatched series lengths");
  double loss = 0.0;
  for (size_t i = 0; i < v_cls.size(); ++i) {
    const double dc = r_cls[i] - v_cls[i];
    const double ds = r_sp[i] - v_sp[i];
    loss += dc * dc + ds * ds;
  }
  return loss;
}

double actor_loss(const std::vector<double>& log_probs, const std::vector<double>& utilities,
                  const std::vector<double>& entropies, double beta) {
  if (log_probs.size() != utilities.size() || log_probs.size() != entropies.size())
    throw std::invalid_argument("actor_loss: mismatched series lengths");
  double loss = 0.0;
  for (size_t i = 0; i < log_probs.size(); ++i)
    loss += -log_probs[i] * utilities[i] - beta * entropies[i];
  return loss;
}

}  // namespace sparseids
