#include "sparseids/steering.hpp"

#include <iomanip>
#include <sstream>
#include <thread>

#include "sparseids/errors.hpp"

namespace sparseids {

void SteeringConfig::validate() const {
  if (!(target > 0.0) || !(target < 1.0)) throw config_error("steer: target must be in (0,1)");
  if (!(step > 0.0)) throw config_error("steer: step must be > 0");
  if (!(tradeoff_max > 0.0) || tradeoff_max > 1.0)
    throw config_error("steer: starting tradeoff must be in (0,1]");
}

SteeringState steering_step(SteeringState state, double window_sparsity) {
  if (!(window_sparsity >= 0.0) || window_sparsity > 1.0)
    throw config_error("steer: window sparsity outside [0,1]");
  if (window_sparsity > state.target && state.tradeoff() > 0.0) ++state.decrements;
  return state;
}

const char* steer_stop_name(SteerStop stop) {
  switch (stop) {
    case SteerStop::end_of_stream: return "end_of_stream";
    case SteerStop::target_reached: return "target_reached";
    case SteerStop::tradeoff_floor: return "tradeoff_floor";
  }
  return "unknown";
}

SteerResult run_steered_windows(long long n_flows, const SteeringConfig& cfg,
                                const WindowEval& eval_window) {
  cfg.validate();
  if (cfg.window < 1) throw config_error("steer: window must be >= 1 flow");

  SteeringState state;
  state.tradeoff_max = cfg.tradeoff_max;
  state.step = cfg.step;
  state.target = cfg.target;

  SteerResult result;
  result.stop = SteerStop::end_of_stream;
  long long pos = 0;
  long long window_idx = 0;
  while (pos + cfg.window <= n_flows) {
    const double tau = state.tradeoff();
    const auto [consumed, total] = eval_window(pos, cfg.window, tau);
    pos += cfg.window;
    if (total < 1) throw config_error("steer: window produced no packets");
    const double sparsity = 1.0 - static_cast<double>(consumed) / static_cast<double>(total);
    result.trace.push_back({window_idx, tau, sparsity});
    if (sparsity <= cfg.target) {
      result.stop = SteerStop::target_reached;
      break;
    }
    if (tau <= 0.0) {
      result.stop = SteerStop::tradeoff_floor;
      break;
    }
    state = steering_step(state, sparsity);
    ++window_idx;
  }
  result.final_tradeoff = state.tradeoff();
  return result;
}

SteerResult run_steered(const std::vector<Flow>& stream, const SteeringConfig& cfg,
                        const FlowEval& eval_flow) {
  return run_steered_windows(
      static_cast<long long>(stream.size()), cfg,
      [&](long long first, long long count, double tau) {
        long long consumed = 0, total = 0;
        for (long long i = first; i < first + count; ++i) {
          const auto [c, t] = eval_flow(stream[static_cast<size_t>(i)], tau);
          consumed += c;
          total += t;
        }
        return std::pair<long long, long long>(consumed, total);
      });
}

SteerResult run_steered(const Checkpoint& ckpt, const FlowDataset& stream,
                        const SteeringConfig& cfg, int threads, std::uint64_t seed) {
  if (ckpt.config.alpha_mode != AlphaMode::uniform || !ckpt.config.model.with_tradeoff)
    throw mismatch_error(
        "checkpoint was trained with a fixed tradeoff; steering needs a model trained on "
        "per-flow uniform tradeoffs with the tradeoff input component");
  const Model model = model_from_checkpoint(ckpt);
  const int max_len = ckpt.config.max_len;

  SteeringConfig effective = cfg;
  if (effective.window < 1)
    effective.window = 1000LL * static_cast<long long>(ckpt.config.batch);

  SamplingPolicy policy;
  policy.kind = PolicyKind::rl;

  // deployment rollouts under the window's tradeoff; slot-per-flow keeps the
  // reduction order fixed for any thread count
  const auto eval_window = [&](long long first, long long count, double tau) {
    std::vector<std::pair<long long, long long>> slots(static_cast<size_t>(count));
    const auto eval_range = [&](long long lo, long long hi) {
      for (long long i = lo; i < hi; ++i) {
        const Flow& flow = stream.flows[static_cast<size_t>(first + i)];
        std::mt19937_64 rng(splitmix64(seed ^ static_cast<std::uint64_t>(first + i)));
        const EpisodeTrace trace = run_episode(model, flow, ckpt.stats, policy,
                                               RunMode::deployment, rng, max_len, tau);
        slots[static_cast<size_t>(i)] = {static_cast<long long>(trace.consumed.size()),
                                         static_cast<long long>(trace.flow_length)};
      }
    };
    const int workers = static_cast<int>(std::max(1LL, std::min<long long>(threads, count)));
    if (workers == 1) {
      eval_range(0, count);
    } else {
      std::vector<std::thread> pool;
      const long long chunk = (count + workers - 1) / workers;
      for (int t = 0; t < workers; ++t) {
        const long long lo = t * chunk;
        const long long hi = std::min(count, lo + chunk);
        if (lo < hi) pool.emplace_back(eval_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
    long long consumed = 0, total = 0;
    for (const auto& [c, t] : slots) {
      consumed += c;
      total += t;
    }
    return std::pair<long long, long long>(consumed, total);
  };

  return run_steered_windows(static_cast<long long>(stream.count()), effective, eval_window);
}

void write_steer_csv(std::ostream& out, const SteerResult& result) {
  out << "window,tradeoff,sparsity\n";
  for (const SteerRecord& r : result.trace) {
    std::ostringstream line;
    line << r.window << "," << std::setprecision(10) << r.tradeoff << "," << r.sparsity;
    out << line.str() << "\n";
  }
}

}  // namespace sparseids
