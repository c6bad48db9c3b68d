#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "sparseids/evaluator.hpp"

namespace sparseids {

struct SteeringConfig {
  double target = 0.5;        // minimum allowed corpus sparsity, in (0,1)
  double step = 0.1;
  double tradeoff_max = 1.0;  // starting tradeoff, the training maximum
  long long window = 0;       // flows per window; <= 0 lets adapters pick a default

  void validate() const;
};

// the live tradeoff is recomputed from the decrement count instead of being
// subtracted in place, so ten 0.1 steps end on exactly 0.0, not on rounding dust
struct SteeringState {
  double tradeoff_max = 1.0;
  double step = 0.1;
  double target = 0.5;
  long long decrements = 0;

  double tradeoff() const {
    return std::max(0.0, tradeoff_max - static_cast<double>(decrements) * step);
  }
};

// pure rule: decrement only while the observed sparsity still exceeds the
// target and the tradeoff is above the floor; monotone non-increasing
SteeringState steering_step(SteeringState state, double window_sparsity);

enum class SteerStop { end_of_stream, target_reached, tradeoff_floor };
const char* steer_stop_name(SteerStop stop);

struct SteerRecord {
  long long window = 0;   // 0-based window index
  double tradeoff = 0.0;  // value in effect while this window was evaluated
  double sparsity = 0.0;  // observed over this window
};

struct SteerResult {
  std::vector<SteerRecord> trace;
  double final_tradeoff = 0.0;
  SteerStop stop = SteerStop::end_of_stream;
};

// control loop over tumbling windows; a trailing partial window triggers no
// step. eval_window(first_flow, count, tradeoff) -> (consumed, total) packets
using WindowEval =
    std::function<std::pair<long long, long long>(long long, long long, double)>;
SteerResult run_steered_windows(long long n_flows, const SteeringConfig& cfg,
                                const WindowEval& eval_window);

// per-flow convenience wrapper: eval_flow(flow, tradeoff) -> (consumed, total)
using FlowEval = std::function<std::pair<long long, long long>(const Flow&, double)>;
SteerResult run_steered(const std::vector<Flow>& stream, const SteeringConfig& cfg,
                        const FlowEval& eval_flow);

// deployment adapter; the checkpoint must have been trained with the per-flow
// uniform tradeoff (anything else cannot be steered and is rejected)
SteerResult run_steered(const Checkpoint& ckpt, const FlowDataset& stream,
                        const SteeringConfig& cfg, int threads = 1, std::uint64_t seed = 1);

void write_steer_csv(std::ostream& out, const SteerResult& result);

}  // namespace sparseids
