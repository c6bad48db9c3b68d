#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sparseids/baseline_samplers.hpp"
#include "sparseids/flow_data.hpp"
#include "sparseids/model.hpp"
#include "sparseids/rl_sampler.hpp"

namespace sparseids {

// fixed keeps one tradeoff weight for the whole run; uniform draws one per flow
// from U[0,1] and feeds it to the model as the tradeoff input component
enum class AlphaMode { fixed, uniform };

struct TrainConfig {
  int epochs = 8;
  double lr = 0.001;
  AlphaMode alpha_mode = AlphaMode::fixed;
  double alpha = 0.5;
  double beta = 0.01;
  int batch = 32;
  std::uint64_t seed = 1;
  int max_len = 20;
  int log_every = 100;
  ModelConfig model;
  SamplingPolicy policy;  // non-rl kinds train the classifier under that fixed mask

  void validate() const;
};

// one rollout. rl policy: classify, sample a skip amount, jump, repeat until the
// landing index leaves the flow. mask policies: classify the masked packets only.
// training mode samples actions and records critic values; deployment mode takes
// the distribution mean/mode and never evaluates the critic
EpisodeTrace run_episode(const Model& model, const Flow& flow, const NormalizationStats& stats,
                         const SamplingPolicy& policy, RunMode mode, std::mt19937_64& rng,
                         int max_len, std::optional<double> tradeoff);

// tape replay of a finished episode: rebuilds the forward pass along the trace
// and returns the flow loss node (mean consumed-packet BCE + summed critic
// residuals + summed actor terms). rewards, utilities and the recorded raw
// actions enter as constants, so their paths contribute no gradient
Tape::Id build_episode_loss(Tape& tape, const Model& model, const Flow& flow,
                            const EpisodeTrace& trace, const NormalizationStats& stats,
                            int max_len, double alpha, double beta);

struct TrainLogRecord {
  long long step = 0;     // flows processed when the record was cut
  double accuracy = 0.0;  // flow-verdict accuracy over the interval
  double sparsity = 0.0;  // 1 - consumed/total packets over the interval
};

struct Checkpoint {
  TrainConfig config;
  NormalizationStats stats;
  ParameterStore params;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogRecord> log;
};

// deterministic for a fixed seed: same config + data -> bitwise-equal checkpoint
TrainResult train(const TrainConfig& cfg, const FlowDataset& train_ds);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// instantiates the stored model; a topology expectation that disagrees with the
// stored one is rejected rather than silently reinterpreted
Model model_from_checkpoint(const Checkpoint& ckpt, std::optional<Topology> expect = {});

}  // namespace sparseids
