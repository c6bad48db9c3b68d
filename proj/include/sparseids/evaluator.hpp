#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sparseids/trainer.hpp"

namespace sparseids {

// flows-of-one-attack-type slice of the corpus; "flagged" counts attack verdicts
struct TypeStats {
  long long flows = 0;
  long long flagged = 0;
  long long consumed_packets = 0;
  long long total_packets = 0;
};

struct MetricsReport {
  long long flows = 0;
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, youden = 0.0;
  // divisions by zero report 0 with the flag cleared instead of failing
  bool precision_defined = true, recall_defined = true;
  bool f1_defined = true, youden_defined = true;
  long long consumed_packets = 0, total_packets = 0;
  double sparsity = 0.0;  // 1 - consumed/total over the truncated corpus
  std::map<std::string, TypeStats> by_type;
};

// fills the derived metric fields from the confusion and packet counters
void finalize_metrics(MetricsReport& report);

struct EvalConfig {
  SamplingPolicy policy;                // rl = deployment-mode actor
  int max_len = 0;                      // <= 0: take the checkpoint's value
  std::uint64_t seed = 1;               // drives the random baseline only
  int threads = 1;
  std::optional<double> tradeoff;       // tradeoff-input models default to 1.0
};

// deployment-mode corpus evaluation; bitwise identical for any thread count
// because every flow draws from its own seed derived from (seed, flow index)
MetricsReport evaluate(const Model& model, const NormalizationStats& stats,
                       const FlowDataset& test_ds, const EvalConfig& cfg);
MetricsReport evaluate(const Checkpoint& ckpt, const FlowDataset& test_ds,
                       const EvalConfig& cfg);

// per packet position: how many flows reach it, how often it was consumed, and
// the mean effective confidence (skipped packets inherit the preceding one)
struct SamplingHistogram {
  std::string attack_type;  // "All" for the whole corpus
  std::vector<long long> alive;
  std::vector<long long> consumed;
  std::vector<double> mean_confidence;  // 0 where no flow reaches the position
};

SamplingHistogram per_attack_histogram(const Model& model, const NormalizationStats& stats,
                                       const FlowDataset& test_ds, const EvalConfig& cfg,
                                       const std::string& attack_type);
SamplingHistogram per_attack_histogram(const Checkpoint& ckpt, const FlowDataset& test_ds,
                                       const EvalConfig& cfg, const std::string& attack_type);

void write_metrics_text(std::ostream& out, const MetricsReport& report, bool by_type);
void write_metrics_kv(std::ostream& out, const MetricsReport& report);
void write_histogram_csv(std::ostream& out, const SamplingHistogram& hist);

}  // namespace sparseids
