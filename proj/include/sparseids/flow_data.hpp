#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparseids/math.hpp"

namespace sparseids {

// TCP flag order everywhere: FIN, SYN, RST, PSH, ACK, URG, ECE, CWR
inline constexpr int num_tcp_flags = 8;
// z-scored per-packet columns: ports, protocol, length, iat, direction, 8 flags
inline constexpr int num_raw_features = 14;

struct PacketRecord {
  long long length_bytes = 0;
  long long iat_us = 0;  // 0 on the first packet of a flow
  int direction = 0;     // 0 forward, 1 backward
  std::array<int, num_tcp_flags> tcp_flags{};
};

struct Flow {
  std::string flow_id;
  int src_port = 0;
  int dst_port = 0;
  int protocol_id = 0;
  int label = 0;  // 1 = attack, constant per flow
  std::string attack_type;
  std::vector<PacketRecord> packets;

  int length() const { return static_cast<int>(packets.size()); }
};

struct FlowDataset {
  std::vector<Flow> flows;

  int count() const { return static_cast<int>(flows.size()); }
  long long total_packets() const;
  int attack_count() const;
  std::map<std::string, int> attack_type_counts() const;
};

// expected CSV column names; all 18 must be present in the header (any order)
struct CsvSchema {
  std::string flow_id = "flow_id";
  std::string pkt_idx = "pkt_idx";
  std::string src_port = "src_port";
  std::string dst_port = "dst_port";
  std::string protocol = "protocol";
  std::string length = "length";
  std::string iat_us = "iat_us";
  std::string direction = "direction";
  std::array<std::string, num_tcp_flags> flags = {
      "flag_fin", "flag_syn", "flag_rst", "flag_psh",
      "flag_ack", "flag_urg", "flag_ece", "flag_cwr"};
  std::string label = "label";
  std::string attack_type = "attack_type";
};

FlowDataset load_flows_csv(const std::string& path, const CsvSchema& schema = {});
void save_flows_csv(const FlowDataset& ds, const std::string& path, const CsvSchema& schema = {});

// keeps the first max_len packets of each flow
void truncate_flows(FlowDataset& ds, int max_len);

// deterministic shuffle-then-cut; train gets llround(train_fraction * count) flows
std::pair<FlowDataset, FlowDataset> split_dataset(const FlowDataset& ds, double train_fraction,
                                                  std::uint64_t seed);

// per-column mean and population std over every packet of every flow;
// zero-variance columns store std = 1 so they normalize to 0
struct NormalizationStats {
  Vec mean = Vec::Zero(num_raw_features);
  Vec stddev = Vec::Ones(num_raw_features);
};

NormalizationStats compute_normalization(const FlowDataset& ds);

// the 14 raw per-packet columns in schema order
Vec raw_features(const Flow& flow, int index);
Vec normalize_features(const Vec& raw, const NormalizationStats& stats);
Vec denormalize_features(const Vec& normed, const NormalizationStats& stats);

// model input: 14 z-scored columns + skipped-count component (+ optional tradeoff).
// skipped component = min(skipped, max_len) / max_len, not z-scored; tradeoff raw in [0,1]
Vec build_feature_vector(const Flow& flow, int index, int skipped,
                         const NormalizationStats& stats, int max_len,
                         std::optional<double> tradeoff = std::nullopt);

inline int feature_dim(bool with_tradeoff) {
  return num_raw_features + 1 + (with_tradeoff ? 1 : 0);
}

// synthetic corpus: benign and attack flows share every distribution except that
// attack packet signal_index always carries the marker feature and each later
// packet carries it with probability hot_prob; flows without packet signal_index
// are benign by construction
struct SynthConfig {
  int n_flows = 1000;
  int min_len = 1;
  int max_len = 20;
  double attack_ratio = 0.5;  // must lie in (0,1)
  int signal_index = 3;       // must lie in [0, max_len)
  double hot_prob = 0.45;     // marker probability for attack packets past signal_index
};

// marker = length in [hot_len_min, hot_len_max]; benign lengths never reach it
inline constexpr long long hot_len_min = 1200;
inline constexpr long long hot_len_max = 1500;
inline constexpr long long benign_len_max = 1000;

FlowDataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace sparseids
