#include "sparseids/flow_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "sparseids/errors.hpp"

namespace sparseids {

long long FlowDataset::total_packets() const {
  long long n = 0;
  for (const auto& f : flows) n += f.length();
  return n;
}

int FlowDataset::attack_count() const {
  int n = 0;
  for (const auto& f : flows) n += f.label;
  return n;
}

std::map<std::string, int> FlowDataset::attack_type_counts() const {
  std::map<std::string, int> counts;
  for (const auto& f : flows) ++counts[f.attack_type];
  return counts;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

long long parse_int(const std::string& s, const std::string& column, size_t line_no) {
  long long v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw schema_error("line " + std::to_string(line_no) + ": bad integer in column '" +
                       column + "': '" + s + "'");
  return v;
}

int parse_bounded(const std::string& s, const std::string& column, size_t line_no,
                  long long lo, long long hi) {
  long long v = parse_int(s, column, line_no);
  if (v < lo || v > hi)
    throw schema_error("line " + std::to_string(line_no) + ": column '" + column +
                       "' out of range [" + std::to_string(lo) + "," + std::to_string(hi) +
                       "]: " + s);
  return static_cast<int>(v);
}

struct PendingRow {
  long long pkt_idx;
  PacketRecord pkt;
};

struct PendingFlow {
  Flow flow;
  std::vector<PendingRow> rows;
  size_t first_line;
};

}  // namespace

FlowDataset load_flows_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw schema_error("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_line(line);
  std::unordered_map<std::string, int> col;
  for (size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i]))
      throw schema_error("duplicate column in header: '" + header[i] + "'");
    col[header[i]] = static_cast<int>(i);
  }
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw schema_error("missing column in header: '" + name + "'");
    return it->second;
  };
  const int c_flow = need(schema.flow_id);
  const int c_idx = need(schema.pkt_idx);
  const int c_sport = need(schema.src_port);
  const int c_dport = need(schema.dst_port);
  const int c_proto = need(schema.protocol);
  const int c_len = need(schema.length);
  const int c_iat = need(schema.iat_us);
  const int c_dir = need(schema.direction);
  std::array<int, num_tcp_flags> c_flags{};
  for (int i = 0; i < num_tcp_flags; ++i) c_flags[static_cast<size_t>(i)] = need(schema.flags[static_cast<size_t>(i)]);
  const int c_label = need(schema.label);
  const int c_type = need(schema.attack_type);

  std::vector<PendingFlow> flows;
  std::unordered_map<std::string, size_t> flow_index;

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line);
    if (f.size() != header.size())
      throw schema_error("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(f.size()));

    const std::string& fid = f[static_cast<size_t>(c_flow)];
    if (fid.empty()) throw schema_error("line " + std::to_string(line_no) + ": empty flow_id");

    PacketRecord pkt;
    pkt.length_bytes = parse_int(f[static_cast<size_t>(c_len)], schema.length, line_no);
    if (pkt.length_bytes < 0)
      throw schema_error("line " + std::to_string(line_no) + ": negative length");
    pkt.iat_us = parse_int(f[static_cast<size_t>(c_iat)], schema.iat_us, line_no);
    if (pkt.iat_us < 0)
      throw schema_error("line " + std::to_string(line_no) + ": negative iat_us");
    pkt.direction = parse_bounded(f[static_cast<size_t>(c_dir)], schema.direction, line_no, 0, 1);
    for (int i = 0; i < num_tcp_flags; ++i)
      pkt.tcp_flags[static_cast<size_t>(i)] =
          parse_bounded(f[static_cast<size_t>(c_flags[static_cast<size_t>(i)])],
                        schema.flags[static_cast<size_t>(i)], line_no, 0, 1);

    const long long pkt_idx = parse_int(f[static_cast<size_t>(c_idx)], schema.pkt_idx, line_no);
    const int sport = parse_bounded(f[static_cast<size_t>(c_sport)], schema.src_port, line_no, 0, 65535);
    const int dport = parse_bounded(f[static_cast<size_t>(c_dport)], schema.dst_port, line_no, 0, 65535);
    const int proto = parse_bounded(f[static_cast<size_t>(c_proto)], schema.protocol, line_no, 0, 255);
    const int label = parse_bounded(f[static_cast<size_t>(c_label)], schema.label, line_no, 0, 1);
    const std::string& type = f[static_cast<size_t>(c_type)];

    auto it = flow_index.find(fid);
    if (it == flow_index.end()) {
      PendingFlow pf;
      pf.flow.flow_id = fid;
      pf.flow.src_port = sport;
      pf.flow.dst_port = dport;
      pf.flow.protocol_id = proto;
      pf.flow.label = label;
      pf.flow.attack_type = type;
      pf.first_line = line_no;
      flow_index.emplace(fid, flows.size());
      flows.push_back(std::move(pf));
      it = flow_index.find(fid);
    } else {
      const Flow& head = flows[it->second].flow;
      if (head.label != label)
        throw schema_error("line " + std::to_string(line_no) + ": flow '" + fid +
                           "' mixes labels " + std::to_string(head.label) + " and " +
                           std::to_string(label));
      if (head.src_port != sport || head.dst_port != dport || head.protocol_id != proto)
        throw schema_error("line " + std::to_string(line_no) + ": flow '" + fid +
                           "' changes ports/protocol mid-flow");
    }
    flows[it->second].rows.push_back({pkt_idx, pkt});
  }

  if (flows.empty()) throw schema_error("dataset has no rows: " + path);

  FlowDataset ds;
  ds.flows.reserve(flows.size());
  for (auto& pf : flows) {
    std::stable_sort(pf.rows.begin(), pf.rows.end(),
                     [](const PendingRow& a, const PendingRow& b) { return a.pkt_idx < b.pkt_idx; });
    if (pf.rows.front().pkt.iat_us != 0)
      throw schema_error("flow '" + pf.flow.flow_id + "' (first row at line " +
                         std::to_string(pf.first_line) + "): first packet must have iat_us = 0");
    pf.flow.packets.reserve(pf.rows.size());
    for (auto& r : pf.rows) pf.flow.packets.push_back(r.pkt);
    ds.flows.push_back(std::move(pf.flow));
  }
  return ds;
}

void save_flows_csv(const FlowDataset& ds, const std::string& path, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open output file: " + path);
  out << schema.flow_id << ',' << schema.pkt_idx << ',' << schema.src_port << ','
      << schema.dst_port << ',' << schema.protocol << ',' << schema.length << ','
      << schema.iat_us << ',' << schema.direction;
  for (const auto& fl : schema.flags) out << ',' << fl;
  out << ',' << schema.label << ',' << schema.attack_type << '\n';
  for (const auto& f : ds.flows) {
    for (int i = 0; i < f.length(); ++i) {
      const PacketRecord& p = f.packets[static_cast<size_t>(i)];
      out << f.flow_id << ',' << i << ',' << f.src_port << ',' << f.dst_port << ','
          << f.protocol_id << ',' << p.length_bytes << ',' << p.iat_us << ',' << p.direction;
      for (int fl : p.tcp_flags) out << ',' << fl;
      out << ',' << f.label << ',' << f.attack_type << '\n';
    }
  }
  if (!out) throw io_error("write failed: " + path);
}

void truncate_flows(FlowDataset& ds, int max_len) {
  if (max_len < 1) throw config_error("max_len must be >= 1");
  for (auto& f : ds.flows)
    if (f.length() > max_len) f.packets.resize(static_cast<size_t>(max_len));
}

std::pair<FlowDataset, FlowDataset> split_dataset(const FlowDataset& ds, double train_fraction,
                                                  std::uint64_t seed) {
  if (ds.flows.empty()) throw config_error("split_dataset: empty dataset");
  if (train_fraction < 0.0 || train_fraction > 1.0)
    throw config_error("split_dataset: train_fraction must lie in [0,1]");
  std::vector<size_t> idx(ds.flows.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(ds.flows.size())));
  FlowDataset train, test;
  train.flows.reserve(n_train);
  test.flows.reserve(ds.flows.size() - n_train);
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? train : test).flows.push_back(ds.flows[idx[i]]);
  return {std::move(train), std::move(test)};
}

Vec raw_features(const Flow& flow, int index) {
  if (index < 0 || index >= flow.length())
    throw std::out_of_range("raw_features: packet index out of range");
  const PacketRecord& p = flow.packets[static_cast<size_t>(index)];
  Vec v(num_raw_features);
  v[0] = static_cast<double>(flow.src_port);
  v[1] = static_cast<double>(flow.dst_port);
  v[2] = static_cast<double>(flow.protocol_id);
  v[3] = static_cast<double>(p.length_bytes);
  v[4] = static_cast<double>(p.iat_us);
  v[5] = static_cast<double>(p.direction);
  for (int i = 0; i < num_tcp_flags; ++i)
    v[6 + i] = static_cast<double>(p.tcp_flags[static_cast<size_t>(i)]);
  return v;
}

NormalizationStats compute_normalization(const FlowDataset& ds) {
  const long long n = ds.total_packets();
  if (n <= 0) throw config_error("compute_normalization: dataset has no packets");
  NormalizationStats stats;
  Vec sum = Vec::Zero(num_raw_features);
  Vec sum_sq = Vec::Zero(num_raw_features);
  for (const auto& f : ds.flows) {
    for (int i = 0; i < f.length(); ++i) {
      const Vec v = raw_features(f, i);
      sum += v;
      sum_sq += v.cwiseProduct(v);
    }
  }
  stats.mean = sum / static_cast<double>(n);
  for (int j = 0; j < num_raw_features; ++j) {
    const double var = sum_sq[j] / static_cast<double>(n) - stats.mean[j] * stats.mean[j];
    stats.stddev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

Vec normalize_features(const Vec& raw, const NormalizationStats& stats) {
  if (raw.size() != num_raw_features)
    throw std::invalid_argument("normalize_features: expected the raw column vector");
  return (raw - stats.mean).cwiseQuotient(stats.stddev);
}

Vec denormalize_features(const Vec& normed, const NormalizationStats& stats) {
  if (normed.size() != num_raw_features)
    throw std::invalid_argument("denormalize_features: expected the normalized column vector");
  return normed.cwiseProduct(stats.stddev) + stats.mean;
}

Vec build_feature_vector(const Flow& flow, int index, int skipped,
                         const NormalizationStats& stats, int max_len,
                         std::optional<double> tradeoff) {
  if (skipped < 0) throw std::invalid_argument("build_feature_vector: negative skipped count");
  if (max_len < 1) throw std::invalid_argument("build_feature_vector: max_len must be >= 1");
  const Vec normed = normalize_features(raw_features(flow, index), stats);
  Vec out(feature_dim(tradeoff.has_value()));
  out.head(num_raw_features) = normed;
  out[num_raw_features] =
      static_cast<double>(std::min(skipped, max_len)) / static_cast<double>(max_len);
  if (tradeoff.has_value()) {
    if (*tradeoff < 0.0 || *tradeoff > 1.0)
      throw std::invalid_argument("build_feature_vector: tradeoff must lie in [0,1]");
    out[num_raw_features + 1] = *tradeoff;
  }
  return out;
}

FlowDataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_flows < 1) throw config_error("generate_synthetic: n_flows must be >= 1");
  if (cfg.attack_ratio <= 0.0 || cfg.attack_ratio >= 1.0)
    throw config_error("generate_synthetic: attack_ratio must lie in (0,1)");
  if (cfg.min_len < 1 || cfg.min_len > cfg.max_len)
    throw config_error("generate_synthetic: need 1 <= min_len <= max_len");
  if (cfg.signal_index < 0 || cfg.signal_index >= cfg.max_len)
    throw config_error("generate_synthetic: signal_index must lie in [0, max_len)");
  if (cfg.hot_prob < 0.0 || cfg.hot_prob > 1.0)
    throw config_error("generate_synthetic: hot_prob must lie in [0,1]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> src_port(1024, 65535);
  std::uniform_int_distribution<int> dst_pick(0, 3);
  constexpr std::array<int, 4> dst_ports = {80, 443, 22, 8080};
  std::uniform_int_distribution<long long> benign_len(40, benign_len_max);
  std::uniform_int_distribution<long long> hot_len(hot_len_min, hot_len_max);
  std::uniform_int_distribution<long long> iat(100, 50000);

  FlowDataset ds;
  ds.flows.reserve(static_cast<size_t>(cfg.n_flows));
  const int attack_min_len = std::max(cfg.min_len, cfg.signal_index + 1);

  for (int k = 0; k < cfg.n_flows; ++k) {
    Flow f;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "flow_%06d", k);
    f.flow_id = buf;
    const bool attack = unit(rng) < cfg.attack_ratio;
    f.label = attack ? 1 : 0;
    f.src_port = src_port(rng);
    f.dst_port = dst_ports[static_cast<size_t>(dst_pick(rng))];
    f.protocol_id = unit(rng) < 0.8 ? 6 : 17;
    const int lo = attack ? attack_min_len : cfg.min_len;
    std::uniform_int_distribution<int> len_dist(lo, cfg.max_len);
    const int n = len_dist(rng);
    if (attack) {
      f.attack_type = unit(rng) < 0.5 ? "Burst" : "Probe";
    } else {
      f.attack_type = "Normal";
    }
    f.packets.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      PacketRecord p;
      const bool hot =
          attack && (i == cfg.signal_index ||
                     (i > cfg.signal_index && unit(rng) < cfg.hot_prob));
      p.length_bytes = hot ? hot_len(rng) : benign_len(rng);
      p.iat_us = i == 0 ? 0 : iat(rng);
      p.direction = i == 0 ? 0 : (unit(rng) < 0.5 ? 0 : 1);
      if (f.protocol_id == 6) {
        if (i == 0)
          p.tcp_flags[1] = 1;  // SYN
        else
          p.tcp_flags[4] = 1;  // ACK
        if (i > 0 && i == n - 1) p.tcp_flags[0] = 1;  // FIN
      }
      f.packets.push_back(p);
    }
    ds.flows.push_back(std::move(f));
  }
  return ds;
}

}  // namespace sparseids
