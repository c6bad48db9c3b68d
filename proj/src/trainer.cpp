#include "sparseids/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sparseids/classifier.hpp"
#include "sparseids/errors.hpp"

namespace sparseids {

void TrainConfig::validate() const {
  if (epochs < 1) throw config_error("train: epochs must be >= 1");
  if (!(lr > 0.0)) throw config_error("train: learning rate must be > 0");
  if (alpha < 0.0) throw config_error("train: alpha must be >= 0");
  if (beta < 0.0) throw config_error("train: beta must be >= 0");
  if (batch < 1) throw config_error("train: batch size must be >= 1");
  if (max_len < 1) throw config_error("train: max flow length must be >= 1");
  if (log_every < 1) throw config_error("train: log interval must be >= 1");
  if (alpha_mode == AlphaMode::uniform && !model.with_tradeoff)
    throw config_error("train: per-flow uniform alpha requires the tradeoff input component");
  model.validate();
  if (policy.kind != PolicyKind::rl) {
    if (!(policy.rate > 0.0) || policy.rate > 1.0)
      throw config_error("train: sampling rate must be in (0,1]");
    if (policy.kind == PolicyKind::first_m && !(policy.avg_len > 0.0))
      throw config_error("train: first-m policy requires a positive average flow length");
  }
}

EpisodeTrace run_episode(const Model& model, const Flow& flow, const NormalizationStats& stats,
                         const SamplingPolicy& policy, RunMode mode, std::mt19937_64& rng,
                         int max_len, std::optional<double> tradeoff) {
  if (flow.length() < 1) throw config_error("episode: flow has no packets");
  const int n = std::min(flow.length(), max_len);
  EpisodeTrace trace;
  trace.flow_length = n;
  trace.tradeoff = tradeoff;
  Model::EvalState state = model.make_state();

  if (policy.kind == PolicyKind::rl) {
    const bool training = mode == RunMode::training;
    const bool continuous = model.config().action_space == ActionSpace::continuous;
    int current = 0;
    int skipped = 0;
    for (;;) {
      const Vec x = build_feature_vector(flow, current, skipped, stats, max_len, tradeoff);
      const Model::StepOut out = model.step(x, state, true, training);
      trace.consumed.push_back(current);
      trace.logits.push_back(out.logit);
      trace.confidences.push_back(out.confidence);
      if (training) {
        trace.v_cls.push_back(out.v_cls);
        trace.v_sp.push_back(out.v_sp);
      }
      const ActionChoice choice = select_action(out.dist, mode, rng);
      trace.actions.push_back(choice.action);
      trace.log_probs.push_back(choice.log_prob);
      if (continuous) trace.raw_samples.push_back(choice.raw);
      const long long landing = static_cast<long long>(current) + choice.action;
      if (landing >= n) break;
      skipped = static_cast<int>(choice.action - 1);
      current = static_cast<int>(landing);
    }
    return trace;
  }

  const std::vector<char> mask = make_mask(policy, n, rng);
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    const int skipped = prev < 0 ? 0 : i - prev - 1;
    const Vec x = build_feature_vector(flow, i, skipped, stats, max_len, tradeoff);
    const Model::StepOut out = model.step(x, state, false, false);
    trace.consumed.push_back(i);
    trace.logits.push_back(out.logit);
    trace.confidences.push_back(out.confidence);
    prev = i;
  }
  return trace;
}

Tape::Id build_episode_loss(Tape& tape, const Model& model, const Flow& flow,
                            const EpisodeTrace& trace, const NormalizationStats& stats,
                            int max_len, double alpha, double beta) {
  const size_t m = trace.consumed.size();
  if (m == 0) throw std::invalid_argument("episode loss: trace has no consumed packets");
  if (trace.consumed[0] != 0)
    throw std::invalid_argument("episode loss: trace does not start at packet 0");
  const bool rl = !trace.actions.empty();
  const bool continuous = model.config().action_space == ActionSpace::continuous;
  if (rl && (trace.actions.size() != m || trace.v_cls.size() != m || trace.v_sp.size() != m ||
             (continuous && trace.raw_samples.size() != m)))
    throw std::invalid_argument("episode loss: trace fields misaligned with consumed packets");
  const int label = flow.label;

  std::vector<std::optional<RewardValue>> rewards;
  if (rl) rewards = compute_rewards(trace, label);

  Model::TapeState state = model.make_tape_state(tape);
  Tape::Id bce = -1, critic = -1, actor = -1;
  for (size_t k = 0; k < m; ++k) {
    const int i = trace.consumed[k];
    const int skipped = k == 0 ? 0 : i - trace.consumed[k - 1] - 1;
    const Vec xv = build_feature_vector(flow, i, skipped, stats, max_len, trace.tradeoff);
    const Tape::Id x = tape.constant(xv);
    // every recorded packet advances every trunk the rollout advanced, whether
    // or not its head outputs end up in the loss
    const Model::TapeStepOut out = model.tape_step(tape, x, state, rl, rl);

    const Tape::Id sp = tape.softplus_(out.logit);
    const Tape::Id bce_term = label == 1 ? tape.sub(sp, out.logit) : sp;
    bce = bce < 0 ? bce_term : tape.add(bce, bce_term);

    if (!rl || !rewards[k].has_value()) continue;
    const RewardValue& rv = *rewards[k];

    const Tape::Id vc = tape.pick(out.values, 0);
    const Tape::Id vs = tape.pick(out.values, 1);
    const Tape::Id c_term = tape.add(tape.square_(tape.add_scalar(vc, -rv.r_cls)),
                                     tape.square_(tape.add_scalar(vs, -rv.r_sp)));
    critic = critic < 0 ? c_term : tape.add(critic, c_term);

    const double u = compute_utility(rv.r_cls, rv.r_sp, trace.v_cls[k], trace.v_sp[k], alpha);
    Tape::Id log_pi, entropy;
    if (continuous) {
      const double raw = trace.raw_samples[k];
      if (!(raw > 0.0)) throw std::invalid_argument("episode loss: raw action sample <= 0");
      const double lx = std::log(raw);
      const Tape::Id diff = tape.add_scalar(tape.scale(out.mu, -1.0), lx);
      const Tape::Id quad = tape.mul(tape.square_(diff), tape.reciprocal_(tape.square_(out.sigma)));
      log_pi = tape.add_scalar(
          tape.add(tape.scale(tape.log_(out.sigma), -1.0), tape.scale(quad, -0.5)),
          -lx - 0.5 * std::log(two_pi));
      entropy = tape.add_scalar(tape.add(out.mu, tape.log_(out.sigma)),
                                0.5 * std::log(two_pi * std::exp(1.0)));
    } else {
      const int idx = static_cast<int>(trace.actions[k]) - 1;
      const Tape::Id lse = tape.logsumexp_(out.logits);
      log_pi = tape.sub(tape.pick(out.logits, idx), lse);
      entropy = tape.sub(lse, tape.dot(tape.softmax_(out.logits), out.logits));
    }
    const Tape::Id a_term = tape.add(tape.scale(log_pi, -u), tape.scale(entropy, -beta));
    actor = actor < 0 ? a_term : tape.add(actor, a_term);
  }

  Tape::Id loss = tape.scale(bce, 1.0 / static_cast<double>(m));
  if (critic >= 0) loss = tape.add(loss, critic);
  if (actor >= 0) loss = tape.add(loss, actor);
  return loss;
}

TrainResult train(const TrainConfig& cfg, const FlowDataset& train_ds) {
  cfg.validate();
  if (train_ds.flows.empty()) throw config_error("train: dataset has no flows");

  FlowDataset data = train_ds;
  truncate_flows(data, cfg.max_len);
  const NormalizationStats stats = compute_normalization(data);

  Model model(cfg.model, cfg.seed);
  AdamState adam(model.params(), cfg.lr);
  Tape tape(&model.params());
  // the parameter init consumes cfg.seed directly; derive a distinct stream here
  std::mt19937_64 rng(splitmix64(cfg.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> order(static_cast<size_t>(data.count()));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  long long step = 0;
  long long interval_flows = 0, interval_correct = 0;
  long long interval_consumed = 0, interval_packets = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    int pos = 0;
    while (pos < data.count()) {
      const int batch_n = std::min(cfg.batch, data.count() - pos);
      for (int b = 0; b < batch_n; ++b) {
        const Flow& flow = data.flows[static_cast<size_t>(order[static_cast<size_t>(pos + b)])];
        const double alpha_f = cfg.alpha_mode == AlphaMode::uniform ? unit(rng) : cfg.alpha;
        const std::optional<double> tradeoff =
            cfg.model.with_tradeoff ? std::optional<double>(alpha_f) : std::nullopt;
        const EpisodeTrace trace = run_episode(model, flow, stats, cfg.policy,
                                               RunMode::training, rng, cfg.max_len, tradeoff);
        tape.reset();
        const Tape::Id root =
            build_episode_loss(tape, model, flow, trace, stats, cfg.max_len, alpha_f, cfg.beta);
        const double loss = tape.scalar(root);
        if (!std::isfinite(loss))
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", flow '" + flow.flow_id + "'");
        tape.backward(root, 1.0 / static_cast<double>(batch_n));

        ++step;
        ++interval_flows;
        interval_correct += flow_verdict(trace) == flow.label ? 1 : 0;
        interval_consumed += static_cast<long long>(trace.consumed.size());
        interval_packets += trace.flow_length;
        if (step % cfg.log_every == 0) {
          TrainLogRecord rec;
          rec.step = step;
          rec.accuracy = static_cast<double>(interval_correct) / interval_flows;
          rec.sparsity = 1.0 - static_cast<double>(interval_consumed) / interval_packets;
          result.log.push_back(rec);
          interval_flows = interval_correct = 0;
          interval_consumed = interval_packets = 0;
        }
      }
      adam.step(model.params());
      pos += batch_n;
    }
  }

  result.checkpoint.config = cfg;
  result.checkpoint.stats = stats;
  result.checkpoint.params = model.params();
  return result;
}

namespace {

constexpr char magic[4] = {'S', 'P', 'I', 'D'};
constexpr std::uint32_t format_version = 1;

class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw io_error("cannot open '" + path + "' for writing");
  }
  void bytes(const char* p, size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw io_error("write to '" + path + "' failed");
  }

 private:
  std::ofstream out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw io_error("cannot open '" + path + "' for reading");
  }
  std::uint64_t offset() const { return offset_; }
  void bytes(char* p, size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
      throw checkpoint_error("truncated checkpoint at byte " + std::to_string(offset_));
    offset_ += n;
  }
  std::uint32_t u32() {
    char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::uint32_t max_len) {
    const std::uint32_t n = u32();
    if (n > max_len)
      throw checkpoint_error("implausible string length " + std::to_string(n) + " at byte " +
                             std::to_string(offset_ - 4));
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  bool at_end() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
  std::uint64_t offset_ = 0;
};

std::uint32_t enum_tag(const ByteReader& r, std::uint32_t v, std::uint32_t max,
                       const char* what) {
  if (v > max)
    throw checkpoint_error("invalid " + std::string(what) + " tag " + std::to_string(v) +
                           " at byte " + std::to_string(r.offset() - 4));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const TrainConfig& c = ckpt.config;
  ByteWriter w(path);
  w.bytes(magic, 4);
  w.u32(format_version);

  w.u32(c.model.topology == Topology::shared ? 0 : 1);
  w.u32(c.model.action_space == ActionSpace::continuous ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(c.model.discrete_actions));
  w.u32(static_cast<std::uint32_t>(c.model.first_linear));
  w.u32(static_cast<std::uint32_t>(c.model.lstm_sizes.size()));
  for (int s : c.model.lstm_sizes) w.u32(static_cast<std::uint32_t>(s));
  w.u32(c.model.with_tradeoff ? 1 : 0);
  w.u32(c.alpha_mode == AlphaMode::fixed ? 0 : 1);
  w.f64(c.alpha);
  w.f64(c.beta);
  w.f64(c.lr);
  w.u32(static_cast<std::uint32_t>(c.epochs));
  w.u32(static_cast<std::uint32_t>(c.batch));
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.max_len));
  w.u32(static_cast<std::uint32_t>(c.log_every));
  w.u32(static_cast<std::uint32_t>(c.policy.kind));
  w.f64(c.policy.rate);
  w.f64(c.policy.avg_len);

  w.u32(num_raw_features);
  for (int i = 0; i < num_raw_features; ++i) w.f64(ckpt.stats.mean[i]);
  for (int i = 0; i < num_raw_features; ++i) w.f64(ckpt.stats.stddev[i]);

  w.u32(static_cast<std::uint32_t>(ckpt.params.count()));
  for (int i = 0; i < ckpt.params.count(); ++i) {
    const Parameter& p = ckpt.params.at(i);
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index col = 0; col < p.value.cols(); ++col) w.f64(p.value(r, col));
  }
  w.finish(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  ByteReader r(path);
  char m[4];
  r.bytes(m, 4);
  if (std::memcmp(m, magic, 4) != 0)
    throw checkpoint_error("'" + path + "' is not a checkpoint file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != format_version)
    throw checkpoint_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  TrainConfig& c = ckpt.config;
  c.model.topology = enum_tag(r, r.u32(), 1, "topology") == 0 ? Topology::shared
                                                              : Topology::separate;
  c.model.action_space = enum_tag(r, r.u32(), 1, "action space") == 0 ? ActionSpace::continuous
                                                                      : ActionSpace::discrete;
  c.model.discrete_actions = static_cast<int>(r.u32());
  c.model.first_linear = static_cast<int>(r.u32());
  const std::uint32_t n_lstm = r.u32();
  if (n_lstm < 1 || n_lstm > 64)
    throw checkpoint_error("implausible recurrent layer count " + std::to_string(n_lstm) +
                           " at byte " + std::to_string(r.offset() - 4));
  c.model.lstm_sizes.clear();
  for (std::uint32_t i = 0; i < n_lstm; ++i) c.model.lstm_sizes.push_back(static_cast<int>(r.u32()));
  c.model.with_tradeoff = enum_tag(r, r.u32(), 1, "tradeoff flag") == 1;
  c.alpha_mode = enum_tag(r, r.u32(), 1, "alpha mode") == 0 ? AlphaMode::fixed : AlphaMode::uniform;
  c.alpha = r.f64();
  c.beta = r.f64();
  c.lr = r.f64();
  c.epochs = static_cast<int>(r.u32());
  c.batch = static_cast<int>(r.u32());
  c.seed = r.u64();
  c.max_len = static_cast<int>(r.u32());
  c.log_every = static_cast<int>(r.u32());
  c.policy.kind = static_cast<PolicyKind>(enum_tag(r, r.u32(), 4, "policy kind"));
  c.policy.rate = r.f64();
  c.policy.avg_len = r.f64();

  const std::uint32_t dim = r.u32();
  if (dim != num_raw_features)
    throw checkpoint_error("checkpoint normalizes " + std::to_string(dim) +
                           " features, expected " + std::to_string(num_raw_features));
  for (int i = 0; i < num_raw_features; ++i) ckpt.stats.mean[i] = r.f64();
  for (int i = 0; i < num_raw_features; ++i) ckpt.stats.stddev[i] = r.f64();

  const std::uint32_t n_params = r.u32();
  if (n_params > 4096)
    throw checkpoint_error("implausible parameter count " + std::to_string(n_params) +
                           " at byte " + std::to_string(r.offset() - 4));
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::string name = r.str(4096);
    if (ckpt.params.index_of(name) >= 0)
      throw checkpoint_error("duplicate checkpoint parameter '" + name + "'");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows < 1 || cols < 1 || static_cast<std::uint64_t>(rows) * cols > (1ull << 26))
      throw checkpoint_error("implausible shape for parameter '" + name + "' at byte " +
                             std::to_string(r.offset() - 8));
    const int id = ckpt.params.add(name, static_cast<int>(rows), static_cast<int>(cols));
    Mat& v = ckpt.params.at(id).value;
    for (std::uint32_t row = 0; row < rows; ++row)
      for (std::uint32_t col = 0; col < cols; ++col) v(row, col) = r.f64();
  }
  if (!r.at_end())
    throw checkpoint_error("trailing data after checkpoint payload at byte " +
                           std::to_string(r.offset()));
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt, std::optional<Topology> expect) {
  const auto name = [](Topology t) { return t == Topology::shared ? "shared" : "separate"; };
  if (expect.has_value() && *expect != ckpt.config.model.topology)
    throw mismatch_error(std::string("checkpoint topology is ") +
                         name(ckpt.config.model.topology) + ", expected " + name(*expect));
  return Model(ckpt.config.model, ckpt.params);
}

}  // namespace sparseids
