#include "sparseids/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "sparseids/classifier.hpp"
#include "sparseids/errors.hpp"

namespace sparseids {

namespace {

struct FlowOutcome {
  int label = 0;
  int verdict = 0;
  int consumed = 0;
  int length = 0;
  const std::string* attack_type = nullptr;
  std::vector<int> consumed_indices;
  std::vector<double> effective_confidence;
};

std::optional<double> effective_tradeoff(const Model& model, const EvalConfig& cfg) {
  if (!model.config().with_tradeoff) {
    if (cfg.tradeoff.has_value())
      throw config_error("this model has no tradeoff input to steer");
    return std::nullopt;
  }
  const double t = cfg.tradeoff.value_or(1.0);
  if (t < 0.0 || t > 1.0) throw config_error("evaluate: tradeoff must lie in [0,1]");
  return t;
}

int resolve_max_len(const EvalConfig& cfg) {
  if (cfg.max_len < 1) throw config_error("evaluate: max flow length must be >= 1");
  return cfg.max_len;
}

// runs every flow in deployment mode; outcomes land in flow order regardless of
// the thread count because each flow owns slot i and seed splitmix64(seed ^ i)
std::vector<FlowOutcome> run_corpus(const Model& model, const NormalizationStats& stats,
                                    const FlowDataset& ds, const EvalConfig& cfg,
                                    bool keep_traces) {
  if (ds.flows.empty()) throw config_error("evaluate: test set has no flows");
  const int max_len = resolve_max_len(cfg);
  const std::optional<double> tradeoff = effective_tradeoff(model, cfg);
  const int n = ds.count();
  std::vector<FlowOutcome> out(static_cast<size_t>(n));

  auto eval_range = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const Flow& flow = ds.flows[static_cast<size_t>(i)];
      std::mt19937_64 rng(splitmix64(cfg.seed ^ static_cast<std::uint64_t>(i)));
      const EpisodeTrace trace = run_episode(model, flow, stats, cfg.policy,
                                             RunMode::deployment, rng, max_len, tradeoff);
      FlowOutcome& o = out[static_cast<size_t>(i)];
      o.label = flow.label;
      o.verdict = flow_verdict(trace);
      o.consumed = static_cast<int>(trace.consumed.size());
      o.length = trace.flow_length;
      o.attack_type = &flow.attack_type;
      if (keep_traces) {
        o.consumed_indices = trace.consumed;
        o.effective_confidence = inherited_confidences(trace);
      }
    }
  };

  const int threads = std::max(1, std::min(cfg.threads, n));
  if (threads == 1) {
    eval_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(eval_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace

void finalize_metrics(MetricsReport& r) {
  const long long total = r.tp + r.fp + r.tn + r.fn;
  r.accuracy = total > 0 ? static_cast<double>(r.tp + r.tn) / static_cast<double>(total) : 0.0;

  r.precision_defined = r.tp + r.fp > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp)
                                    : 0.0;
  r.recall_defined = r.tp + r.fn > 0;
  r.recall = r.recall_defined ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;

  r.f1_defined = r.precision_defined && r.recall_defined;
  const double pr = r.precision + r.recall;
  r.f1 = r.f1_defined && pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;

  r.youden_defined = r.recall_defined && r.tn + r.fp > 0;
  r.youden = r.youden_defined
                 ? r.recall + static_cast<double>(r.tn) / static_cast<double>(r.tn + r.fp) - 1.0
                 : 0.0;

  r.sparsity = r.total_packets > 0
                   ? 1.0 - static_cast<double>(r.consumed_packets) /
                               static_cast<double>(r.total_packets)
                   : 0.0;
}

MetricsReport evaluate(const Model& model, const NormalizationStats& stats,
                       const FlowDataset& test_ds, const EvalConfig& cfg) {
  const std::vector<FlowOutcome> outcomes = run_corpus(model, stats, test_ds, cfg, false);
  MetricsReport r;
  for (const FlowOutcome& o : outcomes) {
    ++r.flows;
    if (o.label == 1) {
      ++(o.verdict == 1 ? r.tp : r.fn);
    } else {
      ++(o.verdict == 1 ? r.fp : r.tn);
    }
    r.consumed_packets += o.consumed;
    r.total_packets += o.length;
    TypeStats& t = r.by_type[*o.attack_type];
    ++t.flows;
    t.flagged += o.verdict;
    t.consumed_packets += o.consumed;
    t.total_packets += o.length;
  }
  finalize_metrics(r);
  return r;
}

MetricsReport evaluate(const Checkpoint& ckpt, const FlowDataset& test_ds,
                       const EvalConfig& cfg) {
  const Model model = model_from_checkpoint(ckpt);
  EvalConfig effective = cfg;
  if (effective.max_len < 1) effective.max_len = ckpt.config.max_len;
  return evaluate(model, ckpt.stats, test_ds, effective);
}

SamplingHistogram per_attack_histogram(const Model& model, const NormalizationStats& stats,
                                       const FlowDataset& test_ds, const EvalConfig& cfg,
                                       const std::string& attack_type) {
  if (attack_type != "All") {
    const auto counts = test_ds.attack_type_counts();
    if (counts.find(attack_type) == counts.end()) {
      std::string available = "All";
      for (const auto& [name, _] : counts) available += ", " + name;
      throw config_error("unknown attack type '" + attack_type + "' (available: " + available +
                         ")");
    }
  }
  const std::vector<FlowOutcome> outcomes = run_corpus(model, stats, test_ds, cfg, true);
  const int max_len = cfg.max_len;

  SamplingHistogram h;
  h.attack_type = attack_type;
  h.alive.assign(static_cast<size_t>(max_len), 0);
  h.consumed.assign(static_cast<size_t>(max_len), 0);
  h.mean_confidence.assign(static_cast<size_t>(max_len), 0.0);

  for (const FlowOutcome& o : outcomes) {
    if (attack_type != "All" && *o.attack_type != attack_type) continue;
    for (int j = 0; j < o.length; ++j) {
      ++h.alive[static_cast<size_t>(j)];
      h.mean_confidence[static_cast<size_t>(j)] += o.effective_confidence[static_cast<size_t>(j)];
    }
    for (int idx : o.consumed_indices) ++h.consumed[static_cast<size_t>(idx)];
  }
  for (int j = 0; j < max_len; ++j)
    if (h.alive[static_cast<size_t>(j)] > 0)
      h.mean_confidence[static_cast<size_t>(j)] /=
          static_cast<double>(h.alive[static_cast<size_t>(j)]);
  return h;
}

SamplingHistogram per_attack_histogram(const Checkpoint& ckpt, const FlowDataset& test_ds,
                                       const EvalConfig& cfg, const std::string& attack_type) {
  const Model model = model_from_checkpoint(ckpt);
  EvalConfig effective = cfg;
  if (effective.max_len < 1) effective.max_len = ckpt.config.max_len;
  return per_attack_histogram(model, ckpt.stats, test_ds, effective, attack_type);
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

void write_metrics_text(std::ostream& out, const MetricsReport& r, bool by_type) {
  out << "flows:     " << r.flows << "\n";
  out << "confusion: tp=" << r.tp << " fp=" << r.fp << " tn=" << r.tn << " fn=" << r.fn << "\n";
  out << "accuracy:  " << fmt(r.accuracy) << "\n";
  out << "precision: " << fmt(r.precision) << (r.precision_defined ? "" : " (undefined)") << "\n";
  out << "recall:    " << fmt(r.recall) << (r.recall_defined ? "" : " (undefined)") << "\n";
  out << "f1:        " << fmt(r.f1) << (r.f1_defined ? "" : " (undefined)") << "\n";
  out << "youden:    " << fmt(r.youden) << (r.youden_defined ? "" : " (undefined)") << "\n";
  out << "sparsity:  " << fmt(r.sparsity) << " (" << r.consumed_packets << "/" << r.total_packets
      << " packets consumed)\n";
  if (!by_type) return;
  out << "by attack type:\n";
  for (const auto& [name, t] : r.by_type) {
    const double flagged_frac =
        t.flows > 0 ? static_cast<double>(t.flagged) / static_cast<double>(t.flows) : 0.0;
    const double sp = t.total_packets > 0
                          ? 1.0 - static_cast<double>(t.consumed_packets) /
                                      static_cast<double>(t.total_packets)
                          : 0.0;
    out << "  " << name << ": flows=" << t.flows << " flagged=" << t.flagged << " ("
        << fmt(flagged_frac) << ") sparsity=" << fmt(sp) << "\n";
  }
}

void write_metrics_kv(std::ostream& out, const MetricsReport& r) {
  out << "flows=" << r.flows << "\n";
  out << "tp=" << r.tp << "\n";
  out << "fp=" << r.fp << "\n";
  out << "tn=" << r.tn << "\n";
  out << "fn=" << r.fn << "\n";
  out << "accuracy=" << fmt(r.accuracy) << "\n";
  out << "precision=" << fmt(r.precision) << "\n";
  out << "precision_defined=" << (r.precision_defined ? 1 : 0) << "\n";
  out << "recall=" << fmt(r.recall) << "\n";
  out << "recall_defined=" << (r.recall_defined ? 1 : 0) << "\n";
  out << "f1=" << fmt(r.f1) << "\n";
  out << "f1_defined=" << (r.f1_defined ? 1 : 0) << "\n";
  out << "youden=" << fmt(r.youden) << "\n";
  out << "youden_defined=" << (r.youden_defined ? 1 : 0) << "\n";
  out << "sparsity=" << fmt(r.sparsity) << "\n";
  out << "consumed_packets=" << r.consumed_packets << "\n";
  out << "total_packets=" << r.total_packets << "\n";
}

void write_histogram_csv(std::ostream& out, const SamplingHistogram& h) {
  out << "position,alive,consumed,mean_confidence\n";
  for (size_t j = 0; j < h.alive.size(); ++j)
    out << j << "," << h.alive[j] << "," << h.consumed[j] << "," << fmt(h.mean_confidence[j])
        << "\n";
}

}  // namespace sparseids
