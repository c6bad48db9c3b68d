#include <cstdint>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparseids/baseline_samplers.hpp"
#include "sparseids/errors.hpp"
#include "sparseids/evaluator.hpp"
#include "sparseids/flow_data.hpp"
#include "sparseids/steering.hpp"
#include "sparseids/trainer.hpp"

namespace {

using namespace sparseids;

double parse_number(const std::string& text, const char* what) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw config_error(std::string(what) + ": '" + text + "' is not a number");
  return value;
}

std::vector<int> parse_layer_list(const std::string& text) {
  std::vector<int> sizes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || v < 1)
      throw config_error("--layers: '" + item + "' is not a positive integer");
    sizes.push_back(v);
  }
  if (sizes.empty()) throw config_error("--layers: at least one layer size required");
  return sizes;
}

void parse_actions(const std::string& text, ModelConfig& model) {
  if (text == "continuous") {
    model.action_space = ActionSpace::continuous;
    return;
  }
  if (text == "discrete") {
    model.action_space = ActionSpace::discrete;
    return;
  }
  if (text.rfind("discrete:", 0) == 0) {
    const std::string k = text.substr(9);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), v);
    if (ec != std::errc() || ptr != k.data() + k.size() || v < 1)
      throw config_error("--actions: '" + k + "' is not a positive action count");
    model.action_space = ActionSpace::discrete;
    model.discrete_actions = v;
    return;
  }
  throw config_error("--actions: expected continuous, discrete, or discrete:<k>");
}

Topology parse_topology(const std::string& text) {
  if (text == "shared") return Topology::shared;
  if (text == "separate") return Topology::separate;
  throw config_error("--topology: expected shared or separate");
}

double average_length(const FlowDataset& ds) {
  if (ds.flows.empty()) throw config_error("cannot derive an average flow length: no flows");
  return static_cast<double>(ds.total_packets()) / static_cast<double>(ds.count());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // fixed newlines on every platform
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  return out;
}

struct DataArgs {
  std::string path;
  int max_len = 20;
  double split = 0.667;
};

void add_data_options(CLI::App& cmd, DataArgs& data, bool max_len_note) {
  cmd.add_option("--data", data.path, "per-packet flow CSV")->required();
  cmd.add_option("--max-len", data.max_len,
                 max_len_note ? "truncate flows to this many packets (default: checkpoint value)"
                              : "truncate flows to this many packets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--split", data.split, "train fraction of the shuffled flow split")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

struct TrainArgs {
  DataArgs data;
  std::string out = "model.ckpt";
  std::string log;
  std::string alpha = "0.5";
  std::string actions = "continuous";
  std::string topology = "shared";
  std::string layers = "128,128,128";
  std::string policy = "rl";
  TrainConfig cfg;
  std::uint64_t seed = 1;
  int threads = 1;
};

int cmd_train(TrainArgs& a) {
  a.cfg.seed = a.seed;
  a.cfg.max_len = a.data.max_len;
  if (a.alpha == "uniform") {
    a.cfg.alpha_mode = AlphaMode::uniform;
    a.cfg.model.with_tradeoff = true;
  } else {
    a.cfg.alpha_mode = AlphaMode::fixed;
    a.cfg.alpha = parse_number(a.alpha, "--alpha");
  }
  parse_actions(a.actions, a.cfg.model);
  a.cfg.model.topology = parse_topology(a.topology);
  a.cfg.model.lstm_sizes = parse_layer_list(a.layers);
  a.cfg.policy.kind = parse_policy_kind(a.policy);

  const FlowDataset all = load_flows_csv(a.data.path);
  auto [train_split, test_split] = split_dataset(all, a.data.split, a.seed);
  if (train_split.flows.empty()) throw config_error("train split is empty; raise --split");

  if (a.cfg.policy.kind == PolicyKind::first_m && !(a.cfg.policy.avg_len > 0.0)) {
    FlowDataset measured = train_split;
    truncate_flows(measured, a.cfg.max_len);
    a.cfg.policy.avg_len = average_length(measured);
  }

  const TrainResult result = train(a.cfg, train_split);
  save_checkpoint(a.out, result.checkpoint);

  if (!a.log.empty()) {
    std::ofstream log = open_out(a.log);
    log << "step,accuracy,sparsity\n";
    for (const TrainLogRecord& r : result.log) {
      std::ostringstream line;
      line << r.step << "," << std::setprecision(10) << r.accuracy << "," << r.sparsity;
      log << line.str() << "\n";
    }
  }

  std::cout << "flows: train=" << train_split.count() << " test=" << test_split.count() << "\n";
  std::cout << "checkpoint: " << a.out << " ("
            << result.checkpoint.params.scalar_count() << " parameters)\n";
  if (!result.log.empty()) {
    const TrainLogRecord& last = result.log.back();
    std::ostringstream line;
    line << "last interval: step=" << last.step << " accuracy=" << std::setprecision(10)
         << last.accuracy << " sparsity=" << last.sparsity;
    std::cout << line.str() << "\n";
  }
  return 0;
}

struct EvalArgs {
  DataArgs data;
  std::string ckpt;
  std::string policy = "rl";
  double rate = 1.0;
  double avg_len = 0.0;
  double tradeoff = 1.0;
  bool has_tradeoff = false;
  bool has_max_len = false;
  bool by_attack = false;
  std::string kv_path;
  std::string hist_path;
  std::string hist_attack = "All";
  std::uint64_t seed = 1;
  int threads = 1;
};

int cmd_eval(EvalArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const FlowDataset all = load_flows_csv(a.data.path);
  auto [train_split, test_split] = split_dataset(all, a.data.split, a.seed);
  if (test_split.flows.empty()) throw config_error("test split is empty; lower --split");

  EvalConfig cfg;
  cfg.policy.kind = parse_policy_kind(a.policy);
  cfg.policy.rate = a.rate;
  cfg.policy.avg_len = a.avg_len;
  cfg.max_len = a.has_max_len ? a.data.max_len : 0;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  if (a.has_tradeoff) cfg.tradeoff = a.tradeoff;
  if (cfg.policy.kind == PolicyKind::first_m && !(cfg.policy.avg_len > 0.0)) {
    FlowDataset measured = train_split;
    truncate_flows(measured, a.has_max_len ? a.data.max_len : ckpt.config.max_len);
    cfg.policy.avg_len = average_length(measured);
  }

  const MetricsReport report = evaluate(ckpt, test_split, cfg);
  write_metrics_text(std::cout, report, a.by_attack);

  if (!a.kv_path.empty()) {
    std::ofstream out = open_out(a.kv_path);
    write_metrics_kv(out, report);
  }
  if (!a.hist_path.empty()) {
    const SamplingHistogram hist = per_attack_histogram(ckpt, test_split, cfg, a.hist_attack);
    std::ofstream out = open_out(a.hist_path);
    write_histogram_csv(out, hist);
  }
  return 0;
}

struct SteerArgs {
  DataArgs data;
  std::string ckpt;
  SteeringConfig cfg;
  std::string trace_path;
  std::uint64_t seed = 1;
  int threads = 1;
};

int cmd_steer(SteerArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const FlowDataset all = load_flows_csv(a.data.path);
  auto [train_split, test_split] = split_dataset(all, a.data.split, a.seed);
  if (test_split.flows.empty()) throw config_error("test split is empty; lower --split");

  const SteerResult result = run_steered(ckpt, test_split, a.cfg, a.threads, a.seed);

  if (a.trace_path.empty()) {
    write_steer_csv(std::cout, result);
  } else {
    std::ofstream out = open_out(a.trace_path);
    write_steer_csv(out, result);
  }
  std::ostringstream line;
  line << "stop=" << steer_stop_name(result.stop) << " windows=" << result.trace.size()
       << " final_tradeoff=" << std::setprecision(10) << result.final_tradeoff;
  std::cout << line.str() << "\n";
  return 0;
}

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
  std::uint64_t seed = 1;
};

int cmd_synth(SynthArgs& a) {
  const FlowDataset ds = generate_synthetic(a.cfg, a.seed);
  save_flows_csv(ds, a.out);
  std::cout << "wrote " << ds.count() << " flows (" << ds.attack_count() << " attacks, "
            << ds.total_packets() << " packets) to " << a.out << "\n";
  return 0;
}

struct InspectArgs {
  std::string ckpt;
};

int cmd_inspect(InspectArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const TrainConfig& c = ckpt.config;
  std::ostringstream out;
  out << std::setprecision(10);
  out << "topology:        "
      << (c.model.topology == Topology::shared ? "shared" : "separate") << "\n";
  out << "actions:         "
      << (c.model.action_space == ActionSpace::continuous
              ? std::string("continuous")
              : "discrete:" + std::to_string(c.model.discrete_actions))
      << "\n";
  out << "input dim:       " << c.model.input_dim()
      << (c.model.with_tradeoff ? " (with tradeoff input)" : "") << "\n";
  out << "first linear:    " << c.model.first_linear << "\n";
  out << "recurrent sizes:";
  for (int s : c.model.lstm_sizes) out << " " << s;
  out << "\n";
  out << "alpha:           "
      << (c.alpha_mode == AlphaMode::uniform ? std::string("uniform per flow")
                                             : std::to_string(c.alpha))
      << "\n";
  out << "beta:            " << c.beta << "\n";
  out << "learning rate:   " << c.lr << "\n";
  out << "epochs:          " << c.epochs << "\n";
  out << "batch:           " << c.batch << "\n";
  out << "seed:            " << c.seed << "\n";
  out << "max flow length: " << c.max_len << "\n";
  out << "policy:          " << policy_kind_name(c.policy.kind);
  if (c.policy.kind != PolicyKind::rl) out << " rate=" << c.policy.rate;
  if (c.policy.kind == PolicyKind::first_m) out << " avg_len=" << c.policy.avg_len;
  out << "\n";
  out << "parameters (" << ckpt.params.count() << " tensors, " << ckpt.params.scalar_count()
      << " scalars):\n";
  for (int i = 0; i < ckpt.params.count(); ++i) {
    const Parameter& p = ckpt.params.at(i);
    out << "  " << p.name << "  " << p.value.rows() << "x" << p.value.cols() << "\n";
  }
  out << "normalization (mean / std):\n";
  for (int i = 0; i < num_raw_features; ++i)
    out << "  [" << i << "] " << ckpt.stats.mean[i] << " / " << ckpt.stats.stddev[i] << "\n";
  std::cout << out.str();
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"per-packet recurrent intrusion classifier with a learned packet sampler"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; command-line flags override it");
  app.allow_config_extras(false);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_data_options(*train, train_args.data, false);
  train->add_option("--out", train_args.out, "checkpoint output path")->capture_default_str();
  train->add_option("--log", train_args.log, "training log CSV (step,accuracy,sparsity)");
  train->add_option("--epochs", train_args.cfg.epochs, "training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--lr", train_args.cfg.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--alpha", train_args.alpha,
                    "sparsity tradeoff weight, a number or 'uniform' (per-flow U[0,1] "
                    "with the tradeoff input component)")
      ->capture_default_str();
  train->add_option("--beta", train_args.cfg.beta, "entropy bonus weight")
      ->capture_default_str();
  train->add_option("--actions", train_args.actions, "action space: continuous or discrete:<k>")
      ->capture_default_str();
  train->add_option("--topology", train_args.topology, "network topology: shared or separate")
      ->capture_default_str();
  train->add_option("--batch", train_args.cfg.batch, "flows per optimizer step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--layers", train_args.layers, "recurrent layer sizes, comma separated")
      ->capture_default_str();
  train->add_option("--first-linear", train_args.cfg.model.first_linear,
                    "width of the input linear layer")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--policy", train_args.policy,
                    "sampling policy: rl, random, first-m, relative-first-m, every-ith "
                    "(non-rl kinds train the classifier under that fixed mask)")
      ->capture_default_str();
  train->add_option("--rate", train_args.cfg.policy.rate, "target sampling rate, non-rl policies")
      ->capture_default_str();
  train->add_option("--avg-len", train_args.cfg.policy.avg_len,
                    "average flow length for first-m (default: measured on the train split)")
      ->capture_default_str();
  train->add_option("--log-every", train_args.cfg.log_every, "flows per training log record")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--seed", train_args.seed, "run seed")->capture_default_str();
  train->add_option("--threads", train_args.threads,
                    "accepted for interface uniformity; training is sequential")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint in deployment mode");
  add_data_options(*eval, eval_args.data, true);
  eval->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
  eval->add_option("--policy", eval_args.policy,
                   "sampling policy: rl, random, first-m, relative-first-m, every-ith")
      ->capture_default_str();
  eval->add_option("--rate", eval_args.rate, "target sampling rate, non-rl policies")
      ->capture_default_str();
  eval->add_option("--avg-len", eval_args.avg_len,
                   "average flow length for first-m (default: measured on the train split)")
      ->capture_default_str();
  CLI::Option* tradeoff_opt =
      eval->add_option("--tradeoff", eval_args.tradeoff,
                       "tradeoff input value for models trained with it (default 1.0)")
          ->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--by-attack", eval_args.by_attack, "append the per-attack-type breakdown");
  eval->add_option("--kv", eval_args.kv_path, "write metrics as key=value lines to this path");
  eval->add_option("--hist", eval_args.hist_path, "write the sampling histogram CSV to this path");
  eval->add_option("--hist-attack", eval_args.hist_attack,
                   "attack type the histogram covers ('All' for every flow)")
      ->capture_default_str();
  eval->add_option("--seed", eval_args.seed, "run seed (drives the random baseline)")
      ->capture_default_str();
  eval->add_option("--threads", eval_args.threads, "worker threads for per-flow evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SteerArgs steer_args;
  CLI::App* steer = app.add_subcommand("steer", "closed-loop sparsity steering on a flow stream");
  add_data_options(*steer, steer_args.data, true);
  steer->add_option("--ckpt", steer_args.ckpt, "checkpoint path (uniform-alpha training)")
      ->required();
  steer->add_option("--target", steer_args.cfg.target, "minimum allowed sparsity, in (0,1)")
      ->required();
  steer->add_option("--step", steer_args.cfg.step, "tradeoff decrement per window")
      ->capture_default_str();
  steer->add_option("--window", steer_args.cfg.window,
                    "flows per steering window (default: 1000 x checkpoint batch size)");
  steer->add_option("--trace", steer_args.trace_path,
                    "steering trace CSV path (default: print to stdout)");
  steer->add_option("--seed", steer_args.seed, "run seed")->capture_default_str();
  steer->add_option("--threads", steer_args.threads, "worker threads inside each window")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled flow CSV");
  synth->add_option("--out", synth_args.out, "output CSV path")->required();
  synth->add_option("--flows", synth_args.cfg.n_flows, "number of flows")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--min-len", synth_args.cfg.min_len, "minimum flow length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--max-len", synth_args.cfg.max_len, "maximum flow length")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--ratio", synth_args.cfg.attack_ratio, "attack flow fraction, in (0,1)")
      ->capture_default_str();
  synth->add_option("--signal", synth_args.cfg.signal_index,
                    "packet index that always carries the attack marker")
      ->capture_default_str();
  synth->add_option("--hot-prob", synth_args.cfg.hot_prob,
                    "marker probability for attack packets past the signal index")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "run seed")->capture_default_str();

  InspectArgs inspect_args;
  CLI::App* inspect = app.add_subcommand("inspect", "dump a checkpoint's configuration");
  inspect->add_option("--ckpt", inspect_args.ckpt, "checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and --version paths
    std::cerr << "error: usage: " << e.what() << "\n";
    return 1;
  }

  eval_args.has_tradeoff = tradeoff_opt->count() > 0;
  eval_args.has_max_len = eval->get_option("--max-len")->count() > 0;

  if (train->parsed()) return cmd_train(train_args);
  if (eval->parsed()) return cmd_eval(eval_args);
  if (steer->parsed()) return cmd_steer(steer_args);
  if (synth->parsed()) return cmd_synth(synth_args);
  if (inspect->parsed()) return cmd_inspect(inspect_args);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sparseids::io_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return 2;
  } catch (const sparseids::schema_error& e) {
    std::cerr << "error: schema: " << e.what() << "\n";
    return 3;
  } catch (const sparseids::checkpoint_error& e) {
    std::cerr << "error: checkpoint: " << e.what() << "\n";
    return 4;
  } catch (const sparseids::mismatch_error& e) {
    std::cerr << "error: mismatch: " << e.what() << "\n";
    return 5;
  } catch (const sparseids::config_error& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 70;
  }
}
