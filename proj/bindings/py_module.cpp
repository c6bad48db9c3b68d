#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sparseids/classifier.hpp"
#include "sparseids/errors.hpp"
#include "sparseids/evaluator.hpp"
#include "sparseids/flow_data.hpp"
#include "sparseids/steering.hpp"
#include "sparseids/trainer.hpp"

namespace py = pybind11;
using namespace sparseids;

namespace {

std::vector<double> to_list(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "per-packet recurrent intrusion classifier with a learned packet sampler";

  py::register_exception<io_error>(m, "IoError");
  py::register_exception<schema_error>(m, "SchemaError");
  py::register_exception<checkpoint_error>(m, "CheckpointError");
  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<mismatch_error>(m, "MismatchError");

  py::enum_<Topology>(m, "Topology")
      .value("shared", Topology::shared)
      .value("separate", Topology::separate);
  py::enum_<ActionSpace>(m, "ActionSpace")
      .value("continuous", ActionSpace::continuous)
      .value("discrete", ActionSpace::discrete);
  py::enum_<AlphaMode>(m, "AlphaMode")
      .value("fixed", AlphaMode::fixed)
      .value("uniform", AlphaMode::uniform);
  py::enum_<PolicyKind>(m, "PolicyKind")
      .value("rl", PolicyKind::rl)
      .value("random", PolicyKind::random_iid)
      .value("relative_first_m", PolicyKind::relative_first_m)
      .value("first_m", PolicyKind::first_m)
      .value("every_ith", PolicyKind::every_ith);
  py::enum_<SteerStop>(m, "SteerStop")
      .value("end_of_stream", SteerStop::end_of_stream)
      .value("target_reached", SteerStop::target_reached)
      .value("tradeoff_floor", SteerStop::tradeoff_floor);

  py::class_<PacketRecord>(m, "PacketRecord")
      .def(py::init<>())
      .def_readwrite("length_bytes", &PacketRecord::length_bytes)
      .def_readwrite("iat_us", &PacketRecord::iat_us)
      .def_readwrite("direction", &PacketRecord::direction)
      .def_property(
          "tcp_flags",
          [](const PacketRecord& p) {
            return std::vector<int>(p.tcp_flags.begin(), p.tcp_flags.end());
          },
          [](PacketRecord& p, const std::vector<int>& flags) {
            if (flags.size() != static_cast<size_t>(num_tcp_flags))
              throw config_error("tcp_flags needs exactly 8 entries");
            std::copy(flags.begin(), flags.end(), p.tcp_flags.begin());
          });

  py::class_<Flow>(m, "Flow")
      .def(py::init<>())
      .def_readwrite("flow_id", &Flow::flow_id)
      .def_readwrite("src_port", &Flow::src_port)
      .def_readwrite("dst_port", &Flow::dst_port)
      .def_readwrite("protocol_id", &Flow::protocol_id)
      .def_readwrite("label", &Flow::label)
      .def_readwrite("attack_type", &Flow::attack_type)
      .def_readwrite("packets", &Flow::packets)
      .def("length", &Flow::length);

  py::class_<FlowDataset>(m, "FlowDataset")
      .def(py::init<>())
      .def_readwrite("flows", &FlowDataset::flows)
      .def("count", &FlowDataset::count)
      .def("total_packets", &FlowDataset::total_packets)
      .def("attack_count", &FlowDataset::attack_count)
      .def("attack_type_counts", &FlowDataset::attack_type_counts);

  py::class_<NormalizationStats>(m, "NormalizationStats")
      .def(py::init<>())
      .def_property_readonly("mean",
                             [](const NormalizationStats& s) { return to_list(s.mean); })
      .def_property_readonly("stddev",
                             [](const NormalizationStats& s) { return to_list(s.stddev); });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_flows", &SynthConfig::n_flows)
      .def_readwrite("min_len", &SynthConfig::min_len)
      .def_readwrite("max_len", &SynthConfig::max_len)
      .def_readwrite("attack_ratio", &SynthConfig::attack_ratio)
      .def_readwrite("signal_index", &SynthConfig::signal_index)
      .def_readwrite("hot_prob", &SynthConfig::hot_prob);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("topology", &ModelConfig::topology)
      .def_readwrite("action_space", &ModelConfig::action_space)
      .def_readwrite("discrete_actions", &ModelConfig::discrete_actions)
      .def_readwrite("first_linear", &ModelConfig::first_linear)
      .def_readwrite("lstm_sizes", &ModelConfig::lstm_sizes)
      .def_readwrite("with_tradeoff", &ModelConfig::with_tradeoff)
      .def("input_dim", &ModelConfig::input_dim);

  py::class_<SamplingPolicy>(m, "SamplingPolicy")
      .def(py::init<>())
      .def_readwrite("kind", &SamplingPolicy::kind)
      .def_readwrite("rate", &SamplingPolicy::rate)
      .def_readwrite("avg_len", &SamplingPolicy::avg_len);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("alpha_mode", &TrainConfig::alpha_mode)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("max_len", &TrainConfig::max_len)
      .def_readwrite("log_every", &TrainConfig::log_every)
      .def_readwrite("model", &TrainConfig::model)
      .def_readwrite("policy", &TrainConfig::policy);

  py::class_<TrainLogRecord>(m, "TrainLogRecord")
      .def_readonly("step", &TrainLogRecord::step)
      .def_readonly("accuracy", &TrainLogRecord::accuracy)
      .def_readonly("sparsity", &TrainLogRecord::sparsity);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("config", &Checkpoint::config)
      .def_readonly("stats", &Checkpoint::stats)
      .def("param_count", [](const Checkpoint& c) { return c.params.scalar_count(); })
      .def("param_names", [](const Checkpoint& c) {
        std::vector<std::string> names;
        for (int i = 0; i < c.params.count(); ++i) names.push_back(c.params.at(i).name);
        return names;
      });

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("checkpoint", &TrainResult::checkpoint)
      .def_readonly("log", &TrainResult::log);

  py::class_<TypeStats>(m, "TypeStats")
      .def_readonly("flows", &TypeStats::flows)
      .def_readonly("flagged", &TypeStats::flagged)
      .def_readonly("consumed_packets", &TypeStats::consumed_packets)
      .def_readonly("total_packets", &TypeStats::total_packets);

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("flows", &MetricsReport::flows)
      .def_readonly("tp", &MetricsReport::tp)
      .def_readonly("fp", &MetricsReport::fp)
      .def_readonly("tn", &MetricsReport::tn)
      .def_readonly("fn", &MetricsReport::fn)
      .def_readonly("accuracy", &MetricsReport::accuracy)
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("recall", &MetricsReport::recall)
      .def_readonly("f1", &MetricsReport::f1)
      .def_readonly("youden", &MetricsReport::youden)
      .def_readonly("precision_defined", &MetricsReport::precision_defined)
      .def_readonly("recall_defined", &MetricsReport::recall_defined)
      .def_readonly("f1_defined", &MetricsReport::f1_defined)
      .def_readonly("youden_defined", &MetricsReport::youden_defined)
      .def_readonly("consumed_packets", &MetricsReport::consumed_packets)
      .def_readonly("total_packets", &MetricsReport::total_packets)
      .def_readonly("sparsity", &MetricsReport::sparsity)
      .def_readonly("by_type", &MetricsReport::by_type)
      .def("text", [](const MetricsReport& r) {
        std::ostringstream out;
        write_metrics_text(out, r, true);
        return out.str();
      });

  py::class_<EvalConfig>(m, "EvalConfig")
      .def(py::init<>())
      .def_readwrite("policy", &EvalConfig::policy)
      .def_readwrite("max_len", &EvalConfig::max_len)
      .def_readwrite("seed", &EvalConfig::seed)
      .def_readwrite("threads", &EvalConfig::threads)
      .def_readwrite("tradeoff", &EvalConfig::tradeoff);

  py::class_<SamplingHistogram>(m, "SamplingHistogram")
      .def_readonly("attack_type", &SamplingHistogram::attack_type)
      .def_readonly("alive", &SamplingHistogram::alive)
      .def_readonly("consumed", &SamplingHistogram::consumed)
      .def_readonly("mean_confidence", &SamplingHistogram::mean_confidence);

  py::class_<SteeringConfig>(m, "SteeringConfig")
      .def(py::init<>())
      .def_readwrite("target", &SteeringConfig::target)
      .def_readwrite("step", &SteeringConfig::step)
      .def_readwrite("tradeoff_max", &SteeringConfig::tradeoff_max)
      .def_readwrite("window", &SteeringConfig::window);

  py::class_<SteerRecord>(m, "SteerRecord")
      .def_readonly("window", &SteerRecord::window)
      .def_readonly("tradeoff", &SteerRecord::tradeoff)
      .def_readonly("sparsity", &SteerRecord::sparsity);

  py::class_<SteerResult>(m, "SteerResult")
      .def_readonly("trace", &SteerResult::trace)
      .def_readonly("final_tradeoff", &SteerResult::final_tradeoff)
      .def_readonly("stop", &SteerResult::stop);

  m.def("generate_synthetic", &generate_synthetic, py::arg("config"), py::arg("seed"));
  m.def("load_flows_csv", [](const std::string& path) { return load_flows_csv(path); },
        py::arg("path"));
  m.def("save_flows_csv",
        [](const FlowDataset& ds, const std::string& path) { save_flows_csv(ds, path); },
        py::arg("dataset"), py::arg("path"));
  m.def("truncate_flows", &truncate_flows, py::arg("dataset"), py::arg("max_len"));
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("train_fraction"),
        py::arg("seed"));
  m.def("compute_normalization", &compute_normalization, py::arg("dataset"));

  m.def("train", &train, py::arg("config"), py::arg("train_dataset"),
        py::call_guard<py::gil_scoped_release>());
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("checkpoint"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("evaluate",
        [](const Checkpoint& ckpt, const FlowDataset& ds, const EvalConfig& cfg) {
          return evaluate(ckpt, ds, cfg);
        },
        py::arg("checkpoint"), py::arg("test_dataset"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("per_attack_histogram",
        [](const Checkpoint& ckpt, const FlowDataset& ds, const EvalConfig& cfg,
           const std::string& attack_type) {
          return per_attack_histogram(ckpt, ds, cfg, attack_type);
        },
        py::arg("checkpoint"), py::arg("test_dataset"), py::arg("config"),
        py::arg("attack_type"), py::call_guard<py::gil_scoped_release>());
  m.def("run_steered",
        [](const Checkpoint& ckpt, const FlowDataset& ds, const SteeringConfig& cfg, int threads,
           std::uint64_t seed) { return run_steered(ckpt, ds, cfg, threads, seed); },
        py::arg("checkpoint"), py::arg("stream"), py::arg("config"), py::arg("threads") = 1,
        py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());

  m.def("softplus", &softplus, py::arg("x"));
  m.def("lognormal_log_density", &lognormal_log_density, py::arg("x"), py::arg("mu"),
        py::arg("sigma"));
  m.def("lognormal_entropy", &lognormal_entropy, py::arg("mu"), py::arg("sigma"));
  m.def("lognormal_mean", &lognormal_mean, py::arg("mu"), py::arg("sigma"));
  m.def("classifier_loss", &classifier_loss, py::arg("confidences"), py::arg("label"));
  m.def("compute_terminal_sparsity_reward", &compute_terminal_sparsity_reward,
        py::arg("last_index"), py::arg("a_last"), py::arg("flow_length"));
  m.def("compute_utility", &compute_utility, py::arg("r_cls"), py::arg("r_sp"), py::arg("v_cls"),
        py::arg("v_sp"), py::arg("alpha"));
}
