#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparseids/nn_core.hpp"
#include "sparseids/rl_sampler.hpp"

namespace sparseids {

enum class Topology { shared, separate };

// classifier, actor and critic each read the consumed-packet feature stream
// through [input linear -> recurrent stack -> head]. shared topology keeps one
// input linear + recurrent stack for all three and separates only the heads
struct ModelConfig {
  Topology topology = Topology::shared;
  ActionSpace action_space = ActionSpace::continuous;
  int discrete_actions = 20;
  int first_linear = 128;
  std::vector<int> lstm_sizes = {128, 128, 128};
  bool with_tradeoff = false;  // adds the raw tradeoff input component

  int input_dim() const;
  void validate() const;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);
  Model(ModelConfig cfg, ParameterStore params);  // checkpoint restore

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  long long param_count() const { return store_.scalar_count(); }

  struct EvalState {
    LstmState clf, actor, critic;  // shared topology routes everything through clf
  };
  EvalState make_state() const;

  struct StepOut {
    double logit = 0.0;
    double confidence = 0.5;
    ActionDistribution dist;  // valid when the actor ran
    double v_cls = 0.0, v_sp = 0.0;  // valid when the critic ran
  };
  // advances the recurrent state(s) by one consumed packet; the critic is only
  // evaluated when requested, so deployment never touches it
  StepOut step(const Vec& x, EvalState& state, bool with_actor, bool with_critic) const;

  struct TapeState {
    LstmTapeState clf, actor, critic;
  };
  TapeState make_tape_state(Tape& t) const;

  struct TapeStepOut {
    Tape::Id logit = -1;            // classifier head pre-activation, size 1
    Tape::Id mu = -1, sigma = -1;   // continuous actor outputs (softplus applied)
    Tape::Id logits = -1;           // discrete actor head pre-activation
    Tape::Id values = -1;           // critic head output, size 2 (v_cls, v_sp)
  };
  TapeStepOut tape_step(Tape& t, Tape::Id x, TapeState& state, bool with_actor,
                        bool with_critic) const;

 private:
  struct TrunkIds {
    int in_w = -1, in_b = -1;
    std::vector<LstmParams> lstm;
  };
  struct HeadIds {
    int w = -1, b = -1;
  };

  void build();
  TrunkIds build_trunk(const std::string& prefix);
  HeadIds build_head(const std::string& prefix, int out_dim);
  const Vec& trunk_forward(const TrunkIds& t, const Vec& x, LstmState& st) const;
  Tape::Id trunk_tape(Tape& tp, const TrunkIds& t, Tape::Id x, LstmTapeState& st) const;
  int actor_out_dim() const;

  ModelConfig cfg_;
  ParameterStore store_;
  TrunkIds clf_trunk_, actor_trunk_, critic_trunk_;  // shared: only clf_trunk_ is populated
  HeadIds clf_head_, actor_head_, critic_head_;
};

}  // namespace sparseids
