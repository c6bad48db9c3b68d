#include "sparseids/model.hpp"

#include <stdexcept>

#include "sparseids/errors.hpp"
#include "sparseids/flow_data.hpp"

namespace sparseids {

int ModelConfig::input_dim() const { return feature_dim(with_tradeoff); }

void ModelConfig::validate() const {
  if (first_linear < 1) throw config_error("model: first_linear must be >= 1");
  if (lstm_sizes.empty()) throw config_error("model: at least one recurrent layer required");
  for (int s : lstm_sizes)
    if (s < 1) throw config_error("model: recurrent layer sizes must be >= 1");
  if (action_space == ActionSpace::discrete && discrete_actions < 1)
    throw config_error("model: discrete action count must be >= 1");
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build();
  store_.init_uniform(seed);
}

Model::Model(ModelConfig cfg, ParameterStore params) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build();  // defines the expected names and shapes in store_
  for (int i = 0; i < store_.count(); ++i) {
    const Parameter& want = store_.at(i);
    const int j = params.index_of(want.name);
    if (j < 0) throw checkpoint_error("checkpoint is missing parameter '" + want.name + "'");
    const Parameter& have = params.at(j);
    if (have.value.rows() != want.value.rows() || have.value.cols() != want.value.cols())
      throw checkpoint_error("checkpoint parameter '" + want.name + "' has shape " +
                             std::to_string(have.value.rows()) + "x" +
                             std::to_string(have.value.cols()) + ", expected " +
                             std::to_string(want.value.rows()) + "x" +
                             std::to_string(want.value.cols()));
    store_.at(i).value = have.value;
  }
  if (params.count() != store_.count())
    throw checkpoint_error("checkpoint carries " + std::to_string(params.count()) +
                           " parameters, the declared topology expects " +
                           std::to_string(store_.count()));
}

int Model::actor_out_dim() const {
  return cfg_.action_space == ActionSpace::continuous ? 2 : cfg_.discrete_actions;
}

Model::TrunkIds Model::build_trunk(const std::string& prefix) {
  TrunkIds t;
  t.in_w = store_.add(prefix + ".in.w", cfg_.first_linear, cfg_.input_dim());
  t.in_b = store_.add(prefix + ".in.b", cfg_.first_linear, 1);
  int in = cfg_.first_linear;
  for (size_t l = 0; l < cfg_.lstm_sizes.size(); ++l) {
    const int h = cfg_.lstm_sizes[l];
    LstmParams lp;
    lp.in = in;
    lp.hidden = h;
    const std::string base = prefix + ".lstm" + std::to_string(l);
    lp.wx = store_.add(base + ".wx", 4 * h, in);
    lp.wh = store_.add(base + ".wh", 4 * h, h);
    lp.b = store_.add(base + ".b", 4 * h, 1);
    t.lstm.push_back(lp);
    in = h;
  }
  return t;
}

Model::HeadIds Model::build_head(const std::string& prefix, int out_dim) {
  HeadIds h;
  h.w = store_.add(prefix + ".head.w", out_dim, cfg_.lstm_sizes.back());
  h.b = store_.add(prefix + ".head.b", out_dim, 1);
  return h;
}

void Model::build() {
  if (cfg_.topology == Topology::shared) {
    clf_trunk_ = build_trunk("trunk");
  } else {
    clf_trunk_ = build_trunk("clf");
    actor_trunk_ = build_trunk("actor");
    critic_trunk_ = build_trunk("critic");
  }
  clf_head_ = build_head("clf", 1);
  actor_head_ = build_head("actor", actor_out_dim());
  critic_head_ = build_head("critic", 2);
}

Model::EvalState Model::make_state() const {
  EvalState s;
  s.clf.reset(cfg_.lstm_sizes);
  if (cfg_.topology == Topology::separate) {
    s.actor.reset(cfg_.lstm_sizes);
    s.critic.reset(cfg_.lstm_sizes);
  }
  return s;
}

const Vec& Model::trunk_forward(const TrunkIds& t, const Vec& x, LstmState& st) const {
  // the input linear has no activation of its own; the recurrent gates provide it
  const Vec proj = dense_forward(store_.at(t.in_w).value, x, store_.at(t.in_b).value);
  return lstm_stack_forward(store_, t.lstm, proj, st);
}

Model::StepOut Model::step(const Vec& x, EvalState& state, bool with_actor,
                           bool with_critic) const {
  if (x.size() != cfg_.input_dim())
    throw std::invalid_argument("model step: feature dimension mismatch");
  StepOut out;
  const bool shared = cfg_.topology == Topology::shared;

  const Vec& clf_top = trunk_forward(clf_trunk_, x, state.clf);
  const Vec clf_out =
      dense_forward(store_.at(clf_head_.w).value, clf_top, store_.at(clf_head_.b).value);
  out.logit = clf_out[0];
  out.confidence = sigmoid(out.logit);

  if (with_actor) {
    const Vec& top = shared ? clf_top : trunk_forward(actor_trunk_, x, state.actor);
    const Vec raw =
        dense_forward(store_.at(actor_head_.w).value, top, store_.at(actor_head_.b).value);
    out.dist.space = cfg_.action_space;
    if (cfg_.action_space == ActionSpace::continuous) {
      out.dist.mu = softplus(raw[0]);
      out.dist.sigma = softplus(raw[1]);
    } else {
      out.dist.probs = softmax(raw);
    }
  }
  if (with_critic) {
    const Vec& top = shared ? clf_top : trunk_forward(critic_trunk_, x, state.critic);
    const Vec v =
        dense_forward(store_.at(critic_head_.w).value, top, store_.at(critic_head_.b).value);
    out.v_cls = v[0];
    out.v_sp = v[1];
  }
  return out;
}

Model::TapeState Model::make_tape_state(Tape& t) const {
  TapeState s;
  auto zeros = [&](LstmTapeState& st) {
    st.h.clear();
    st.c.clear();
    for (int size : cfg_.lstm_sizes) {
      st.h.push_back(t.constant(Vec::Zero(size)));
      st.c.push_back(t.constant(Vec::Zero(size)));
    }
  };
  zeros(s.clf);
  if (cfg_.topology == Topology::separate) {
    zeros(s.actor);
    zeros(s.critic);
  }
  return s;
}

Tape::Id Model::trunk_tape(Tape& tp, const TrunkIds& t, Tape::Id x, LstmTapeState& st) const {
  const Tape::Id proj = tp.affine(t.in_w, x, t.in_b);
  return lstm_stack_tape(tp, t.lstm, proj, st);
}

Model::TapeStepOut Model::tape_step(Tape& t, Tape::Id x, TapeState& state, bool with_actor,
                                    bool with_critic) const {
  TapeStepOut out;
  const bool shared = cfg_.topology == Topology::shared;

  const Tape::Id clf_top = trunk_tape(t, clf_trunk_, x, state.clf);
  out.logit = t.pick(t.affine(clf_head_.w, clf_top, clf_head_.b), 0);

  if (with_actor) {
    const Tape::Id top = shared ? clf_top : trunk_tape(t, actor_trunk_, x, state.actor);
    const Tape::Id raw = t.affine(actor_head_.w, top, actor_head_.b);
    if (cfg_.action_space == ActionSpace::continuous) {
      out.mu = t.softplus_(t.pick(raw, 0));
      out.sigma = t.softplus_(t.pick(raw, 1));
    } else {
      out.logits = raw;
    }
  }
  if (with_critic) {
    const Tape::Id top = shared ? clf_top : trunk_tape(t, critic_trunk_, x, state.critic);
    out.values = t.affine(critic_head_.w, top, critic_head_.b);
  }
  return out;
}

}  // namespace sparseids
