#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sparseids/math.hpp"

namespace sparseids {

// one named tensor with a gradient slot; vectors are stored as n x 1
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
};

class ParameterStore {
 public:
  int add(const std::string& name, int rows, int cols);
  int index_of(const std::string& name) const;          // -1 when absent
  Parameter& at(int id) { return params_[static_cast<size_t>(id)]; }
  const Parameter& at(int id) const { return params_[static_cast<size_t>(id)]; }
  int count() const { return static_cast<int>(params_.size()); }
  long long scalar_count() const;
  void zero_grads();
  // uniform in +-1/sqrt(fan_in); fan_in = cols for matrices, rows for column vectors
  void init_uniform(std::uint64_t seed);

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> index_;
};

// reverse-mode tape over vector-valued nodes; parameters live in a ParameterStore
class Tape {
 public:
  using Id = int;

  explicit Tape(ParameterStore* store) : store_(store) {}

  Id constant(Vec v);
  Id constant(double x);

  // y = W x + b
  Id affine(int w_param, Id x, int b_param);
  // y = Wx x + Wh h + b (the recurrent pre-activation)
  Id affine2(int wx_param, Id x, int wh_param, Id h, int b_param);

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise
  Id scale(Id a, double c);
  Id add_scalar(Id a, double c);
  Id sigmoid_(Id a);
  Id tanh_(Id a);
  Id softplus_(Id a);
  Id exp_(Id a);
  Id log_(Id a);
  Id square_(Id a);
  Id reciprocal_(Id a);
  Id segment(Id a, int start, int len);
  Id pick(Id a, int i);  // size-1 view of one component
  Id sum(Id a);
  Id mean(Id a);
  Id dot(Id a, Id b);
  Id softmax_(Id a);
  Id logsumexp_(Id a);

  const Vec& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
  double scalar(Id id) const;

  // accumulates d(seed * root)/d(param) into the store's grad slots;
  // root must be a size-1 node from this tape
  void backward(Id root, double seed = 1.0);

  size_t size() const { return nodes_.size(); }
  void reset() { nodes_.clear(); }

 private:
  enum class Op : std::uint8_t {
    kConst, kAffine, kAffine2, kAdd, kSub, kMul, kScale, kAddScalar,
    kSigmoid, kTanh, kSoftplus, kExp, kLog, kSquare, kReciprocal,
    kSegment, kPick, kSum, kMean, kDot, kSoftmax, kLogSumExp,
  };

  struct Node {
    Vec value;
    Vec grad;
    Op op = Op::kConst;
    Id a = -1, b = -1;     // parent nodes
    int p0 = -1, p1 = -1, p2 = -1;  // parameter ids (affine forms)
    int i0 = 0, i1 = 0;    // segment/pick bounds
    double c = 0.0;        // scalar payload
  };

  Id push(Node n);
  void check(Id id) const;

  ParameterStore* store_;
  std::vector<Node> nodes_;
};

// Adam with bias correction; step() consumes and clears the store's gradients
class AdamState {
 public:
  AdamState(const ParameterStore& store, double lr,
            double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParameterStore& store);
  long long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

// forward-only building blocks (deployment path); both paths share the exact
// same arithmetic order so training-time replays reproduce rollout values bitwise
Vec dense_forward(const Mat& w, const Vec& x, const Mat& b);

struct LstmParams {
  int wx = -1, wh = -1, b = -1;  // parameter ids; wx: 4H x in, wh: 4H x H, b: 4H x 1
  int in = 0, hidden = 0;
};

struct LstmState {
  std::vector<Vec> h, c;
  void reset(const std::vector<int>& sizes);
};

// gate order [input, forget, cell, output]; returns the top-layer hidden vector
const Vec& lstm_stack_forward(const ParameterStore& store,
                              const std::vector<LstmParams>& layers,
                              const Vec& x, LstmState& state);

// tape twin of lstm_stack_forward
struct LstmTapeState {
  std::vector<Tape::Id> h, c;
};
Tape::Id lstm_stack_tape(Tape& t, const std::vector<LstmParams>& layers,
                         Tape::Id x, LstmTapeState& state);

}  // namespace sparseids
