#include "sparseids/nn_core.hpp"

#include <cmath>
#include <stdexcept>

namespace sparseids {

int ParameterStore::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("parameter shape must be positive: " + name);
  Parameter p;
  p.name = name;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  int id = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  index_.emplace(name, id);
  return id;
}

int ParameterStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

long long ParameterStore::scalar_count() const {
  long long n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

void ParameterStore::init_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    const int fan_in = p.value.cols() > 1 ? static_cast<int>(p.value.cols())
                                          : static_cast<int>(p.value.rows());
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
      for (Eigen::Index i = 0; i < p.value.rows(); ++i)
        p.value(i, j) = u(rng);
    p.grad.setZero();
  }
}

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::check(Id id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw std::invalid_argument("tape: node id out of range");
}

Tape::Id Tape::constant(Vec v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n));
}

Tape::Id Tape::constant(double x) {
  Vec v(1);
  v[0] = x;
  return constant(std::move(v));
}

Tape::Id Tape::affine(int w_param, Id x, int b_param) {
  check(x);
  const Mat& w = store_->at(w_param).value;
  const Mat& b = store_->at(b_param).value;
  Node n;
  n.op = Op::kAffine;
  n.a = x;
  n.p0 = w_param;
  n.p2 = b_param;
  Vec y = w * nodes_[static_cast<size_t>(x)].value;
  y += b.col(0);
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::affine2(int wx_param, Id x, int wh_param, Id h, int b_param) {
  check(x);
  check(h);
  const Mat& wx = store_->at(wx_param).value;
  const Mat& wh = store_->at(wh_param).value;
  const Mat& b = store_->at(b_param).value;
  Node n;
  n.op = Op::kAffine2;
  n.a = x;
  n.b = h;
  n.p0 = wx_param;
  n.p1 = wh_param;
  n.p2 = b_param;
  Vec y = wx * nodes_[static_cast<size_t>(x)].value;
  y.noalias() += wh * nodes_[static_cast<size_t>(h)].value;
  y += b.col(0);
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::add(Id a, Id b) {
  check(a); check(b);
  Node n;
  n.op = Op::kAdd;
  n.a = a; n.b = b;
  n.value = nodes_[static_cast<size_t>(a)].value + nodes_[static_cast<size_t>(b)].value;
  return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
  check(a); check(b);
  Node n;
  n.op = Op::kSub;
  n.a = a; n.b = b;
  n.value = nodes_[static_cast<size_t>(a)].value - nodes_[static_cast<size_t>(b)].value;
  return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
  check(a); check(b);
  Node n;
  n.op = Op::kMul;
  n.a = a; n.b = b;
  n.value = nodes_[static_cast<size_t>(a)].value.cwiseProduct(nodes_[static_cast<size_t>(b)].value);
  return push(std::move(n));
}

Tape::Id Tape::scale(Id a, double c) {
  check(a);
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.c = c;
  n.value = c * nodes_[static_cast<size_t>(a)].value;
  return push(std::move(n));
}

Tape::Id Tape::add_scalar(Id a, double c) {
  check(a);
  Node n;
  n.op = Op::kAddScalar;
  n.a = a;
  n.c = c;
  n.value = nodes_[static_cast<size_t>(a)].value.array() + c;
  return push(std::move(n));
}

Tape::Id Tape::sigmoid_(Id a) {
  check(a);
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.unaryExpr([](double x) { return sigmoid(x); });
  return push(std::move(n));
}

Tape::Id Tape::tanh_(Id a) {
  check(a);
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.array().tanh();
  return push(std::move(n));
}

Tape::Id Tape::softplus_(Id a) {
  check(a);
  Node n;
  n.op = Op::kSoftplus;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.unaryExpr([](double x) { return softplus(x); });
  return push(std::move(n));
}

Tape::Id Tape::exp_(Id a) {
  check(a);
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.array().exp();
  return push(std::move(n));
}

Tape::Id Tape::log_(Id a) {
  check(a);
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.array().log();
  return push(std::move(n));
}

Tape::Id Tape::square_(Id a) {
  check(a);
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.array().square();
  return push(std::move(n));
}

Tape::Id Tape::reciprocal_(Id a) {
  check(a);
  Node n;
  n.op = Op::kReciprocal;
  n.a = a;
  n.value = nodes_[static_cast<size_t>(a)].value.cwiseInverse();
  return push(std::move(n));
}

Tape::Id Tape::segment(Id a, int start, int len) {
  check(a);
  const Vec& v = nodes_[static_cast<size_t>(a)].value;
  if (start < 0 || len <= 0 || start + len > v.size())
    throw std::invalid_argument("tape: segment out of range");
  Node n;
  n.op = Op::kSegment;
  n.a = a;
  n.i0 = start;
  n.i1 = len;
  n.value = v.segment(start, len);
  return push(std::move(n));
}

Tape::Id Tape::pick(Id a, int i) {
  check(a);
  const Vec& v = nodes_[static_cast<size_t>(a)].value;
  if (i < 0 || i >= v.size()) throw std::invalid_argument("tape: pick out of range");
  Node n;
  n.op = Op::kPick;
  n.a = a;
  n.i0 = i;
  Vec y(1);
  y[0] = v[i];
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
  check(a);
  Node n;
  n.op = Op::kSum;
  n.a = a;
  Vec y(1);
  y[0] = nodes_[static_cast<size_t>(a)].value.sum();
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
  check(a);
  Node n;
  n.op = Op::kMean;
  n.a = a;
  Vec y(1);
  y[0] = nodes_[static_cast<size_t>(a)].value.mean();
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::dot(Id a, Id b) {
  check(a); check(b);
  Node n;
  n.op = Op::kDot;
  n.a = a; n.b = b;
  Vec y(1);
  y[0] = nodes_[static_cast<size_t>(a)].value.dot(nodes_[static_cast<size_t>(b)].value);
  n.value = std::move(y);
  return push(std::move(n));
}

Tape::Id Tape::softmax_(Id a) {
  check(a);
  Node n;
  n.op = Op::kSoftmax;
  n.a = a;
  n.value = softmax(nodes_[static_cast<size_t>(a)].value);
  return push(std::move(n));
}

Tape::Id Tape::logsumexp_(Id a) {
  check(a);
  Node n;
  n.op = Op::kLogSumExp;
  n.a = a;
  Vec y(1);
  y[0] = logsumexp(nodes_[static_cast<size_t>(a)].value);
  n.value = std::move(y);
  return push(std::move(n));
}

double Tape::scalar(Id id) const {
  check(id);
  const Vec& v = nodes_[static_cast<size_t>(id)].value;
  if (v.size() != 1) throw std::invalid_argument("tape: scalar() on non-scalar node");
  return v[0];
}

void Tape::backward(Id root, double seed) {
  if (nodes_.empty()) throw std::logic_error("tape: backward without a recorded forward pass");
  check(root);
  if (nodes_[static_cast<size_t>(root)].value.size() != 1)
    throw std::invalid_argument("tape: backward root must be scalar");

  for (auto& n : nodes_) n.grad = Vec::Zero(n.value.size());
  nodes_[static_cast<size_t>(root)].grad[0] = seed;

  for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.isZero(0.0)) continue;
    const Vec& g = n.grad;
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kAffine: {
        const Vec& x = nodes_[static_cast<size_t>(n.a)].value;
        Parameter& w = store_->at(n.p0);
        Parameter& b = store_->at(n.p2);
        w.grad.noalias() += g * x.transpose();
        b.grad.col(0) += g;
        nodes_[static_cast<size_t>(n.a)].grad.noalias() += w.value.transpose() * g;
        break;
      }
      case Op::kAffine2: {
        const Vec& x = nodes_[static_cast<size_t>(n.a)].value;
        const Vec& h = nodes_[static_cast<size_t>(n.b)].value;
        Parameter& wx = store_->at(n.p0);
        Parameter& wh = store_->at(n.p1);
        Parameter& b = store_->at(n.p2);
        wx.grad.noalias() += g * x.transpose();
        wh.grad.noalias() += g * h.transpose();
        b.grad.col(0) += g;
        nodes_[static_cast<size_t>(n.a)].grad.noalias() += wx.value.transpose() * g;
        nodes_[static_cast<size_t>(n.b)].grad.noalias() += wh.value.transpose() * g;
        break;
      }
      case Op::kAdd:
        nodes_[static_cast<size_t>(n.a)].grad += g;
        nodes_[static_cast<size_t>(n.b)].grad += g;
        break;
      case Op::kSub:
        nodes_[static_cast<size_t>(n.a)].grad += g;
        nodes_[static_cast<size_t>(n.b)].grad -= g;
        break;
      case Op::kMul:
        nodes_[static_cast<size_t>(n.a)].grad +=
            g.cwiseProduct(nodes_[static_cast<size_t>(n.b)].value);
        nodes_[static_cast<size_t>(n.b)].grad +=
            g.cwiseProduct(nodes_[static_cast<size_t>(n.a)].value);
        break;
      case Op::kScale:
        nodes_[static_cast<size_t>(n.a)].grad += n.c * g;
        break;
      case Op::kAddScalar:
        nodes_[static_cast<size_t>(n.a)].grad += g;
        break;
      case Op::kSigmoid: {
        const Vec& y = n.value;
        nodes_[static_cast<size_t>(n.a)].grad.array() +=
            g.array() * y.array() * (1.0 - y.array());
        break;
      }
      case Op::kTanh: {
        const Vec& y = n.value;
        nodes_[static_cast<size_t>(n.a)].grad.array() += g.array() * (1.0 - y.array().square());
        break;
      }
      case Op::kSoftplus: {
        const Vec& x = nodes_[static_cast<size_t>(n.a)].value;
        nodes_[static_cast<size_t>(n.a)].grad.array() +=
            g.array() * x.unaryExpr([](double v) { return sigmoid(v); }).array();
        break;
      }
      case Op::kExp:
        nodes_[static_cast<size_t>(n.a)].grad.array() += g.array() * n.value.array();
        break;
      case Op::kLog:
        nodes_[static_cast<size_t>(n.a)].grad.array() +=
            g.array() / nodes_[static_cast<size_t>(n.a)].value.array();
        break;
      case Op::kSquare:
        nodes_[static_cast<size_t>(n.a)].grad.array() +=
            2.0 * g.array() * nodes_[static_cast<size_t>(n.a)].value.array();
        break;
      case Op::kReciprocal:
        nodes_[static_cast<size_t>(n.a)].grad.array() -= g.array() * n.value.array().square();
        break;
      case Op::kSegment:
        nodes_[static_cast<size_t>(n.a)].grad.segment(n.i0, n.i1) += g;
        break;
      case Op::kPick:
        nodes_[static_cast<size_t>(n.a)].grad[n.i0] += g[0];
        break;
      case Op::kSum:
        nodes_[static_cast<size_t>(n.a)].grad.array() += g[0];
        break;
      case Op::kMean:
        nodes_[static_cast<size_t>(n.a)].grad.array() +=
            g[0] / static_cast<double>(nodes_[static_cast<size_t>(n.a)].value.size());
        break;
      case Op::kDot:
        nodes_[static_cast<size_t>(n.a)].grad += g[0] * nodes_[static_cast<size_t>(n.b)].value;
        nodes_[static_cast<size_t>(n.b)].grad += g[0] * nodes_[static_cast<size_t>(n.a)].value;
        break;
      case Op::kSoftmax: {
        // J^T g = p .* (g - (p . g))
        const Vec& p = n.value;
        const double pg = p.dot(g);
        nodes_[static_cast<size_t>(n.a)].grad.array() += p.array() * (g.array() - pg);
        break;
      }
      case Op::kLogSumExp: {
        const Vec p = softmax(nodes_[static_cast<size_t>(n.a)].value);
        nodes_[static_cast<size_t>(n.a)].grad += g[0] * p;
        break;
      }
    }
  }
}

AdamState::AdamState(const ParameterStore& store, double lr,
                     double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(static_cast<size_t>(store.count()));
  v_.reserve(static_cast<size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    const Mat& p = store.at(i).value;
    m_.push_back(Mat::Zero(p.rows(), p.cols()));
    v_.push_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void AdamState::step(ParameterStore& store) {
  if (static_cast<int>(m_.size()) != store.count())
    throw std::invalid_argument("adam: store shape changed since construction");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int i = 0; i < store.count(); ++i) {
    Parameter& p = store.at(i);
    Mat& m = m_[static_cast<size_t>(i)];
    Mat& v = v_[static_cast<size_t>(i)];
    m = beta1_ * m + (1.0 - beta1_) * p.grad;
    v = beta2_ * v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const Mat m_hat = m / bc1;
    const Mat v_hat = v / bc2;
    p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    p.grad.setZero();
  }
}

Vec dense_forward(const Mat& w, const Vec& x, const Mat& b) {
  if (w.cols() != x.size() || w.rows() != b.rows())
    throw std::invalid_argument("dense_forward: shape mismatch");
  Vec y = w * x;
  y += b.col(0);
  return y;
}

void LstmState::reset(const std::vector<int>& sizes) {
  h.clear();
  c.clear();
  for (int s : sizes) {
    h.push_back(Vec::Zero(s));
    c.push_back(Vec::Zero(s));
  }
}

const Vec& lstm_stack_forward(const ParameterStore& store,
                              const std::vector<LstmParams>& layers,
                              const Vec& x, LstmState& state) {
  if (layers.empty()) throw std::invalid_argument("lstm_stack_forward: empty stack");
  if (state.h.size() != layers.size())
    throw std::invalid_argument("lstm_stack_forward: state/stack size mismatch");
  const Vec* in = &x;
  for (size_t l = 0; l < layers.size(); ++l) {
    const LstmParams& lp = layers[l];
    Vec& h = state.h[l];
    Vec& c = state.c[l];
    if (!h.allFinite() || !c.allFinite())
      throw std::runtime_error("lstm_stack_forward: non-finite recurrent state");
    const int H = lp.hidden;
    Vec z = store.at(lp.wx).value * (*in);
    z.noalias() += store.at(lp.wh).value * h;
    z += store.at(lp.b).value.col(0);
    Vec i = z.segment(0, H).unaryExpr([](double v) { return sigmoid(v); });
    Vec f = z.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
    Vec g = z.segment(2 * H, H).array().tanh();
    Vec o = z.segment(3 * H, H).unaryExpr([](double v) { return sigmoid(v); });
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    h = o.cwiseProduct(c.array().tanh().matrix());
    in = &h;
  }
  return state.h.back();
}

Tape::Id lstm_stack_tape(Tape& t, const std::vector<LstmParams>& layers,
                         Tape::Id x, LstmTapeState& state) {
  if (layers.empty()) throw std::invalid_argument("lstm_stack_tape: empty stack");
  if (state.h.size() != layers.size())
    throw std::invalid_argument("lstm_stack_tape: state/stack size mismatch");
  Tape::Id in = x;
  for (size_t l = 0; l < layers.size(); ++l) {
    const LstmParams& lp = layers[l];
    const int H = lp.hidden;
    Tape::Id z = t.affine2(lp.wx, in, lp.wh, state.h[l], lp.b);
    Tape::Id i = t.sigmoid_(t.segment(z, 0, H));
    Tape::Id f = t.sigmoid_(t.segment(z, H, H));
    Tape::Id g = t.tanh_(t.segment(z, 2 * H, H));
    Tape::Id o = t.sigmoid_(t.segment(z, 3 * H, H));
    Tape::Id c = t.add(t.mul(f, state.c[l]), t.mul(i, g));
    Tape::Id h = t.mul(o, t.tanh_(c));
    state.c[l] = c;
    state.h[l] = h;
    in = h;
  }
  return state.h.back();
}

}  // namespace sparseids
