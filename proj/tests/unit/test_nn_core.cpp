#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "sparseids/nn_core.hpp"

using namespace sparseids;

namespace {

// rebuilds the graph from scratch at the store's current parameter values
double eval_graph(ParameterStore& store, const std::function<Tape::Id(Tape&)>& graph) {
  Tape t(&store);
  return t.scalar(graph(t));
}

// central-difference oracle: every tape gradient must match the numeric
// derivative of the freshly re-evaluated graph
void check_gradients(ParameterStore& store, const std::function<Tape::Id(Tape&)>& graph,
                     double h = 1e-6, double tol = 1e-6) {
  Tape t(&store);
  const Tape::Id root = graph(t);
  store.zero_grads();
  t.backward(root);

  for (int pi = 0; pi < store.count(); ++pi) {
    Mat& value = store.at(pi).value;
    const Mat grad = store.at(pi).grad;
    for (int r = 0; r < value.rows(); ++r) {
      for (int c = 0; c < value.cols(); ++c) {
        const double keep = value(r, c);
        value(r, c) = keep + h;
        const double up = eval_graph(store, graph);
        value(r, c) = keep - h;
        const double down = eval_graph(store, graph);
        value(r, c) = keep;
        const double fd = (up - down) / (2.0 * h);
        const double got = grad(r, c);
        const double rel =
            std::abs(fd - got) / std::max({1.0, std::abs(fd), std::abs(got)});
        INFO("param ", store.at(pi).name, " entry (", r, ",", c, "): fd=", fd,
             " tape=", got);
        CHECK(rel <= tol);
      }
    }
  }
}

void fill(Mat& m, std::mt19937_64& rng, double scale = 0.7) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
}

// plain-double single-layer step, gate order [input, forget, cell, output]
void reference_lstm_step(const Mat& wx, const Mat& wh, const Mat& b, const Vec& x,
                         std::vector<double>& h, std::vector<double>& c) {
  const int H = static_cast<int>(h.size());
  std::vector<double> z(static_cast<size_t>(4 * H), 0.0);
  for (int r = 0; r < 4 * H; ++r) {
    double acc = b(r, 0);
    for (int k = 0; k < x.size(); ++k) acc += wx(r, k) * x[k];
    for (int k = 0; k < H; ++k) acc += wh(r, k) * h[static_cast<size_t>(k)];
    z[static_cast<size_t>(r)] = acc;
  }
  for (int j = 0; j < H; ++j) {
    const double i_g = sigmoid(z[static_cast<size_t>(j)]);
    const double f_g = sigmoid(z[static_cast<size_t>(H + j)]);
    const double g_g = std::tanh(z[static_cast<size_t>(2 * H + j)]);
    const double o_g = sigmoid(z[static_cast<size_t>(3 * H + j)]);
    c[static_cast<size_t>(j)] = f_g * c[static_cast<size_t>(j)] + i_g * g_g;
    h[static_cast<size_t>(j)] = o_g * std::tanh(c[static_cast<size_t>(j)]);
  }
}

}  // namespace

TEST_CASE("parameter store bookkeeping") {
  ParameterStore store;
  const int w = store.add("w", 3, 4);
  const int b = store.add("b", 3, 1);
  CHECK(store.count() == 2);
  CHECK(store.scalar_count() == 15);
  CHECK(store.index_of("w") == w);
  CHECK(store.index_of("b") == b);
  CHECK(store.index_of("nope") == -1);
  CHECK_THROWS_AS(store.add("w", 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(store.add("z", 0, 1), std::invalid_argument);

  store.init_uniform(5);
  const double w_bound = 1.0 / std::sqrt(4.0);  // fan_in = cols for matrices
  const double b_bound = 1.0 / std::sqrt(3.0);  // fan_in = rows for column vectors
  for (int r = 0; r < 3; ++r) {
    CHECK(std::abs(store.at(b).value(r, 0)) <= b_bound);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(store.at(w).value(r, c)) <= w_bound);
  }

  ParameterStore twin;
  twin.add("w", 3, 4);
  twin.add("b", 3, 1);
  twin.init_uniform(5);
  CHECK(twin.at(0).value == store.at(0).value);
  CHECK(twin.at(1).value == store.at(1).value);

  ParameterStore other;
  other.add("w", 3, 4);
  other.add("b", 3, 1);
  other.init_uniform(6);
  CHECK(other.at(0).value != store.at(0).value);
}

TEST_CASE("tape gradients match central differences on elementwise chains") {
  ParameterStore store;
  const int w = store.add("w", 3, 4);
  const int b = store.add("b", 3, 1);
  std::mt19937_64 rng(11);
  fill(store.at(w).value, rng);
  fill(store.at(b).value, rng);

  Vec x(4);
  x << 0.3, -0.8, 1.1, 0.05;

  SUBCASE("affine -> sigmoid/tanh -> mul -> sum") {
    check_gradients(store, [&](Tape& t) {
      const Tape::Id y = t.affine(w, t.constant(x), b);
      return t.sum(t.mul(t.sigmoid_(y), t.tanh_(y)));
    });
  }
  SUBCASE("softplus/exp/log/square/reciprocal/scale/add_scalar -> mean") {
    check_gradients(store, [&](Tape& t) {
      const Tape::Id y = t.affine(w, t.constant(x), b);
      const Tape::Id sp = t.softplus_(y);
      const Tape::Id e = t.exp_(t.scale(sp, 0.3));
      const Tape::Id lg = t.log_(t.add_scalar(e, 1.5));
      const Tape::Id sq = t.square_(lg);
      const Tape::Id rc = t.reciprocal_(t.add_scalar(sq, 2.0));
      return t.mean(rc);
    });
  }
  SUBCASE("segment/pick/add/sub/dot") {
    check_gradients(store, [&](Tape& t) {
      const Tape::Id y = t.affine(w, t.constant(x), b);
      const Tape::Id head = t.segment(y, 0, 2);
      const Tape::Id tail = t.segment(y, 1, 2);
      const Tape::Id mix = t.add(t.sub(head, tail), t.scale(head, 0.25));
      const Tape::Id d = t.dot(mix, tail);
      return t.add(d, t.square_(t.pick(y, 2)));
    });
  }
  SUBCASE("softmax and logsumexp") {
    check_gradients(store, [&](Tape& t) {
      const Tape::Id y = t.affine(w, t.constant(x), b);
      const Tape::Id p = t.softmax_(y);
      const Tape::Id ent = t.sub(t.logsumexp_(y), t.dot(p, y));
      return t.add(ent, t.pick(p, 1));
    });
  }
}

TEST_CASE("tape gradients match central differences through a recurrent unroll") {
  const int in = 3, H = 4;
  ParameterStore store;
  LstmParams lp;
  lp.wx = store.add("wx", 4 * H, in);
  lp.wh = store.add("wh", 4 * H, H);
  lp.b = store.add("b", 4 * H, 1);
  lp.in = in;
  lp.hidden = H;
  const int hw = store.add("head.w", 1, H);
  const int hb = store.add("head.b", 1, 1);
  store.init_uniform(3);

  std::mt19937_64 rng(21);
  std::vector<Vec> xs;
  for (int s = 0; s < 3; ++s) {
    Mat m(in, 1);
    fill(m, rng, 1.0);
    xs.push_back(m.col(0));
  }

  // scalar loss over a 3-step unroll so every gate path is exercised
  check_gradients(store, [&](Tape& t) {
    LstmTapeState st;
    st.h.push_back(t.constant(Vec::Zero(H)));
    st.c.push_back(t.constant(Vec::Zero(H)));
    Tape::Id loss = t.constant(0.0);
    for (const Vec& x : xs) {
      const Tape::Id top = lstm_stack_tape(t, {lp}, t.constant(x), st);
      const Tape::Id out = t.affine(hw, top, hb);
      loss = t.add(loss, t.square_(t.pick(out, 0)));
    }
    return loss;
  }, 1e-5, 1e-6);
}

TEST_CASE("lstm stack matches a plain-double reference implementation") {
  const int in = 3, h1 = 4, h2 = 2;
  ParameterStore store;
  std::vector<LstmParams> layers(2);
  layers[0] = {store.add("l0.wx", 4 * h1, in), store.add("l0.wh", 4 * h1, h1),
               store.add("l0.b", 4 * h1, 1), in, h1};
  layers[1] = {store.add("l1.wx", 4 * h2, h1), store.add("l1.wh", 4 * h2, h2),
               store.add("l1.b", 4 * h2, 1), h1, h2};
  store.init_uniform(9);

  LstmState state;
  state.reset({h1, h2});
  std::vector<double> rh1(static_cast<size_t>(h1), 0.0), rc1(static_cast<size_t>(h1), 0.0);
  std::vector<double> rh2(static_cast<size_t>(h2), 0.0), rc2(static_cast<size_t>(h2), 0.0);

  std::mt19937_64 rng(33);
  for (int step = 0; step < 4; ++step) {
    Mat xm(in, 1);
    fill(xm, rng, 1.2);
    const Vec x = xm.col(0);

    const Vec& top = lstm_stack_forward(store, layers, x, state);

    reference_lstm_step(store.at(layers[0].wx).value, store.at(layers[0].wh).value,
                        store.at(layers[0].b).value, x, rh1, rc1);
    Vec mid(h1);
    for (int j = 0; j < h1; ++j) mid[j] = rh1[static_cast<size_t>(j)];
    reference_lstm_step(store.at(layers[1].wx).value, store.at(layers[1].wh).value,
                        store.at(layers[1].b).value, mid, rh2, rc2);

    REQUIRE(top.size() == h2);
    for (int j = 0; j < h2; ++j)
      CHECK(top[j] == doctest::Approx(rh2[static_cast<size_t>(j)]).epsilon(1e-12));
    for (int j = 0; j < h1; ++j)
      CHECK(state.c[0][j] == doctest::Approx(rc1[static_cast<size_t>(j)]).epsilon(1e-12));
  }
}

TEST_CASE("tape replay reproduces the forward-only lstm values bitwise") {
  const int in = 5, H = 6;
  ParameterStore store;
  std::vector<LstmParams> layers(1);
  layers[0] = {store.add("wx", 4 * H, in), store.add("wh", 4 * H, H),
               store.add("b", 4 * H, 1), in, H};
  store.init_uniform(17);

  LstmState fwd;
  fwd.reset({H});
  Tape t(&store);
  LstmTapeState tape_state;
  tape_state.h.push_back(t.constant(Vec::Zero(H)));
  tape_state.c.push_back(t.constant(Vec::Zero(H)));

  std::mt19937_64 rng(4);
  for (int step = 0; step < 5; ++step) {
    Mat xm(in, 1);
    fill(xm, rng, 1.0);
    const Vec x = xm.col(0);
    const Vec top = lstm_stack_forward(store, layers, x, fwd);
    const Tape::Id id = lstm_stack_tape(t, layers, t.constant(x), tape_state);
    const Vec& replay = t.value(id);
    REQUIRE(replay.size() == top.size());
    for (int j = 0; j < H; ++j) CHECK(replay[j] == top[j]);
  }
}

TEST_CASE("dense forward matches a hand loop and validates shapes") {
  ParameterStore store;
  const int w = store.add("w", 2, 3);
  const int b = store.add("b", 2, 1);
  store.at(w).value << 1.0, -2.0, 0.5, 0.0, 3.0, -1.0;
  store.at(b).value << 0.25, -0.75;

  Vec x(3);
  x << 2.0, 1.0, -4.0;
  const Vec y = dense_forward(store.at(w).value, x, store.at(b).value);
  CHECK(y[0] == doctest::Approx(2.0 - 2.0 - 2.0 + 0.25));
  CHECK(y[1] == doctest::Approx(3.0 + 4.0 - 0.75));

  Vec wrong(2);
  CHECK_THROWS_AS(dense_forward(store.at(w).value, wrong, store.at(b).value),
                  std::invalid_argument);
}

TEST_CASE("backward accumulates into parameter gradients across calls") {
  ParameterStore store;
  const int w = store.add("w", 2, 2);
  const int b = store.add("b", 2, 1);
  store.init_uniform(8);

  Vec x(2);
  x << 0.4, -1.3;
  auto graph = [&](Tape& t) { return t.sum(t.tanh_(t.affine(w, t.constant(x), b))); };

  Tape t1(&store);
  const Tape::Id r1 = graph(t1);
  store.zero_grads();
  t1.backward(r1);
  const Mat once = store.at(w).grad;

  t1.backward(r1);  // same tape again, without clearing
  CHECK(store.at(w).grad == (once + once).eval());

  // the seed scales linearly
  store.zero_grads();
  t1.backward(r1, 0.25);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(store.at(w).grad(r, c) == doctest::Approx(0.25 * once(r, c)).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar roots and empty tapes") {
  ParameterStore store;
  const int w = store.add("w", 2, 2);
  store.init_uniform(1);
  Tape t(&store);
  CHECK_THROWS_AS(t.backward(0), std::logic_error);
  Vec x(2);
  x << 1.0, 2.0;
  const Tape::Id vec_node = t.constant(x);
  CHECK_THROWS_AS(t.backward(vec_node), std::invalid_argument);
  CHECK_THROWS_AS(t.scalar(vec_node), std::invalid_argument);
}

TEST_CASE("adam first step moves each weight by about lr in the gradient direction") {
  ParameterStore store;
  const int p = store.add("p", 2, 1);
  store.at(p).value << 1.0, -1.0;

  const double lr = 0.01;
  AdamState adam(store, lr);

  // bias-corrected first step: m_hat = g, v_hat = g^2, delta = -lr g / (|g| + eps)
  store.at(p).grad << 3.0, -2.0;
  adam.step(store);
  CHECK(adam.steps_taken() == 1);
  CHECK(store.at(p).value(0, 0) == doctest::Approx(1.0 - lr).epsilon(1e-6));
  CHECK(store.at(p).value(1, 0) == doctest::Approx(-1.0 + lr).epsilon(1e-6));
  // step() consumed the gradients
  CHECK(store.at(p).grad.isZero(0.0));

  // a zero-gradient step still coasts on first-moment momentum
  adam.step(store);
  CHECK(adam.steps_taken() == 2);
  const double m_hat = 0.9 * (0.1 * 3.0) / (1.0 - 0.9 * 0.9);
  const double v_hat = 0.999 * (0.001 * 9.0) / (1.0 - 0.999 * 0.999);
  const double coast = lr * m_hat / (std::sqrt(v_hat) + 1e-8);
  CHECK(store.at(p).value(0, 0) == doctest::Approx(1.0 - lr - coast).epsilon(1e-9));
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  ParameterStore store;
  const int p = store.add("p", 1, 1);
  store.at(p).value << 4.0;
  AdamState adam(store, 0.1);

  for (int i = 0; i < 400; ++i) {
    const double v = store.at(p).value(0, 0);
    store.at(p).grad << 2.0 * (v - 1.5);
    adam.step(store);
  }
  CHECK(store.at(p).value(0, 0) == doctest::Approx(1.5).epsilon(1e-3));
}

TEST_CASE("softmax and logsumexp stay finite under large offsets") {
  Vec z(3);
  z << 1000.0, 1000.5, 999.0;
  const Vec p = softmax(z);
  CHECK(p.allFinite());
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[1] > p[0]);
  CHECK(p[0] > p[2]);

  // naive evaluation is safe at small magnitudes and fixes the expected value
  Vec s(4);
  s << 0.1, -0.4, 0.9, 0.0;
  const double naive = std::log(std::exp(0.1) + std::exp(-0.4) + std::exp(0.9) + 1.0);
  CHECK(logsumexp(s) == doctest::Approx(naive).epsilon(1e-14));

  Vec one(1);
  one << -3.7;
  CHECK(logsumexp(one) == doctest::Approx(-3.7).epsilon(1e-15));
}
