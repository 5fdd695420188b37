#include <doctest.h>

#include "altsg/gradcheck_suite.hpp"
#include "altsg/model.hpp"

using namespace altsg;

namespace {

QRNNLayerParams<double> tiny_qrnn(std::size_t d_in, std::size_t H, int k, std::uint64_t seed) {
  RngState rng(seed);
  return qrnn_init<double>(d_in, H, k, rng);
}

}  // namespace

TEST_CASE("qrnn f==1 is a pure carry") {
  QRNNLayerParams<double> p = tiny_qrnn(3, 4, 1, 1);
  for (std::size_t i = 0; i < p.W_f.size(); ++i) p.W_f[i] = 0;
  for (std::size_t i = 0; i < p.b_f.size(); ++i) p.b_f[i] = 50.0;  // sigmoid -> 1

  RngState rng(2);
  Tensor<double> x = init_uniform<double>({5, 2, 3}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({2, 4}, 1.0, rng);
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t j = 0; j < 4; ++j) CHECK(h_seq(t, b, j) == doctest::Approx(h0(b, j)).epsilon(1e-12));
}

TEST_CASE("qrnn f==0 is a feed-forward tanh layer") {
  QRNNLayerParams<double> p = tiny_qrnn(3, 4, 1, 3);
  for (std::size_t i = 0; i < p.W_f.size(); ++i) p.W_f[i] = 0;
  for (std::size_t i = 0; i < p.b_f.size(); ++i) p.b_f[i] = -50.0;

  RngState rng(4);
  Tensor<double> x = init_uniform<double>({3, 2, 3}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({2, 4}, 1.0, rng);
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t j = 0; j < 4; ++j) CHECK(h_seq(t, b, j) == doctest::Approx(tape.z(t, b, j)).epsilon(1e-14));
}

TEST_CASE("qrnn forward matches a step-by-step scalar recomputation") {
  const std::size_t T = 3, B = 2, d = 4, H = 4;
  QRNNLayerParams<double> p = tiny_qrnn(d, H, 1, 7);
  RngState rng(8);
  Tensor<double> x = init_uniform<double>({T, B, d}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({B, H}, 1.0, rng);
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);

  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < H; ++j) {
      double h = h0(b, j);
      for (std::size_t t = 0; t < T; ++t) {
        double pz = p.b_z[j], pf = p.b_f[j];
        for (std::size_t c = 0; c < d; ++c) {
          pz += x(t, b, c) * p.W_z(c, j);
          pf += x(t, b, c) * p.W_f(c, j);
        }
        const double z = std::tanh(pz);
        const double f = 1.0 / (1.0 + std::exp(-pf));
        h = f * h + (1.0 - f) * z;
        CHECK(h_seq(t, b, j) == doctest::Approx(h).epsilon(1e-13));
      }
      CHECK(hT(b, j) == doctest::Approx(h).epsilon(1e-13));
    }
}

TEST_CASE("qrnn backward: zero cotangents give zero gradients") {
  QRNNLayerParams<double> p = tiny_qrnn(2, 3, 1, 9);
  RngState rng(10);
  Tensor<double> x = init_uniform<double>({3, 2, 2}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({2, 3}, 1.0, rng);
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);
  QrnnGrads<double> g = qrnn_backward(p, tape, Tensor<double>({3, 2, 3}), Tensor<double>({2, 3}));
  for (std::size_t i = 0; i < g.W_z.size(); ++i) CHECK(g.W_z[i] == 0);
  for (std::size_t i = 0; i < g.h0.size(); ++i) CHECK(g.h0[i] == 0);
  for (std::size_t i = 0; i < g.x.size(); ++i) CHECK(g.x[i] == 0);
}

TEST_CASE("qrnn backward identity recurrence: grad_h0 sums all cotangents") {
  const std::size_t T = 4, B = 2, H = 3;
  QRNNLayerParams<double> p = tiny_qrnn(2, H, 1, 12);
  for (std::size_t i = 0; i < p.W_f.size(); ++i) p.W_f[i] = 0;
  for (std::size_t i = 0; i < p.b_f.size(); ++i) p.b_f[i] = 60.0;  // f == 1 to machine precision

  RngState rng(13);
  Tensor<double> x = init_uniform<double>({T, B, 2}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({B, H}, 1.0, rng);
  Tensor<double> g_seq = init_uniform<double>({T, B, H}, 1.0, rng);
  Tensor<double> g_T = init_uniform<double>({B, H}, 1.0, rng);

  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);
  QrnnGrads<double> g = qrnn_backward(p, tape, g_seq, g_T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < H; ++j) {
      double expect = g_T(b, j);
      for (std::size_t t = 0; t < T; ++t) expect += g_seq(t, b, j);
      CHECK(g.h0(b, j) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("qrnn backward leaves parameters bit-identical") {
  QRNNLayerParams<double> p = tiny_qrnn(2, 3, 2, 15);
  QRNNLayerParams<double> copy = p;
  RngState rng(16);
  Tensor<double> x = init_uniform<double>({3, 1, 2}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({1, 3}, 1.0, rng);
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  qrnn_forward(p, x, h0, tape, h_seq, hT);
  qrnn_backward(p, tape, init_uniform<double>({3, 1, 3}, 1.0, rng), Tensor<double>({1, 3}));
  for (std::size_t i = 0; i < p.W_z.size(); ++i) CHECK(p.W_z[i] == copy.W_z[i]);
  for (std::size_t i = 0; i < p.W_f.size(); ++i) CHECK(p.W_f[i] == copy.W_f[i]);
}

TEST_CASE("chaining two windows equals one long forward (k=1)") {
  const std::size_t T = 4, B = 2, d = 3, H = 5;
  QRNNLayerParams<double> p = tiny_qrnn(d, H, 1, 21);
  RngState rng(22);
  Tensor<double> x = init_uniform<double>({2 * T, B, d}, 1.0, rng);
  Tensor<double> h0 = init_uniform<double>({B, H}, 1.0, rng);

  WindowTape<double> tape_full;
  Tensor<double> h_full, hT_full;
  qrnn_forward(p, x, h0, tape_full, h_full, hT_full);

  Tensor<double> x1({T, B, d}), x2({T, B, d});
  for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = x[i];
  for (std::size_t i = 0; i < x2.size(); ++i) x2[i] = x[x1.size() + i];
  WindowTape<double> t1, t2;
  Tensor<double> h1, hT1, h2, hT2;
  qrnn_forward(p, x1, h0, t1, h1, hT1);
  qrnn_forward(p, x2, hT1, t2, h2, hT2);

  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        CHECK(h1(t, b, j) == doctest::Approx(h_full(t, b, j)).epsilon(1e-12));
        CHECK(h2(t, b, j) == doctest::Approx(h_full(T + t, b, j)).epsilon(1e-12));
      }
}

TEST_CASE("softmax over V classes with uniform logits gives ln V") {
  const std::size_t N = 4, V = 7;
  Tensor<double> logits({N, V}, std::vector<double>(N * V, 0.3));
  std::vector<std::int32_t> targets = {0, 3, 6, 2};
  SoftmaxTape<double> tape;
  CHECK(softmax_xent_forward(logits, targets, tape) == doctest::Approx(std::log(double(V))).epsilon(1e-14));
}

TEST_CASE("zero mlp with linear output: zero output, unit bias gradient") {
  MLPParams<double> p;
  p.W = {Tensor<double>({3, 1})};
  p.b = {Tensor<double>({1})};
  Tensor<double> x({1, 3}, {1, 2, 3});
  MLPTape<double> tape;
  Tensor<double> y = mlp_forward(p, x, tape);
  CHECK(y[0] == 0);
  Tensor<double> gout({1, 1}, {1.0});
  MLPGrads<double> g = mlp_backward(p, tape, gout);
  CHECK(g.b[0][0] == 1.0);
}

TEST_CASE("embedding rejects out-of-vocabulary ids") {
  RngState rng(31);
  Tensor<double> table = init_uniform<double>({4, 2}, 1.0, rng);
  TokenBatch toks;
  toks.T = 1;
  toks.B = 1;
  toks.ids = {7};
  EmbeddingTape<double> tape;
  CHECK_THROWS_AS(embedding_forward(table, toks, tape), DataError);
}

TEST_CASE("finite differences certify each backward (smoke subset)") {
  // The acceptance suite runs the full 20-config sweep; here a fast pass.
  for (const auto& r : gradcheck::run_all(3, 1234)) {
    INFO(r.name);
    CHECK(r.ok);
    CHECK(r.worst_rel <= 1e-5);
  }
}

TEST_CASE("non-finite activations carry the timestep index") {
  QRNNLayerParams<double> p = tiny_qrnn(2, 1, 1, 40);
  p.W_z[0] = 1e308;
  p.W_z[1] = 1e308;
  // inf + (-inf) in the pre-activation produces NaN, which must be surfaced.
  Tensor<double> x({1, 1, 2}, {1e308, -1e308});
  Tensor<double> h0({1, 1});
  WindowTape<double> tape;
  Tensor<double> h_seq, hT;
  CHECK_THROWS_AS(qrnn_forward(p, x, h0, tape, h_seq, hT), NumericError);
}
