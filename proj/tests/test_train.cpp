#include <doctest.h>

#include "altsg/oracle.hpp"
#include "altsg/train.hpp"
#include "test_support.hpp"

using namespace altsg;

namespace {

TokenBatch random_tokens(std::size_t T, std::size_t B, std::size_t V, RngState& rng) {
  TokenBatch tb;
  tb.T = T;
  tb.B = B;
  for (std::size_t i = 0; i < T * B; ++i) tb.ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
  return tb;
}

std::vector<std::int32_t> random_targets(std::size_t n, std::size_t V, RngState& rng) {
  std::vector<std::int32_t> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
  return t;
}

std::vector<DNIParams<double>> live_dnis(std::size_t layers, std::size_t d_g, RngState& rng) {
  std::vector<DNIParams<double>> out;
  for (std::size_t l = 0; l < layers; ++l) {
    DNIParams<double> p = dni_init<double>(d_g, rng);
    p.down.W.back() = init_uniform<double>(p.down.W.back().shape(), 0.5, rng);
    p.down.b.back() = init_uniform<double>(p.down.b.back().shape(), 0.5, rng);
    out.push_back(std::move(p));
  }
  return out;
}

TrainFlags no_clip() {
  TrainFlags f;
  f.clip = 0;
  return f;
}

}  // namespace

TEST_CASE("real mode first window: plain truncated BPTT, no meta gradients") {
  RngState rng(1);
  LMModel<double> m = lm_init<double>(6, 3, 4, 2, 1, rng);
  TokenBatch in = random_tokens(3, 2, 6, rng);
  auto tg = random_targets(6, 6, rng);
  std::vector<Tensor<double>> s0(2, Tensor<double>({2, 4}));

  WindowResult<double> r = run_window<double>(m, nullptr, nullptr, GradientMode::Real, in, tg, s0,
                                              PendingPrediction<double>{}, no_clip());
  CHECK(r.meta.empty());
  CHECK_FALSE(r.new_pending.active);

  // same gradients as an explicit zero-boundary backward
  ModelTape<double> tape;
  std::vector<Tensor<double>> ns;
  lm_forward(m, in, tg, s0, tape, ns);
  LMGrads<double> g = lm_backward(m, tape, std::vector<Tensor<double>>(2, Tensor<double>({2, 4})));
  auto a = r.base.flat(), b = g.flat();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->size(); ++j) CHECK((*a[i])[j] == (*b[i])[j]);
}

TEST_CASE("synthetic mode with zero head equals real mode exactly") {
  RngState rng(2);
  LMModel<double> m = lm_init<double>(6, 3, 4, 2, 1, rng);
  RngState drng(3);
  std::vector<DNIParams<double>> dni;
  for (int l = 0; l < 2; ++l) dni.push_back(dni_init<double>(3, drng));  // zero heads
  DNIStateBank<double> bank;
  bank.init(2, 4, 2, 3);

  TokenBatch in = random_tokens(4, 2, 6, rng);
  auto tg = random_targets(8, 6, rng);
  std::vector<Tensor<double>> s0(2, Tensor<double>({2, 4}));

  WindowResult<double> real = run_window<double>(m, nullptr, nullptr, GradientMode::Real, in, tg, s0,
                                                 PendingPrediction<double>{}, no_clip());
  WindowResult<double> syn = run_window<double>(m, &dni, &bank, GradientMode::Synthetic, in, tg, s0,
                                                PendingPrediction<double>{}, no_clip());
  auto a = real.base.flat(), b = syn.base.flat();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->size(); ++j) CHECK((*a[i])[j] == (*b[i])[j]);
  CHECK(syn.new_pending.active);
}

TEST_CASE("bootstrapped target equals the two-window full-BPTT oracle") {
  RngState rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t L = 1 + rng.next_u64() % 2, T = 2 + rng.next_u64() % 3;
    const std::size_t B = 1 + rng.next_u64() % 2, H = 3, V = 5, e = 3;
    const int k = 1 + static_cast<int>(rng.next_u64() % 2);
    LMModel<double> m = lm_init<double>(V, e, H, L, k, rng);
    std::vector<DNIParams<double>> dni = live_dnis(L, 3, rng);
    DNIStateBank<double> bank;
    bank.init(L, H, B, 3);

    TokenBatch w1 = random_tokens(T, B, V, rng), w2 = random_tokens(T, B, V, rng);
    auto tg1 = random_targets(T * B, V, rng), tg2 = random_targets(T * B, V, rng);
    std::vector<Tensor<double>> s0;
    for (std::size_t l = 0; l < L; ++l) s0.push_back(init_uniform<double>({B, H}, 0.5, rng));

    WindowResult<double> r1 = run_window<double>(m, &dni, &bank, GradientMode::Synthetic, w1, tg1, s0,
                                                 PendingPrediction<double>{}, no_clip());
    WindowResult<double> r2 = run_window<double>(m, &dni, &bank, GradientMode::Synthetic, w2, tg2,
                                                 r1.new_states, r1.new_pending, no_clip());
    REQUIRE(r2.meta.size() == L);

    std::vector<Tensor<double>> oracle_grad =
        oracle::two_window_oracle(m, s0, w1, w2, tg2, r2.new_pending.delta_hat);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < oracle_grad[l].size(); ++i)
        CHECK(std::abs(r2.base.h0[l][i] - oracle_grad[l][i]) <= 1e-10);
  }
}

TEST_CASE("untrained perplexity on random data is close to V") {
  const std::size_t V = 11;
  RngState rng(5);
  LMModel<double> m = lm_init<double>(V, 8, 16, 2, 1, rng);
  std::vector<std::int32_t> ids;
  for (int i = 0; i < 4000; ++i) ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
  BatchStream stream(ids, 4, 8);
  const double ppl = evaluate(m, stream);
  CHECK(ppl == doctest::Approx(double(V)).epsilon(0.05));
}

TEST_CASE("evaluate is invariant to window chunking") {
  const std::size_t V = 9;
  RngState rng(6);
  LMModel<double> m = lm_init<double>(V, 4, 8, 2, 1, rng);
  std::vector<std::int32_t> ids;
  for (int i = 0; i < 2000; ++i) ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
  BatchStream s5(ids, 4, 5), s50(ids, 4, 50);
  CHECK(std::abs(evaluate(m, s5) - evaluate(m, s50)) <= 1e-9);
}

TEST_CASE("deterministic replay: identical EpochStats") {
  const std::string text = testsup::make_fixture_corpus(4000, 7);
  Vocab v = build_vocab(text, VocabMode::Char);
  auto ids = tokenize(text, v);

  auto run_once = [&]() {
    RngState rng(42);
    LMModel<double> m = lm_init<double>(v.size(), 8, 16, 2, 1, rng);
    AdamOptimizer<double> opt;
    opt.init(lm_params(m).size());
    BatchStream stream(ids, 4, 8);
    TrainFlags flags;
    return run_epoch<double>(m, nullptr, nullptr, GradientMode::Real, stream, opt, nullptr, 2e-3, 1e-3,
                             flags);
  };
  EpochStats a = run_once(), b = run_once();
  CHECK(a.mean_loss == b.mean_loss);
  CHECK(a.windows == b.windows);
  CHECK(a.dropped_tokens == b.dropped_tokens);
}

TEST_CASE("single repeated token: perplexity converges to 1") {
  std::string text(600, 'a');
  Vocab v = build_vocab(text, VocabMode::Char);
  auto ids = tokenize(text, v);
  RngState rng(8);
  LMModel<double> m = lm_init<double>(v.size(), 4, 8, 1, 1, rng);
  AdamOptimizer<double> opt;
  opt.init(lm_params(m).size());
  TrainFlags flags;
  BatchStream stream(ids, 2, 8);
  for (int epoch = 0; epoch < 60; ++epoch)
    run_epoch<double>(m, nullptr, nullptr, GradientMode::Real, stream, opt, nullptr, 1e-2, 1e-3, flags);
  CHECK(evaluate(m, stream) < 1.05);
}

TEST_CASE("repeated-pattern corpus trains below half the vocabulary size") {
  // 10 KB structured corpus; threshold fixed from a pilot run of this exact
  // configuration.
  const std::string text = testsup::make_fixture_corpus(10000, 9);
  Vocab v = build_vocab(text, VocabMode::Char);
  auto ids = tokenize(text, v);
  RngState rng(10);
  LMModel<double> m = lm_init<double>(v.size(), 16, 32, 2, 1, rng);
  AdamOptimizer<double> opt;
  opt.init(lm_params(m).size());
  TrainFlags flags;
  BatchStream stream(ids, 8, 16);
  double ppl = 0;
  for (int epoch = 0; epoch < 30; ++epoch) {
    EpochStats s =
        run_epoch<double>(m, nullptr, nullptr, GradientMode::Real, stream, opt, nullptr, 2e-3, 1e-3, flags);
    ppl = s.perplexity;
  }
  CHECK(ppl < 0.5 * static_cast<double>(v.size()));
}

TEST_CASE("empty evaluation stream is a data error") {
  RngState rng(11);
  LMModel<double> m = lm_init<double>(5, 3, 4, 1, 1, rng);
  std::vector<std::int32_t> ids = {0, 1, 2, 3};
  BatchStream stream(ids, 2, 4);
  TokenBatch in;
  std::vector<std::int32_t> tg;
  while (stream.next_window(in, tg)) {
  }
  // stream exhausted but evaluate resets it; build a stream with one usable
  // position per lane instead and drain it via a zero-length lane: a corpus
  // of exactly B tokens leaves no target positions.
  CHECK_THROWS_AS(BatchStream(std::vector<std::int32_t>{0, 1}, 2, 4), DataError);
}
