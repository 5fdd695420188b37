#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "altsg/dni.hpp"
#include "altsg/model.hpp"
#include "altsg/oracle.hpp"

namespace altsg {

// Finite-difference certification of every hand-derived backward pass,
// 64-bit only. Each section draws `configs` random small instances and
// checks every analytic gradient coordinate against central differences.

namespace gradcheck {

constexpr double kEps = 1e-5;
constexpr double kTolRel = 1e-5;
constexpr double kTolAbs = 1e-8;

struct SectionResult {
  std::string name;
  double worst_rel = 0;
  std::size_t checked = 0;
  bool ok = true;
};

inline Tensor<double> random_tensor(typename Tensor<double>::Shape shape, RngState& rng, double bound = 1.0) {
  return init_uniform<double>(std::move(shape), bound, rng);
}

inline double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void fold(SectionResult& r, const oracle::FdReport& rep) {
  r.worst_rel = std::max(r.worst_rel, rep.worst_rel);
  r.checked += rep.checked;
  if (!rep.ok()) r.ok = false;
}

inline SectionResult check_qrnn(std::size_t configs, std::uint64_t seed) {
  SectionResult res{"qrnn"};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t T = 2 + rng.next_u64() % 3, B = 1 + rng.next_u64() % 2;
    const std::size_t d_in = 2 + rng.next_u64() % 3, H = 2 + rng.next_u64() % 3;
    const int k = 1 + static_cast<int>(rng.next_u64() % 2);
    QRNNLayerParams<double> p = qrnn_init<double>(d_in, H, k, rng);
    p.b_z = random_tensor({H}, rng, 0.5);
    p.b_f = random_tensor({H}, rng, 0.5);
    Tensor<double> x = random_tensor({T, B, d_in}, rng);
    Tensor<double> h0 = random_tensor({B, H}, rng);
    Tensor<double> r_seq = random_tensor({T, B, H}, rng);
    Tensor<double> r_T = random_tensor({B, H}, rng);

    auto f = [&]() {
      WindowTape<double> tape;
      Tensor<double> h_seq, hT;
      qrnn_forward(p, x, h0, tape, h_seq, hT);
      return inner(r_seq, h_seq) + inner(r_T, hT);
    };
    WindowTape<double> tape;
    Tensor<double> h_seq, hT;
    qrnn_forward(p, x, h0, tape, h_seq, hT);
    QrnnGrads<double> g = qrnn_backward(p, tape, r_seq, r_T);

    fold(res, oracle::fd_check(f, {&p.W_z, &p.b_z, &p.W_f, &p.b_f, &h0, &x},
                               {&g.W_z, &g.b_z, &g.W_f, &g.b_f, &g.h0, &g.x}, kEps, kTolRel, kTolAbs));
  }
  return res;
}

inline SectionResult check_embedding(std::size_t configs, std::uint64_t seed) {
  SectionResult res{"embedding"};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t V = 3 + rng.next_u64() % 4, e = 2 + rng.next_u64() % 3;
    const std::size_t T = 2 + rng.next_u64() % 3, B = 1 + rng.next_u64() % 2;
    Tensor<double> table = random_tensor({V, e}, rng);
    TokenBatch toks;
    toks.T = T;
    toks.B = B;
    for (std::size_t i = 0; i < T * B; ++i) toks.ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
    Tensor<double> r = random_tensor({T, B, e}, rng);

    auto f = [&]() {
      EmbeddingTape<double> tape;
      return inner(r, embedding_forward(table, toks, tape));
    };
    EmbeddingTape<double> tape;
    embedding_forward(table, toks, tape);
    Tensor<double> g = embedding_backward(table, tape, r);
    fold(res, oracle::fd_check(f, {&table}, {&g}, kEps, kTolRel, kTolAbs));
  }
  return res;
}

inline SectionResult check_mlp(std::size_t configs, std::uint64_t seed) {
  SectionResult res{"mlp"};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t d0 = 1 + rng.next_u64() % 3, d1 = 2 + rng.next_u64() % 3, d2 = 1 + rng.next_u64() % 3;
    const std::size_t N = 1 + rng.next_u64() % 4;
    MLPParams<double> p = mlp_init<double>({d0, d1, d2}, rng);
    Tensor<double> x = random_tensor({N, d0}, rng);
    Tensor<double> r = random_tensor({N, d2}, rng);

    auto f = [&]() {
      MLPTape<double> tape;
      return inner(r, mlp_forward(p, x, tape));
    };
    MLPTape<double> tape;
    mlp_forward(p, x, tape);
    MLPGrads<double> g = mlp_backward(p, tape, r);
    std::vector<Tensor<double>*> params{&x};
    std::vector<const Tensor<double>*> grads{&g.x};
    for (std::size_t i = 0; i < p.W.size(); ++i) {
      params.push_back(&p.W[i]);
      params.push_back(&p.b[i]);
      grads.push_back(&g.W[i]);
      grads.push_back(&g.b[i]);
    }
    fold(res, oracle::fd_check(f, params, grads, kEps, kTolRel, kTolAbs));
  }
  return res;
}

inline SectionResult check_softmax(std::size_t configs, std::uint64_t seed) {
  SectionResult res{"softmax_xent"};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t N = 1 + rng.next_u64() % 4, V = 2 + rng.next_u64() % 4;
    Tensor<double> logits = random_tensor({N, V}, rng, 2.0);
    std::vector<std::int32_t> targets;
    for (std::size_t i = 0; i < N; ++i) targets.push_back(static_cast<std::int32_t>(rng.next_u64() % V));

    auto f = [&]() {
      SoftmaxTape<double> tape;
      return static_cast<double>(softmax_xent_forward(logits, targets, tape));
    };
    SoftmaxTape<double> tape;
    softmax_xent_forward(logits, targets, tape);
    Tensor<double> g = softmax_xent_backward(tape);
    fold(res, oracle::fd_check(f, {&logits}, {&g}, kEps, kTolRel, kTolAbs));
  }
  return res;
}

/// Whole-model window loss with an injected boundary cotangent: certifies
/// the composite backward used by the training loop.
inline SectionResult check_model(std::size_t configs, std::uint64_t seed) {
  SectionResult res{"model_window"};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t V = 4 + rng.next_u64() % 3, e = 2 + rng.next_u64() % 2, H = 3 + rng.next_u64() % 2;
    const std::size_t L = 1 + rng.next_u64() % 2, T = 2 + rng.next_u64() % 2, B = 1 + rng.next_u64() % 2;
    const int k = 1 + static_cast<int>(rng.next_u64() % 2);
    LMModel<double> m = lm_init<double>(V, e, H, L, k, rng);
    TokenBatch toks;
    toks.T = T;
    toks.B = B;
    for (std::size_t i = 0; i < T * B; ++i) toks.ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
    std::vector<std::int32_t> targets;
    for (std::size_t i = 0; i < T * B; ++i) targets.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
    std::vector<Tensor<double>> states, boundary;
    for (std::size_t l = 0; l < L; ++l) {
      states.push_back(random_tensor({B, H}, rng, 0.5));
      boundary.push_back(random_tensor({B, H}, rng, 0.5));
    }

    auto f = [&]() {
      ModelTape<double> tape;
      std::vector<Tensor<double>> ns;
      double v = static_cast<double>(lm_forward(m, toks, targets, states, tape, ns));
      for (std::size_t l = 0; l < L; ++l) v += inner(boundary[l], ns[l]);
      return v;
    };
    ModelTape<double> tape;
    std::vector<Tensor<double>> ns;
    lm_forward(m, toks, targets, states, tape, ns);
    LMGrads<double> g = lm_backward(m, tape, boundary);

    std::vector<Tensor<double>*> params;
    std::vector<const Tensor<double>*> grads;
    auto named = lm_params(m);
    auto flat = g.flat();
    for (std::size_t i = 0; i < named.size(); ++i) {
      params.push_back(named[i].tensor);
      grads.push_back(flat[i]);
    }
    for (std::size_t l = 0; l < L; ++l) {
      params.push_back(&states[l]);
      grads.push_back(&g.h0[l]);
    }
    fold(res, oracle::fd_check(f, params, grads, kEps, kTolRel, kTolAbs));
  }
  return res;
}

inline SectionResult check_dni(std::size_t configs, std::uint64_t seed, bool random_target,
                               const std::string& label) {
  SectionResult res{label};
  RngState rng(seed);
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t d_g = 2 + rng.next_u64() % 3, B = 1 + rng.next_u64() % 2, H = 1 + rng.next_u64() % 3;
    DNIParams<double> p = dni_init<double>(d_g, rng);
    // A live output head so the full predict path carries gradient.
    p.down.W.back() = random_tensor(p.down.W.back().shape(), rng);
    p.down.b.back() = random_tensor(p.down.b.back().shape(), rng);

    Tensor<double> hT = random_tensor({B, H}, rng);
    DNIStateBank<double> bank0;
    bank0.init(1, H, B, d_g);
    bank0.hg[0] = random_tensor({B * H, d_g}, rng, 0.5);

    Tensor<double> target;
    if (random_target) {
      target = random_tensor({B, H}, rng);
    } else {
      DNIStateBank<double> bank = bank0;
      DniTape<double> tape;
      Tensor<double> pred = dni_predict(p, hT, bank, 0, tape);
      target = add(pred, random_tensor({B, H}, rng, 0.2));  // near the prediction, stopped constant
    }

    auto f = [&]() {
      DNIStateBank<double> bank = bank0;
      DniTape<double> tape;
      Tensor<double> pred = dni_predict(p, hT, bank, 0, tape);
      Tensor<double> diff = sub(pred, target);
      return inner(diff, diff) / static_cast<double>(B * H);
    };

    DNIStateBank<double> bank = bank0;
    DniTape<double> tape;
    Tensor<double> pred = dni_predict(p, hT, bank, 0, tape);
    DNIGrads<double> g = dni_meta_backward(p, tape, target, pred);

    std::vector<Tensor<double>*> params;
    std::vector<const Tensor<double>*> grads;
    auto named = dni_params(p);
    auto flat = g.flat();
    for (std::size_t i = 0; i < named.size(); ++i) {
      params.push_back(named[i].tensor);
      grads.push_back(flat[i]);
    }
    fold(res, oracle::fd_check(f, params, grads, kEps, kTolRel, kTolAbs));
  }
  return res;
}

inline std::vector<SectionResult> run_all(std::size_t configs, std::uint64_t seed) {
  return {
      check_embedding(configs, seed + 1), check_qrnn(configs, seed + 2),
      check_mlp(configs, seed + 3),       check_softmax(configs, seed + 4),
      check_model(configs, seed + 5),     check_dni(configs, seed + 6, true, "dni_predict"),
      check_dni(configs, seed + 7, false, "dni_meta"),
  };
}

}  // namespace gradcheck

inline bool run_gradcheck_suite(std::ostream& os, std::size_t configs = 20, std::uint64_t seed = 7) {
  bool all_ok = true;
  for (const auto& r : gradcheck::run_all(configs, seed)) {
    os << (r.ok ? "PASS" : "FAIL") << " " << r.name << ": " << r.checked
       << " coordinates, worst relative error " << r.worst_rel << "\n";
    all_ok = all_ok && r.ok;
  }
  return all_ok;
}

}  // namespace altsg
