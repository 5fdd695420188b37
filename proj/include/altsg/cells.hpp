#pragma once

#include <cstdint>
#include <vector>

#include "altsg/tensor.hpp"

namespace altsg {

// ---------------------------------------------------------------------------
// QRNN layer with f-pooling: h_t = f_t * h_{t-1} + (1 - f_t) * z_t, gates
// computed feed-forward from a width-k input window. All backward passes in
// this file are hand-derived reverse mode over the taped forward.
// ---------------------------------------------------------------------------

template <class Scalar>
struct QRNNLayerParams {
  Tensor<Scalar> W_z;  // (k*d_in) x d_hidden
  Tensor<Scalar> W_f;
  Tensor<Scalar> b_z;  // d_hidden
  Tensor<Scalar> b_f;
  int window = 1;  // k, taps over time

  std::size_t hidden() const { return W_z.dim(1); }
  std::size_t input() const { return W_z.dim(0) / static_cast<std::size_t>(window); }

  void validate() const {
    if (window < 1) throw ParameterError("qrnn window must be >= 1");
    if (W_z.rank() != 2 || !W_z.same_shape(W_f) || b_z.dim(0) != hidden() || b_f.dim(0) != hidden())
      throw DimensionError("inconsistent qrnn parameter shapes");
  }
};

template <class Scalar>
QRNNLayerParams<Scalar> qrnn_init(std::size_t d_in, std::size_t d_hidden, int k, RngState& rng) {
  QRNNLayerParams<Scalar> p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in * static_cast<std::size_t>(k)));
  p.W_z = init_uniform<Scalar>({d_in * static_cast<std::size_t>(k), d_hidden}, bound, rng);
  p.b_z = Tensor<Scalar>({d_hidden});
  p.W_f = init_uniform<Scalar>({d_in * static_cast<std::size_t>(k), d_hidden}, bound, rng);
  p.b_f = Tensor<Scalar>({d_hidden});
  p.window = k;
  return p;
}

/// Cached forward state for one truncation window of a QRNN layer.
template <class Scalar>
struct WindowTape {
  std::size_t T = 0, B = 0;
  Tensor<Scalar> xc;     // T x B x (k*d_in), windowed inputs
  Tensor<Scalar> z;      // T x B x H
  Tensor<Scalar> f;      // T x B x H
  Tensor<Scalar> h;      // (T+1) x B x H, h[0] is the carried-in boundary state
  bool filled = false;
};

/// Forward one truncation window. Timesteps whose left context falls before
/// the window start see zero padding. hT returned equals h_seq[T-1].
template <class Scalar>
void qrnn_forward(const QRNNLayerParams<Scalar>& params, const Tensor<Scalar>& x, const Tensor<Scalar>& h0,
                  WindowTape<Scalar>& tape, Tensor<Scalar>& h_seq, Tensor<Scalar>& hT) {
  params.validate();
  if (tape.filled) throw StateError("qrnn_forward: tape already filled");
  if (x.rank() != 3 || x.dim(2) != params.input())
    throw DimensionError("qrnn_forward input " + Tensor<Scalar>::shape_str(x.shape()));
  const std::size_t T = x.dim(0), B = x.dim(1), d_in = x.dim(2), H = params.hidden();
  const int k = params.window;
  if (h0.rank() != 2 || h0.dim(0) != B || h0.dim(1) != H)
    throw DimensionError("qrnn_forward h0 " + Tensor<Scalar>::shape_str(h0.shape()));

  tape.T = T;
  tape.B = B;
  tape.xc = Tensor<Scalar>({T, B, static_cast<std::size_t>(k) * d_in});
  tape.z = Tensor<Scalar>({T, B, H});
  tape.f = Tensor<Scalar>({T, B, H});
  tape.h = Tensor<Scalar>({T + 1, B, H});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < H; ++j) tape.h(0, b, j) = h0(b, j);

  h_seq = Tensor<Scalar>({T, B, H});

  for (std::size_t t = 0; t < T; ++t) {
    // Window the input: taps t-k+1 .. t, zeros before the window start.
    for (int tap = 0; tap < k; ++tap) {
      const long src = static_cast<long>(t) - (k - 1) + tap;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < d_in; ++c)
          tape.xc(t, b, static_cast<std::size_t>(tap) * d_in + c) =
              (src < 0) ? Scalar(0) : x(static_cast<std::size_t>(src), b, c);
    }
    auto xc_t = as_matrix(tape.xc, T * B, static_cast<std::size_t>(k) * d_in)
                    .middleRows(static_cast<Eigen::Index>(t * B), static_cast<Eigen::Index>(B));
    MatrixX<Scalar> pre_z = xc_t * as_matrix(params.W_z);
    MatrixX<Scalar> pre_f = xc_t * as_matrix(params.W_f);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const Scalar zz = std::tanh(pre_z(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) +
                                    params.b_z[j]);
        const Scalar ff = Scalar(1) / (Scalar(1) + std::exp(-(pre_f(static_cast<Eigen::Index>(b),
                                                                    static_cast<Eigen::Index>(j)) +
                                                              params.b_f[j])));
        if (!std::isfinite(static_cast<double>(zz)) || !std::isfinite(static_cast<double>(ff)))
          throw NumericError("qrnn_forward: non-finite activation at timestep " + std::to_string(t));
        tape.z(t, b, j) = zz;
        tape.f(t, b, j) = ff;
        const Scalar hh = ff * tape.h(t, b, j) + (Scalar(1) - ff) * zz;
        tape.h(t + 1, b, j) = hh;
        h_seq(t, b, j) = hh;
      }
  }

  hT = Tensor<Scalar>({B, H});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < H; ++j) hT(b, j) = tape.h(T, b, j);
  tape.filled = true;
}

template <class Scalar>
struct QrnnGrads {
  Tensor<Scalar> W_z, W_f, b_z, b_f;
  Tensor<Scalar> h0;  // gradient flowing across the truncation boundary
  Tensor<Scalar> x;   // T x B x d_in
};

/// Reverse-mode gradients of
///   sum_t <grad_h_seq[t], h_t> + <grad_hT_boundary, h_T>
/// w.r.t. params, h0 and x. h0 is a leaf: nothing propagates into the
/// previous window beyond the returned grad_h0.
template <class Scalar>
QrnnGrads<Scalar> qrnn_backward(const QRNNLayerParams<Scalar>& params, const WindowTape<Scalar>& tape,
                                const Tensor<Scalar>& grad_h_seq, const Tensor<Scalar>& grad_hT_boundary) {
  params.validate();
  if (!tape.filled) throw StateError("qrnn_backward: tape not filled by a forward pass");
  const std::size_t T = tape.T, B = tape.B, H = params.hidden(), d_in = params.input();
  const int k = params.window;
  if (grad_h_seq.rank() != 3 || grad_h_seq.dim(0) != T || grad_h_seq.dim(1) != B || grad_h_seq.dim(2) != H)
    throw DimensionError("qrnn_backward grad_h_seq " + Tensor<Scalar>::shape_str(grad_h_seq.shape()));
  if (grad_hT_boundary.rank() != 2 || grad_hT_boundary.dim(0) != B || grad_hT_boundary.dim(1) != H)
    throw DimensionError("qrnn_backward boundary " + Tensor<Scalar>::shape_str(grad_hT_boundary.shape()));

  QrnnGrads<Scalar> g;
  g.W_z = Tensor<Scalar>(params.W_z.shape());
  g.W_f = Tensor<Scalar>(params.W_f.shape());
  g.b_z = Tensor<Scalar>(params.b_z.shape());
  g.b_f = Tensor<Scalar>(params.b_f.shape());
  g.x = Tensor<Scalar>({T, B, d_in});

  Tensor<Scalar> carry({B, H});  // dL/dh_t flowing backwards
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < H; ++j) carry(b, j) = grad_hT_boundary(b, j);

  Tensor<Scalar> g_pre_z({B, H}), g_pre_f({B, H});
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const Scalar gh = carry(b, j) + grad_h_seq(t, b, j);
        const Scalar ff = tape.f(t, b, j), zz = tape.z(t, b, j);
        const Scalar gf = gh * (tape.h(t, b, j) - zz);
        const Scalar gz = gh * (Scalar(1) - ff);
        carry(b, j) = gh * ff;
        g_pre_z(b, j) = gz * (Scalar(1) - zz * zz);
        g_pre_f(b, j) = gf * ff * (Scalar(1) - ff);
        g.b_z[j] += g_pre_z(b, j);
        g.b_f[j] += g_pre_f(b, j);
      }
    auto xc_t = as_matrix(tape.xc, T * B, static_cast<std::size_t>(k) * d_in)
                    .middleRows(static_cast<Eigen::Index>(t * B), static_cast<Eigen::Index>(B));
    as_matrix(g.W_z).noalias() += xc_t.transpose() * as_matrix(g_pre_z);
    as_matrix(g.W_f).noalias() += xc_t.transpose() * as_matrix(g_pre_f);
    MatrixX<Scalar> g_xc = as_matrix(g_pre_z) * as_matrix(params.W_z).transpose() +
                           as_matrix(g_pre_f) * as_matrix(params.W_f).transpose();
    for (int tap = 0; tap < k; ++tap) {
      const long src = static_cast<long>(t) - (k - 1) + tap;
      if (src < 0) continue;  // gradient into padding is dropped
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < d_in; ++c)
          g.x(static_cast<std::size_t>(src), b, c) +=
              g_xc(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(static_cast<std::size_t>(tap) * d_in + c));
    }
  }
  g.h0 = carry;
  return g;
}

// ---------------------------------------------------------------------------
// MLP: affine-tanh chain with a linear final layer.
// ---------------------------------------------------------------------------

template <class Scalar>
struct MLPParams {
  std::vector<Tensor<Scalar>> W;  // layer i: d_i x d_{i+1}
  std::vector<Tensor<Scalar>> b;

  std::size_t layers() const { return W.size(); }
  void validate() const {
    if (W.empty() || W.size() != b.size()) throw DimensionError("mlp: empty or mismatched layer lists");
    for (std::size_t i = 0; i < W.size(); ++i) {
      if (W[i].rank() != 2 || b[i].rank() != 1 || b[i].dim(0) != W[i].dim(1))
        throw DimensionError("mlp: bad layer " + std::to_string(i));
      if (i + 1 < W.size() && W[i].dim(1) != W[i + 1].dim(0))
        throw DimensionError("mlp: dimension chain broken at layer " + std::to_string(i));
    }
  }
};

template <class Scalar>
MLPParams<Scalar> mlp_init(const std::vector<std::size_t>& dims, RngState& rng, bool zero_last = false) {
  if (dims.size() < 2) throw ParameterError("mlp_init needs at least input and output dims");
  MLPParams<Scalar> p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = (i + 2 == dims.size());
    if (last && zero_last) {
      p.W.push_back(Tensor<Scalar>({dims[i], dims[i + 1]}));
    } else {
      p.W.push_back(init_uniform<Scalar>({dims[i], dims[i + 1]}, 1.0 / std::sqrt(double(dims[i])), rng));
    }
    p.b.push_back(Tensor<Scalar>({dims[i + 1]}));
  }
  return p;
}

template <class Scalar>
struct MLPTape {
  Tensor<Scalar> input;                    // N x d0
  std::vector<Tensor<Scalar>> activation;  // post-nonlinearity per layer (last is linear output)
  bool filled = false;
};

template <class Scalar>
Tensor<Scalar> mlp_forward(const MLPParams<Scalar>& params, const Tensor<Scalar>& x, MLPTape<Scalar>& tape) {
  params.validate();
  if (x.rank() != 2 || x.dim(1) != params.W[0].dim(0))
    throw DimensionError("mlp_forward input " + Tensor<Scalar>::shape_str(x.shape()));
  tape.input = x;
  tape.activation.clear();
  Tensor<Scalar> cur = x;
  for (std::size_t i = 0; i < params.layers(); ++i) {
    Tensor<Scalar> nxt = matmul(cur, params.W[i]);
    for (std::size_t r = 0; r < nxt.dim(0); ++r)
      for (std::size_t c = 0; c < nxt.dim(1); ++c) nxt(r, c) += params.b[i][c];
    if (i + 1 < params.layers()) nxt = tanh(nxt);
    tape.activation.push_back(nxt);
    cur = nxt;
  }
  tape.filled = true;
  return cur;
}

template <class Scalar>
struct MLPGrads {
  std::vector<Tensor<Scalar>> W, b;
  Tensor<Scalar> x;
};

template <class Scalar>
MLPGrads<Scalar> mlp_backward(const MLPParams<Scalar>& params, const MLPTape<Scalar>& tape,
                              const Tensor<Scalar>& grad_out) {
  if (!tape.filled) throw StateError("mlp_backward: tape not filled");
  const std::size_t L = params.layers();
  MLPGrads<Scalar> g;
  g.W.resize(L);
  g.b.resize(L);
  Tensor<Scalar> cur = grad_out;
  for (std::size_t i = L; i-- > 0;) {
    if (i + 1 < L) {
      // through tanh
      const Tensor<Scalar>& a = tape.activation[i];
      Tensor<Scalar> masked(cur.shape());
      for (std::size_t n = 0; n < cur.size(); ++n) masked[n] = cur[n] * (Scalar(1) - a[n] * a[n]);
      cur = masked;
    }
    const Tensor<Scalar>& in = (i == 0) ? tape.input : tape.activation[i - 1];
    g.W[i] = Tensor<Scalar>(params.W[i].shape());
    as_matrix(g.W[i]).noalias() = as_matrix(in).transpose() * as_matrix(cur);
    g.b[i] = sum(cur, 0);
    Tensor<Scalar> gin({in.dim(0), in.dim(1)});
    as_matrix(gin).noalias() = as_matrix(cur) * as_matrix(params.W[i]).transpose();
    cur = gin;
  }
  g.x = cur;
  return g;
}

// ---------------------------------------------------------------------------
// Embedding lookup.
// ---------------------------------------------------------------------------

struct TokenBatch {
  std::size_t T = 0, B = 0;
  std::vector<std::int32_t> ids;  // row-major T x B

  std::int32_t at(std::size_t t, std::size_t b) const { return ids[t * B + b]; }
};

template <class Scalar>
struct EmbeddingTape {
  TokenBatch tokens;
  bool filled = false;
};

template <class Scalar>
Tensor<Scalar> embedding_forward(const Tensor<Scalar>& table, const TokenBatch& tokens,
                                 EmbeddingTape<Scalar>& tape) {
  if (table.rank() != 2) throw DimensionError("embedding table must be rank 2");
  const std::size_t V = table.dim(0), e = table.dim(1);
  Tensor<Scalar> out({tokens.T, tokens.B, e});
  for (std::size_t t = 0; t < tokens.T; ++t)
    for (std::size_t b = 0; b < tokens.B; ++b) {
      const std::int32_t id = tokens.at(t, b);
      if (id < 0 || static_cast<std::size_t>(id) >= V)
        throw DataError("embedding: token id " + std::to_string(id) + " out of vocabulary of size " +
                        std::to_string(V));
      for (std::size_t c = 0; c < e; ++c) out(t, b, c) = table(static_cast<std::size_t>(id), c);
    }
  tape.tokens = tokens;
  tape.filled = true;
  return out;
}

template <class Scalar>
Tensor<Scalar> embedding_backward(const Tensor<Scalar>& table, const EmbeddingTape<Scalar>& tape,
                                  const Tensor<Scalar>& grad_out) {
  if (!tape.filled) throw StateError("embedding_backward: tape not filled");
  Tensor<Scalar> g(table.shape());
  const std::size_t e = table.dim(1);
  for (std::size_t t = 0; t < tape.tokens.T; ++t)
    for (std::size_t b = 0; b < tape.tokens.B; ++b) {
      const auto id = static_cast<std::size_t>(tape.tokens.at(t, b));
      for (std::size_t c = 0; c < e; ++c) g(id, c) += grad_out(t, b, c);
    }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy, mean NLL in nats over all (row) positions.
// ---------------------------------------------------------------------------

template <class Scalar>
struct SoftmaxTape {
  Tensor<Scalar> probs;  // N x V
  std::vector<std::int32_t> targets;
  bool filled = false;
};

template <class Scalar>
Scalar softmax_xent_forward(const Tensor<Scalar>& logits, const std::vector<std::int32_t>& targets,
                            SoftmaxTape<Scalar>& tape) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size())
    throw DimensionError("softmax_xent logits " + Tensor<Scalar>::shape_str(logits.shape()) + " vs " +
                         std::to_string(targets.size()) + " targets");
  const std::size_t N = logits.dim(0), V = logits.dim(1);
  tape.probs = Tensor<Scalar>({N, V});
  tape.targets = targets;
  Scalar total = 0;
  for (std::size_t n = 0; n < N; ++n) {
    if (targets[n] < 0 || static_cast<std::size_t>(targets[n]) >= V)
      throw DataError("softmax_xent: target id out of range");
    Scalar mx = logits(n, 0);
    for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, logits(n, v));
    Scalar denom = 0;
    for (std::size_t v = 0; v < V; ++v) denom += std::exp(logits(n, v) - mx);
    const Scalar log_denom = std::log(denom);
    for (std::size_t v = 0; v < V; ++v) tape.probs(n, v) = std::exp(logits(n, v) - mx - log_denom);
    total += -(logits(n, static_cast<std::size_t>(targets[n])) - mx - log_denom);
  }
  const Scalar loss = total / static_cast<Scalar>(N);
  if (!std::isfinite(static_cast<double>(loss))) throw NumericError("softmax_xent: non-finite loss");
  tape.filled = true;
  return loss;
}

template <class Scalar>
Tensor<Scalar> softmax_xent_backward(const SoftmaxTape<Scalar>& tape) {
  if (!tape.filled) throw StateError("softmax_xent_backward: tape not filled");
  const std::size_t N = tape.probs.dim(0), V = tape.probs.dim(1);
  Tensor<Scalar> g({N, V});
  const Scalar inv = Scalar(1) / static_cast<Scalar>(N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t v = 0; v < V; ++v) g(n, v) = tape.probs(n, v) * inv;
    g(n, static_cast<std::size_t>(tape.targets[n])) -= inv;
  }
  return g;
}

}  // namespace altsg
