#pragma once

#include <string>
#include <vector>

#include "altsg/cells.hpp"

namespace altsg {

/// Base language model: embedding -> stacked QRNN layers -> linear output
/// projection -> softmax cross-entropy. Embedding and projection are untied.
template <class Scalar>
struct LMModel {
  Tensor<Scalar> embed;                        // V x e
  std::vector<QRNNLayerParams<Scalar>> layers;  // layer 0: e -> H, rest H -> H
  Tensor<Scalar> W_out;                        // H x V
  Tensor<Scalar> b_out;                        // V

  std::size_t vocab() const { return embed.dim(0); }
  std::size_t embed_dim() const { return embed.dim(1); }
  std::size_t hidden() const { return layers.empty() ? 0 : layers[0].hidden(); }
  std::size_t depth() const { return layers.size(); }
};

template <class Scalar>
LMModel<Scalar> lm_init(std::size_t vocab, std::size_t embed_dim, std::size_t hidden, std::size_t depth,
                        int k, RngState& rng) {
  LMModel<Scalar> m;
  m.embed = init_uniform<Scalar>({vocab, embed_dim}, 0.1, rng);
  for (std::size_t l = 0; l < depth; ++l)
    m.layers.push_back(qrnn_init<Scalar>(l == 0 ? embed_dim : hidden, hidden, k, rng));
  // Small output projection keeps the untrained predictive distribution
  // near uniform while leaving gradients non-degenerate.
  m.W_out = init_uniform<Scalar>({hidden, vocab}, 0.1 / std::sqrt(static_cast<double>(hidden)), rng);
  m.b_out = Tensor<Scalar>({vocab});
  return m;
}

template <class Scalar>
struct NamedParam {
  std::string name;
  Tensor<Scalar>* tensor;
};

template <class Scalar>
std::vector<NamedParam<Scalar>> lm_params(LMModel<Scalar>& m) {
  std::vector<NamedParam<Scalar>> out;
  out.push_back({"embed", &m.embed});
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    out.push_back({p + "W_z", &m.layers[l].W_z});
    out.push_back({p + "b_z", &m.layers[l].b_z});
    out.push_back({p + "W_f", &m.layers[l].W_f});
    out.push_back({p + "b_f", &m.layers[l].b_f});
  }
  out.push_back({"W_out", &m.W_out});
  out.push_back({"b_out", &m.b_out});
  return out;
}

/// All caches needed to run the manual backward for one window.
template <class Scalar>
struct ModelTape {
  EmbeddingTape<Scalar> embed;
  std::vector<WindowTape<Scalar>> layers;
  Tensor<Scalar> top_h;  // (T*B) x H, projection input
  SoftmaxTape<Scalar> softmax;
  std::size_t T = 0, B = 0;
};

/// Forward one window, carrying per-layer boundary states. Returns mean
/// cross-entropy in nats over all T*B positions; new_states receives h_T per
/// layer (fresh tensors, already detached from the window's computation).
template <class Scalar>
Scalar lm_forward(const LMModel<Scalar>& m, const TokenBatch& inputs, const std::vector<std::int32_t>& targets,
                  const std::vector<Tensor<Scalar>>& states, ModelTape<Scalar>& tape,
                  std::vector<Tensor<Scalar>>& new_states) {
  if (states.size() != m.depth()) throw DimensionError("lm_forward: state count != layer count");
  const std::size_t T = inputs.T, B = inputs.B;
  tape.T = T;
  tape.B = B;
  tape.layers.assign(m.depth(), WindowTape<Scalar>{});
  new_states.assign(m.depth(), Tensor<Scalar>{});

  Tensor<Scalar> x = embedding_forward(m.embed, inputs, tape.embed);
  Tensor<Scalar> h_seq, hT;
  for (std::size_t l = 0; l < m.depth(); ++l) {
    qrnn_forward(m.layers[l], x, states[l], tape.layers[l], h_seq, hT);
    new_states[l] = hT;
    x = h_seq;
  }

  tape.top_h = x.reshaped({T * B, m.hidden()});
  Tensor<Scalar> logits = matmul(tape.top_h, m.W_out);
  for (std::size_t n = 0; n < logits.dim(0); ++n)
    for (std::size_t v = 0; v < logits.dim(1); ++v) logits(n, v) += m.b_out[v];
  return softmax_xent_forward(logits, targets, tape.softmax);
}

template <class Scalar>
struct LMGrads {
  Tensor<Scalar> embed;
  std::vector<QrnnGrads<Scalar>> layers;
  Tensor<Scalar> W_out, b_out;
  std::vector<Tensor<Scalar>> h0;  // per-layer gradient at the window's entry boundary

  std::vector<const Tensor<Scalar>*> flat() const {
    std::vector<const Tensor<Scalar>*> out;
    out.push_back(&embed);
    for (const auto& g : layers) {
      out.push_back(&g.W_z);
      out.push_back(&g.b_z);
      out.push_back(&g.W_f);
      out.push_back(&g.b_f);
    }
    out.push_back(&W_out);
    out.push_back(&b_out);
    return out;
  }
};

/// Backward one window. boundary[l] is the cotangent injected at layer l's
/// exit state h_T (zero for plain truncated BPTT, a synthetic gradient
/// otherwise).
template <class Scalar>
LMGrads<Scalar> lm_backward(const LMModel<Scalar>& m, const ModelTape<Scalar>& tape,
                            const std::vector<Tensor<Scalar>>& boundary) {
  if (boundary.size() != m.depth()) throw DimensionError("lm_backward: boundary count != layer count");
  const std::size_t T = tape.T, B = tape.B, H = m.hidden();

  LMGrads<Scalar> g;
  g.layers.resize(m.depth());
  g.h0.resize(m.depth());

  Tensor<Scalar> grad_logits = softmax_xent_backward(tape.softmax);
  g.W_out = Tensor<Scalar>(m.W_out.shape());
  as_matrix(g.W_out).noalias() = as_matrix(tape.top_h).transpose() * as_matrix(grad_logits);
  g.b_out = sum(grad_logits, 0);

  Tensor<Scalar> grad_top({T * B, H});
  as_matrix(grad_top).noalias() = as_matrix(grad_logits) * as_matrix(m.W_out).transpose();
  Tensor<Scalar> grad_h_seq = grad_top.reshaped({T, B, H});

  for (std::size_t l = m.depth(); l-- > 0;) {
    QrnnGrads<Scalar> lg = qrnn_backward(m.layers[l], tape.layers[l], grad_h_seq, boundary[l]);
    g.h0[l] = lg.h0;
    grad_h_seq = lg.x;  // feeds the layer below (or the embedding)
    g.layers[l] = std::move(lg);
  }

  g.embed = embedding_backward(m.embed, tape.embed, grad_h_seq);
  return g;
}

}  // namespace altsg
