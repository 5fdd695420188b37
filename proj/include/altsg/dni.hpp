#pragma once

#include <vector>

#include "altsg/cells.hpp"
#include "altsg/model.hpp"

namespace altsg {

/// Neuron-wise synthetic-gradient predictor. One shared parameter set serves
/// every neuron of a base layer: scalar boundary activations go through an
/// up-converting MLP, one step of a tiny recurrent core, and a down-converting
/// MLP back to a scalar predicted gradient. Parameter count is independent of
/// the base layer's width.
template <class Scalar>
struct DNIParams {
  MLPParams<Scalar> up;          // 1 -> d_g -> d_g
  QRNNLayerParams<Scalar> core;  // d_g -> d_g, single recurrent step per boundary
  MLPParams<Scalar> down;        // d_g -> d_g -> 1, final layer zero-initialized

  std::size_t width() const { return core.hidden(); }
};

template <class Scalar>
DNIParams<Scalar> dni_init(std::size_t d_g, RngState& rng) {
  DNIParams<Scalar> p;
  p.up = mlp_init<Scalar>({1, d_g, d_g}, rng);
  p.core = qrnn_init<Scalar>(d_g, d_g, 1, rng);
  // Zero output head: early synthetic gradients are exactly zero, so
  // training starts out indistinguishable from plain truncation.
  p.down = mlp_init<Scalar>({d_g, d_g, 1}, rng, /*zero_last=*/true);
  return p;
}

template <class Scalar>
std::vector<NamedParam<Scalar>> dni_params(DNIParams<Scalar>& p, const std::string& prefix = "dni.") {
  std::vector<NamedParam<Scalar>> out;
  for (std::size_t i = 0; i < p.up.W.size(); ++i) {
    out.push_back({prefix + "up.W" + std::to_string(i), &p.up.W[i]});
    out.push_back({prefix + "up.b" + std::to_string(i), &p.up.b[i]});
  }
  out.push_back({prefix + "core.W_z", &p.core.W_z});
  out.push_back({prefix + "core.b_z", &p.core.b_z});
  out.push_back({prefix + "core.W_f", &p.core.W_f});
  out.push_back({prefix + "core.b_f", &p.core.b_f});
  for (std::size_t i = 0; i < p.down.W.size(); ++i) {
    out.push_back({prefix + "down.W" + std::to_string(i), &p.down.W[i]});
    out.push_back({prefix + "down.b" + std::to_string(i), &p.down.b[i]});
  }
  return out;
}

/// Private recurrent state of the DNI core, one slice per base layer, one
/// lane per (neuron, batch-lane) pair.
template <class Scalar>
struct DNIStateBank {
  std::vector<Tensor<Scalar>> hg;  // per layer: (B*H) x d_g
  std::size_t H = 0, B = 0, d_g = 0;

  void init(std::size_t layer_count, std::size_t width, std::size_t batch, std::size_t core_dim) {
    H = width;
    B = batch;
    d_g = core_dim;
    hg.assign(layer_count, Tensor<Scalar>({B * H, d_g}));
  }

  void reset_all() {
    for (auto& t : hg) t = Tensor<Scalar>(t.shape());
  }
  void reset_layer(std::size_t layer) { hg.at(layer) = Tensor<Scalar>(hg.at(layer).shape()); }
  // Warm restarts wipe every private state.
  void reset_restart() { reset_all(); }
};

template <class Scalar>
struct DniTape {
  MLPTape<Scalar> up;
  WindowTape<Scalar> core;
  MLPTape<Scalar> down;
  std::size_t B = 0, H = 0;
  bool filled = false;
};

/// Predict a synthetic boundary gradient for one base layer. Each (lane,
/// neuron) pair is processed independently with the shared parameters; the
/// bank slice for the layer is advanced exactly once.
template <class Scalar>
Tensor<Scalar> dni_predict(const DNIParams<Scalar>& params, const Tensor<Scalar>& hT_layer,
                           DNIStateBank<Scalar>& bank, std::size_t layer, DniTape<Scalar>& tape) {
  if (hT_layer.rank() != 2) throw DimensionError("dni_predict expects B x H boundary states");
  const std::size_t B = hT_layer.dim(0), H = hT_layer.dim(1), N = B * H, d_g = params.width();
  if (layer >= bank.hg.size() || bank.hg[layer].size() != N * d_g)
    throw StateError("dni_predict: state bank not initialized for layer " + std::to_string(layer));
  check_finite(hT_layer, "dni_predict input");

  tape.B = B;
  tape.H = H;
  // One scalar input per (lane, neuron).
  Tensor<Scalar> x = hT_layer.reshaped({N, 1});
  Tensor<Scalar> u = mlp_forward(params.up, x, tape.up);

  Tensor<Scalar> h_seq, h_new;
  qrnn_forward(params.core, u.reshaped({std::size_t(1), N, d_g}), bank.hg[layer], tape.core, h_seq, h_new);
  bank.hg[layer] = h_new;

  Tensor<Scalar> y = mlp_forward(params.down, h_new, tape.down);
  tape.filled = true;
  return y.reshaped({B, H});
}

template <class Scalar>
struct DNIGrads {
  MLPGrads<Scalar> up;
  QrnnGrads<Scalar> core;
  MLPGrads<Scalar> down;

  std::vector<const Tensor<Scalar>*> flat() const {
    std::vector<const Tensor<Scalar>*> out;
    for (std::size_t i = 0; i < up.W.size(); ++i) {
      out.push_back(&up.W[i]);
      out.push_back(&up.b[i]);
    }
    out.push_back(&core.W_z);
    out.push_back(&core.b_z);
    out.push_back(&core.W_f);
    out.push_back(&core.b_f);
    for (std::size_t i = 0; i < down.W.size(); ++i) {
      out.push_back(&down.W[i]);
      out.push_back(&down.b[i]);
    }
    return out;
  }
};

/// Meta-gradients of L = mean((predicted - target)^2) over all lanes and
/// neurons w.r.t. the shared parameters. The target is a stopped constant;
/// the core's carried-in state and the scalar input are leaves.
template <class Scalar>
DNIGrads<Scalar> dni_meta_backward(const DNIParams<Scalar>& params, const DniTape<Scalar>& tape,
                                   const Tensor<Scalar>& target, const Tensor<Scalar>& predicted) {
  if (!tape.filled) throw StateError("dni_meta_backward: tape not filled by dni_predict");
  if (!target.same_shape(predicted) || target.dim(0) != tape.B || target.dim(1) != tape.H)
    throw StateError("dni_meta_backward: target/prediction shapes do not match the tape");
  const std::size_t N = tape.B * tape.H, d_g = params.width();

  Tensor<Scalar> d({N, std::size_t(1)});
  const Scalar scale = Scalar(2) / static_cast<Scalar>(N);
  for (std::size_t i = 0; i < N; ++i) d[i] = scale * (predicted[i] - target[i]);

  DNIGrads<Scalar> g;
  g.down = mlp_backward(params.down, tape.down, d);
  Tensor<Scalar> grad_h_new = g.down.x.reshaped({std::size_t(1), N, d_g});
  g.core = qrnn_backward(params.core, tape.core, grad_h_new, Tensor<Scalar>({N, d_g}));
  g.up = mlp_backward(params.up, tape.up, g.core.x.reshaped({N, d_g}));
  return g;
}

enum class DniResetScope { All, Layer, Restart };

template <class Scalar>
void dni_reset(DNIStateBank<Scalar>& bank, DniResetScope scope, std::size_t layer = 0) {
  switch (scope) {
    case DniResetScope::All: bank.reset_all(); break;
    case DniResetScope::Layer: bank.reset_layer(layer); break;
    case DniResetScope::Restart: bank.reset_restart(); break;
  }
}

}  // namespace altsg
