#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "altsg/data.hpp"
#include "altsg/dni.hpp"
#include "altsg/model.hpp"
#include "altsg/optim.hpp"

namespace altsg {

/// The previous window's synthetic predictions, kept until this window's
/// backward produces their bootstrapped targets.
template <class Scalar>
struct PendingPrediction {
  bool active = false;
  std::vector<Tensor<Scalar>> delta_hat;  // per layer, B x H
  std::vector<DniTape<Scalar>> tapes;
};

template <class Scalar>
struct WindowResult {
  Scalar loss = 0;
  LMGrads<Scalar> base;
  std::vector<DNIGrads<Scalar>> meta;  // one per layer; empty when no target was available
  std::vector<Tensor<Scalar>> new_states;
  PendingPrediction<Scalar> new_pending;
};

struct TrainFlags {
  bool train_dni_during_real = true;  // keep the predictor learning while its output is not injected
  double clip = 10.0;                 // global-norm clip on base gradients, <= 0 disables
};

/// Execute one truncation window:
///   forward -> predict synthetic boundary gradient -> backward with the
///   prediction injected (Synthetic mode) or zero (Real mode) -> settle the
///   previous window's prediction against this window's boundary gradient.
/// The bootstrapped target for the pending prediction is exactly this
/// window's grad_h0: the real backprop through the window plus the newly
/// injected synthetic gradient propagated across it.
template <class Scalar>
WindowResult<Scalar> run_window(const LMModel<Scalar>& model, const std::vector<DNIParams<Scalar>>* dni,
                                DNIStateBank<Scalar>* bank, GradientMode mode, const TokenBatch& inputs,
                                const std::vector<std::int32_t>& targets,
                                const std::vector<Tensor<Scalar>>& carried_states,
                                const PendingPrediction<Scalar>& pending, const TrainFlags& flags) {
  const std::size_t L = model.depth(), B = inputs.B, H = model.hidden();
  WindowResult<Scalar> out;

  ModelTape<Scalar> tape;
  out.loss = lm_forward(model, inputs, targets, carried_states, tape, out.new_states);
  if (!std::isfinite(static_cast<double>(out.loss))) throw NumericError("run_window: non-finite loss");

  const bool dni_runs = dni != nullptr && (mode == GradientMode::Synthetic || flags.train_dni_during_real);

  std::vector<Tensor<Scalar>> boundary(L, Tensor<Scalar>({B, H}));
  if (dni_runs) {
    out.new_pending.active = true;
    out.new_pending.delta_hat.resize(L);
    out.new_pending.tapes.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      out.new_pending.delta_hat[l] =
          dni_predict((*dni)[l], out.new_states[l], *bank, l, out.new_pending.tapes[l]);
      if (mode == GradientMode::Synthetic) boundary[l] = out.new_pending.delta_hat[l];
    }
  }

  out.base = lm_backward(model, tape, boundary);
  for (const auto* g : out.base.flat()) check_finite(*g, "run_window base gradient");

  if (pending.active) {
    if (!dni_runs) throw StateError("run_window: pending prediction but the DNI is not running");
    out.meta.resize(L);
    for (std::size_t l = 0; l < L; ++l)
      out.meta[l] = dni_meta_backward((*dni)[l], pending.tapes[l], /*target=*/out.base.h0[l],
                                      /*predicted=*/pending.delta_hat[l]);
  }
  return out;
}

struct EpochStats {
  double mean_loss = 0;
  double perplexity = 0;
  std::size_t windows = 0;
  std::size_t dropped_tokens = 0;
  double wall_seconds = 0;
};

/// One pass over the stream. Base parameters step once per window, the DNI
/// steps whenever a bootstrapped target becomes available. Hidden states
/// carry across windows within the epoch (detached between windows); the
/// final window's pending prediction is discarded.
template <class Scalar>
EpochStats run_epoch(LMModel<Scalar>& model, std::vector<DNIParams<Scalar>>* dni, DNIStateBank<Scalar>* bank,
                     GradientMode mode, BatchStream& stream, AdamOptimizer<Scalar>& base_opt,
                     AdamOptimizer<Scalar>* meta_opt, double lr_base, double lr_meta,
                     const TrainFlags& flags) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t L = model.depth(), B = stream.batch(), H = model.hidden();

  // Epoch boundary: both the base model's carried states and the DNI's
  // private states start from zero.
  if (bank) bank->reset_all();
  std::vector<Tensor<Scalar>> states(L, Tensor<Scalar>({B, H}));
  PendingPrediction<Scalar> pending;

  auto named = lm_params(model);
  std::vector<Tensor<Scalar>*> base_ptrs;
  for (auto& np : named) base_ptrs.push_back(np.tensor);

  std::vector<Tensor<Scalar>*> meta_ptrs;
  if (dni) {
    for (std::size_t l = 0; l < dni->size(); ++l)
      for (auto& np : dni_params((*dni)[l])) meta_ptrs.push_back(np.tensor);
  }

  stream.reset();
  double loss_weighted = 0;
  std::size_t token_positions = 0, windows = 0;
  TokenBatch inputs;
  std::vector<std::int32_t> targets;
  while (stream.next_window(inputs, targets)) {
    WindowResult<Scalar> r =
        run_window(model, dni, bank, mode, inputs, targets, states, pending, flags);

    auto grad_list = r.base.flat();
    std::vector<Tensor<Scalar>*> mutable_grads;
    for (const auto* g : grad_list) mutable_grads.push_back(const_cast<Tensor<Scalar>*>(g));
    clip_global_norm(mutable_grads, flags.clip);
    base_opt.step(base_ptrs, grad_list, lr_base);

    if (!r.meta.empty() && meta_opt) {
      std::vector<const Tensor<Scalar>*> meta_grads;
      for (auto& mg : r.meta)
        for (const auto* g : mg.flat()) meta_grads.push_back(g);
      meta_opt->step(meta_ptrs, meta_grads, lr_meta);
    }

    states = r.new_states;
    pending = std::move(r.new_pending);
    loss_weighted += static_cast<double>(r.loss) * static_cast<double>(inputs.T * inputs.B);
    token_positions += inputs.T * inputs.B;
    windows += 1;
  }

  EpochStats s;
  s.mean_loss = token_positions ? loss_weighted / static_cast<double>(token_positions) : 0.0;
  s.perplexity = std::exp(s.mean_loss);
  s.windows = windows;
  s.dropped_tokens = stream.dropped_tokens();
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

/// Forward-only perplexity over the stream, hidden state carried across
/// windows. The result is independent of the stream's chunk length.
template <class Scalar>
double evaluate(const LMModel<Scalar>& model, BatchStream& stream) {
  const std::size_t L = model.depth(), B = stream.batch(), H = model.hidden();
  std::vector<Tensor<Scalar>> states(L, Tensor<Scalar>({B, H}));
  stream.reset();
  double total_nll = 0;
  std::size_t positions = 0;
  TokenBatch inputs;
  std::vector<std::int32_t> targets;
  bool any = false;
  while (stream.next_window(inputs, targets)) {
    any = true;
    ModelTape<Scalar> tape;
    std::vector<Tensor<Scalar>> new_states;
    const Scalar loss = lm_forward(model, inputs, targets, states, tape, new_states);
    total_nll += static_cast<double>(loss) * static_cast<double>(inputs.T * inputs.B);
    positions += inputs.T * inputs.B;
    states = new_states;
  }
  if (!any) throw DataError("evaluate: empty stream");
  return std::exp(total_nll / static_cast<double>(positions));
}

}  // namespace altsg
