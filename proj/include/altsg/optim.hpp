#pragma once

#include <cmath>
#include <vector>

#include "altsg/tensor.hpp"

namespace altsg {

// ---------------------------------------------------------------------------
// Adam.
// ---------------------------------------------------------------------------

template <class Scalar>
struct AdamState {
  Tensor<Scalar> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <class Scalar>
void adam_apply(AdamState<Scalar>& state, Tensor<Scalar>& param, const Tensor<Scalar>& grad, double lr) {
  if (!param.same_shape(grad))
    throw DimensionError("adam_apply: param " + Tensor<Scalar>::shape_str(param.shape()) + " vs grad " +
                         Tensor<Scalar>::shape_str(grad.shape()));
  if (!(lr > 0)) throw ParameterError("adam_apply: lr must be positive");
  check_finite(grad, "adam_apply grad");
  if (state.m.size() == 0) {
    state.m = Tensor<Scalar>(param.shape());
    state.v = Tensor<Scalar>(param.shape());
  }
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = b1 * static_cast<double>(state.m[i]) + (1.0 - b1) * g;
    const double v = b2 * static_cast<double>(state.v[i]) + (1.0 - b2) * g * g;
    state.m[i] = static_cast<Scalar>(m);
    state.v[i] = static_cast<Scalar>(v);
    param[i] -= static_cast<Scalar>(lr * (m / c1) / (std::sqrt(v / c2) + state.eps));
  }
}

/// Adam over a fixed list of parameter tensors, moments kept in step with the
/// list order.
template <class Scalar>
struct AdamOptimizer {
  std::vector<AdamState<Scalar>> states;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void init(std::size_t n_params) {
    states.assign(n_params, AdamState<Scalar>{});
    for (auto& s : states) {
      s.beta1 = beta1;
      s.beta2 = beta2;
      s.eps = eps;
    }
  }

  void step(const std::vector<Tensor<Scalar>*>& params, const std::vector<const Tensor<Scalar>*>& grads,
            double lr) {
    if (params.size() != states.size() || grads.size() != states.size())
      throw StateError("adam step: parameter list size changed");
    for (std::size_t i = 0; i < params.size(); ++i) adam_apply(states[i], *params[i], *grads[i], lr);
  }

  void reset_moments() {
    for (auto& s : states) {
      s.m = Tensor<Scalar>{};
      s.v = Tensor<Scalar>{};
      s.t = 0;
    }
  }
};

/// Global-norm gradient clipping; no-op when max_norm <= 0.
template <class Scalar>
void clip_global_norm(const std::vector<Tensor<Scalar>*>& grads, double max_norm) {
  if (max_norm <= 0) return;
  double sq = 0;
  for (const auto* g : grads) sq += squared_norm(*g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const Scalar s = static_cast<Scalar>(max_norm / norm);
    for (auto* g : grads) scale_inplace(*g, s);
  }
}

// ---------------------------------------------------------------------------
// Cosine-annealing warm-restart schedule: run i lasts E_i = 2^i * E_base
// epochs, the learning rate decays from eta_max to eta_min within a run and
// jumps back to eta_max at each restart.
// ---------------------------------------------------------------------------

struct RestartSchedule {
  long e_base = 1;
  long run_index = 0;
  long e_cur = 0;  // epochs since the last restart
  double eta_min = 0.0;
  double eta_max = 1.0;

  long run_length() const { return e_base << run_index; }
};

inline double lr_at(const RestartSchedule& s) {
  const double frac = static_cast<double>(s.e_cur) / static_cast<double>(s.run_length());
  return s.eta_min + 0.5 * (s.eta_max - s.eta_min) * (1.0 + std::cos(frac * M_PI));
}

enum class GradientMode { Real, Synthetic };

inline const char* mode_name(GradientMode m) { return m == GradientMode::Real ? "real" : "synthetic"; }

/// Maps the run index to the gradient source for that run.
enum class AlternationPolicy { ConstantReal, ConstantSynthetic, Alternate };

inline GradientMode mode_for(AlternationPolicy p, long run_index) {
  switch (p) {
    case AlternationPolicy::ConstantReal: return GradientMode::Real;
    case AlternationPolicy::ConstantSynthetic: return GradientMode::Synthetic;
    case AlternationPolicy::Alternate:
      return (run_index % 2 == 0) ? GradientMode::Real : GradientMode::Synthetic;
  }
  return GradientMode::Real;
}

struct AdvanceResult {
  bool restarted = false;
  GradientMode mode = GradientMode::Real;
};

/// Call once per completed epoch. On reaching the end of a run the schedule
/// restarts: run index advances, E_cur resets, and the new run's gradient
/// mode is reported. The caller is responsible for resetting DNI states and
/// optimizer moments on restart.
inline AdvanceResult advance_epoch(RestartSchedule& sched, AlternationPolicy policy) {
  sched.e_cur += 1;
  AdvanceResult r;
  r.mode = mode_for(policy, sched.run_index);
  if (sched.e_cur >= sched.run_length()) {
    sched.run_index += 1;
    sched.e_cur = 0;
    r.restarted = true;
    r.mode = mode_for(policy, sched.run_index);
  }
  return r;
}

}  // namespace altsg
