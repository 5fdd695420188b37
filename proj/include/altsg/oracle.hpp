#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "altsg/model.hpp"

namespace altsg {
namespace oracle {

// Test-support implementations. Everything here is deliberately naive scalar
// code, independent of the hand-derived backward passes it certifies; only
// tensor storage/accessors are shared with the rest of the library.

struct FdFailure {
  std::size_t param_index = 0;
  std::size_t coordinate = 0;
  double analytic = 0, numeric = 0, rel = 0, abs = 0;
};

struct FdReport {
  double worst_rel = 0;
  double worst_abs = 0;
  std::size_t checked = 0;
  std::vector<FdFailure> failures;

  bool ok() const { return failures.empty(); }
};

/// Central finite differences of a scalar-valued function of the given
/// parameter tensors, compared coordinate by coordinate against the supplied
/// analytic gradients. 64-bit only.
inline FdReport fd_check(const std::function<double()>& f, const std::vector<Tensor<double>*>& params,
                         const std::vector<const Tensor<double>*>& analytic, double eps = 1e-5,
                         double tol_rel = 1e-5, double tol_abs = 1e-8) {
  if (params.size() != analytic.size()) throw ParameterError("fd_check: list size mismatch");
  FdReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& t = *params[p];
    const Tensor<double>& g = *analytic[p];
    if (!t.same_shape(g)) throw DimensionError("fd_check: gradient shape mismatch at param " + std::to_string(p));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double fp = f();
      t[i] = saved - eps;
      const double fm = f();
      t[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("fd_check: non-finite function value");
      const double fd = (fp - fm) / (2.0 * eps);
      const double an = g[i];
      const double abs_err = std::fabs(fd - an);
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-12});
      const double rel_err = abs_err / denom;
      report.checked += 1;
      report.worst_abs = std::max(report.worst_abs, abs_err);
      if (abs_err > tol_abs) report.worst_rel = std::max(report.worst_rel, rel_err);
      if (abs_err > tol_abs && rel_err > tol_rel)
        report.failures.push_back({p, i, an, fd, rel_err, abs_err});
    }
  }
  return report;
}

namespace detail {

inline double dot_row(const Tensor<double>& W, const std::vector<double>& x, std::size_t col) {
  double s = 0;
  for (std::size_t r = 0; r < x.size(); ++r) s += x[r] * W(r, col);
  return s;
}

}  // namespace detail

/// Ground-truth bootstrapped target: a single scalar-loop backward over the
/// two-window span. Forward replays both windows exactly as the training
/// loop sees them (left-context padding at each window start); backward
/// differentiates
///   mean-CE over window 2  +  sum_l <injected_tail[l], h_end[l]>
/// with respect to each layer's hidden state at the first boundary.
inline std::vector<Tensor<double>> two_window_oracle(const LMModel<double>& model,
                                                     const std::vector<Tensor<double>>& states0,
                                                     const TokenBatch& win1, const TokenBatch& win2,
                                                     const std::vector<std::int32_t>& targets2,
                                                     const std::vector<Tensor<double>>& injected_tail) {
  const std::size_t L = model.depth(), B = win1.B, H = model.hidden(), V = model.vocab();
  if (states0.size() != L || injected_tail.size() != L) throw StateError("two_window_oracle: snapshot mismatch");
  const std::size_t T1 = win1.T, T2 = win2.T, S = T1 + T2;

  // h[l][s][b] is a vector of length H; s = 0..S-1 global step index.
  auto grid = [&](std::size_t d) {
    return std::vector<std::vector<std::vector<double>>>(
        L, std::vector<std::vector<double>>(S * B, std::vector<double>(d, 0.0)));
  };
  auto h = grid(H), z = grid(H), f = grid(H);
  auto cell = [B](std::size_t s, std::size_t b) { return s * B + b; };

  auto token_at = [&](std::size_t s, std::size_t b) {
    return s < T1 ? win1.at(s, b) : win2.at(s - T1, b);
  };

  // forward
  for (std::size_t s = 0; s < S; ++s) {
    const bool window_start = (s == 0 || s == T1);
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t d_in = model.layers[l].input();
      const int k = model.layers[l].window;
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> xc(static_cast<std::size_t>(k) * d_in, 0.0);
        for (int tap = 0; tap < k; ++tap) {
          const long src = static_cast<long>(s) - (k - 1) + tap;
          // Padding zone: anything before the current window's start.
          const long start = (s < T1) ? 0 : static_cast<long>(T1);
          if (src < start) continue;
          const auto su = static_cast<std::size_t>(src);
          for (std::size_t c = 0; c < d_in; ++c) {
            double val;
            if (l == 0) {
              val = model.embed(static_cast<std::size_t>(token_at(su, b)), c);
            } else {
              val = h[l - 1][cell(su, b)][c];
            }
            xc[static_cast<std::size_t>(tap) * d_in + c] = val;
          }
        }
        (void)window_start;
        for (std::size_t j = 0; j < H; ++j) {
          const double pre_z = detail::dot_row(model.layers[l].W_z, xc, j) + model.layers[l].b_z[j];
          const double pre_f = detail::dot_row(model.layers[l].W_f, xc, j) + model.layers[l].b_f[j];
          const double zz = std::tanh(pre_z);
          const double ff = 1.0 / (1.0 + std::exp(-pre_f));
          const double h_prev = (s == 0) ? states0[l](b, j) : h[l][cell(s - 1, b)][j];
          z[l][cell(s, b)][j] = zz;
          f[l][cell(s, b)][j] = ff;
          h[l][cell(s, b)][j] = ff * h_prev + (1.0 - ff) * zz;
        }
      }
    }
  }

  // softmax gradients over window 2 losses (mean over T2*B positions)
  const double inv_n = 1.0 / static_cast<double>(T2 * B);
  auto grad_h = grid(H);  // cotangents on hidden states, window-2 steps only
  for (std::size_t s = T1; s < S; ++s)
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<double> logits(V, 0.0);
      for (std::size_t v = 0; v < V; ++v)
        logits[v] = detail::dot_row(model.W_out, h[L - 1][cell(s, b)], v) + model.b_out[v];
      double mx = logits[0];
      for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, logits[v]);
      double denom = 0;
      for (std::size_t v = 0; v < V; ++v) denom += std::exp(logits[v] - mx);
      const auto tgt = static_cast<std::size_t>(targets2[(s - T1) * B + b]);
      for (std::size_t v = 0; v < V; ++v) {
        double gl = std::exp(logits[v] - mx) / denom;
        if (v == tgt) gl -= 1.0;
        gl *= inv_n;
        for (std::size_t j = 0; j < H; ++j) grad_h[L - 1][cell(s, b)][j] += gl * model.W_out(j, v);
      }
    }

  // injected tail at the very last hidden state of each layer
  std::vector<Tensor<double>> result;
  result.reserve(L);
  std::vector<std::vector<std::vector<double>>> boundary_grad(
      L, std::vector<std::vector<double>>(B, std::vector<double>(H, 0.0)));

  for (std::size_t l = L; l-- > 0;) {
    const std::size_t d_in = model.layers[l].input();
    const int k = model.layers[l].window;
    std::vector<std::vector<double>> carry(B, std::vector<double>(H, 0.0));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) carry[b][j] = injected_tail[l](b, j);

    for (std::size_t s = S; s-- > T1;) {
      for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> g_xc(static_cast<std::size_t>(k) * d_in, 0.0);
        for (std::size_t j = 0; j < H; ++j) {
          const double gh = carry[b][j] + grad_h[l][cell(s, b)][j];
          const double ff = f[l][cell(s, b)][j], zz = z[l][cell(s, b)][j];
          const double h_prev = (s == 0) ? states0[l](b, j) : h[l][cell(s - 1, b)][j];
          const double gf = gh * (h_prev - zz);
          const double gz = gh * (1.0 - ff);
          carry[b][j] = gh * ff;
          const double g_pre_z = gz * (1.0 - zz * zz);
          const double g_pre_f = gf * ff * (1.0 - ff);
          for (std::size_t r = 0; r < g_xc.size(); ++r)
            g_xc[r] += g_pre_z * model.layers[l].W_z(r, j) + g_pre_f * model.layers[l].W_f(r, j);
        }
        if (l > 0) {
          for (int tap = 0; tap < k; ++tap) {
            const long src = static_cast<long>(s) - (k - 1) + tap;
            if (src < static_cast<long>(T1)) continue;  // padded or window-1 input, dropped
            for (std::size_t c = 0; c < d_in; ++c)
              grad_h[l - 1][cell(static_cast<std::size_t>(src), b)][c] +=
                  g_xc[static_cast<std::size_t>(tap) * d_in + c];
          }
        }
      }
    }
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) boundary_grad[l][b][j] = carry[b][j];
  }

  for (std::size_t l = 0; l < L; ++l) {
    Tensor<double> t({B, H});
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) t(b, j) = boundary_grad[l][b][j];
    result.push_back(std::move(t));
  }
  return result;
}

}  // namespace oracle
}  // namespace altsg
