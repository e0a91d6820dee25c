#ifndef MCNN_KERNEL_HPP_
#define MCNN_KERNEL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <type_traits>
#include <string>
#include <vector>

#include "mcnn/common.hpp"
#include "mcnn/tensor.hpp"

namespace mcnn {

enum class Act { relu, identity };

template <typename T>
inline T activate(T z, Act act) {
  return act == Act::relu ? (z > T(0) ? z : T(0)) : z;
}

// Subgradient convention: relu'(0) = 0. Works off the stored output, which is
// enough because output > 0 iff the pre-activation was > 0.
template <typename T>
inline T act_grad_from_output(T out, Act act) {
  return act == Act::relu ? (out > T(0) ? T(1) : T(0)) : T(1);
}

// ---------------------------------------------------------------------------
// Affine layer: out[o] = act(sum_i W[o,i] * x[i] + b[o]).

template <typename T>
std::vector<T> affine_forward(const std::vector<T>& input, const ParamArray<T>& weights,
                              const ParamArray<T>& bias, Act act) {
  const int out_dim = weights.rows();
  const int in_dim = weights.cols();
  if (static_cast<int>(input.size()) != in_dim ||
      static_cast<int>(bias.size()) != out_dim) {
    throw ShapeError("affine shape mismatch: weights " + std::to_string(out_dim) + "x" +
                     std::to_string(in_dim) + " vs input " + std::to_string(input.size()) +
                     ", bias " + std::to_string(bias.size()));
  }
  std::vector<T> out(out_dim);
  for (int o = 0; o < out_dim; ++o) {
    const T* w = weights.values.data() + static_cast<std::size_t>(o) * in_dim;
    T z = bias.values[o];
    for (int i = 0; i < in_dim; ++i) z += w[i] * input[i];
    out[o] = activate(z, act);
  }
  return out;
}

// Accumulates into weights.grad / bias.grad; writes d(input) when requested.
template <typename T>
void affine_backward(const std::vector<T>& d_out, const std::vector<T>& input,
                     const std::vector<T>& output, ParamArray<T>& weights,
                     ParamArray<T>& bias, Act act, std::vector<std::type_identity_t<T>>* d_input) {
  const int out_dim = weights.rows();
  const int in_dim = weights.cols();
  if (d_input != nullptr) d_input->assign(input.size(), T(0));
  for (int o = 0; o < out_dim; ++o) {
    T g = d_out[o] * act_grad_from_output(output[o], act);
    if (g == T(0)) continue;
    bias.grad[o] += g;
    const T* w = weights.values.data() + static_cast<std::size_t>(o) * in_dim;
    T* dw = weights.grad.data() + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      dw[i] += g * input[i];
      if (d_input != nullptr) (*d_input)[i] += g * w[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Sequence convolution, narrow (valid) mode, stride 1. The window segment is
// the concatenation of k_rp neighboring rows followed by the fused vector
// when present. A window whose k_rp rows are all padding is gated to exact
// zero; the fused vector is excluded from that test.

template <typename T>
FeatureMap<T> seq_conv_forward(const FeatureMap<T>& input, const ParamArray<T>& filters,
                               const ParamArray<T>& bias, int k_rp,
                               const std::vector<std::type_identity_t<T>>* fused_vector, Act act = Act::relu) {
  if (input.positions < k_rp) {
    throw ShapeError("sequence shorter than receptive field: " +
                     std::to_string(input.positions) + " < " + std::to_string(k_rp));
  }
  const int fused_dim = fused_vector != nullptr ? static_cast<int>(fused_vector->size()) : 0;
  const int seg_dim = k_rp * input.channels + fused_dim;
  const int out_channels = filters.rows();
  if (filters.cols() != seg_dim) {
    throw ShapeError("conv filter width " + std::to_string(filters.cols()) +
                     " != segment length " + std::to_string(seg_dim));
  }
  if (static_cast<int>(bias.size()) != out_channels) {
    throw ShapeError("conv bias length " + std::to_string(bias.size()) + " != filter count " +
                     std::to_string(out_channels));
  }

  const int out_positions = input.positions - k_rp + 1;
  FeatureMap<T> out(out_positions, out_channels);
  std::vector<T> segment(seg_dim);
  for (int i = 0; i < out_positions; ++i) {
    bool any_live = false;
    for (int j = 0; j < k_rp; ++j) any_live = any_live || input.live[i + j];
    if (!any_live) {
      out.live[i] = 0;  // row already zero
      continue;
    }
    T* seg = segment.data();
    for (int j = 0; j < k_rp; ++j) {
      const T* r = input.row(i + j);
      std::copy(r, r + input.channels, seg);
      seg += input.channels;
    }
    if (fused_dim > 0) std::copy(fused_vector->begin(), fused_vector->end(), seg);
    T* out_row = out.row(i);
    for (int f = 0; f < out_channels; ++f) {
      const T* w = filters.values.data() + static_cast<std::size_t>(f) * seg_dim;
      T z = bias.values[f];
      for (int s = 0; s < seg_dim; ++s) z += w[s] * segment[s];
      out_row[f] = activate(z, act);
    }
  }
  return out;
}

// d_input rows under gated output windows receive nothing, matching the
// forward gate (the forced zero is locally constant).
template <typename T>
void seq_conv_backward(const std::vector<T>& d_out, const FeatureMap<T>& input,
                       const FeatureMap<T>& output, ParamArray<T>& filters,
                       ParamArray<T>& bias, int k_rp, const std::vector<std::type_identity_t<T>>* fused_vector,
                       Act act, std::vector<std::type_identity_t<T>>* d_input,
                       std::vector<std::type_identity_t<T>>* d_fused) {
  const int fused_dim = fused_vector != nullptr ? static_cast<int>(fused_vector->size()) : 0;
  const int seg_dim = k_rp * input.channels + fused_dim;
  const int out_channels = output.channels;
  if (d_input != nullptr) d_input->assign(input.values.size(), T(0));
  if (d_fused != nullptr && static_cast<int>(d_fused->size()) != fused_dim) {
    d_fused->assign(fused_dim, T(0));
  }

  std::vector<T> segment(seg_dim);
  std::vector<T> d_segment(seg_dim);
  for (int i = 0; i < output.positions; ++i) {
    if (!output.live[i]) continue;
    T* seg = segment.data();
    for (int j = 0; j < k_rp; ++j) {
      const T* r = input.row(i + j);
      std::copy(r, r + input.channels, seg);
      seg += input.channels;
    }
    if (fused_dim > 0) std::copy(fused_vector->begin(), fused_vector->end(), seg);
    std::fill(d_segment.begin(), d_segment.end(), T(0));

    const T* out_row = output.row(i);
    const T* g_row = d_out.data() + static_cast<std::size_t>(i) * out_channels;
    for (int f = 0; f < out_channels; ++f) {
      T g = g_row[f] * act_grad_from_output(out_row[f], act);
      if (g == T(0)) continue;
      bias.grad[f] += g;
      const T* w = filters.values.data() + static_cast<std::size_t>(f) * seg_dim;
      T* dw = filters.grad.data() + static_cast<std::size_t>(f) * seg_dim;
      for (int s = 0; s < seg_dim; ++s) {
        dw[s] += g * segment[s];
        d_segment[s] += g * w[s];
      }
    }

    if (d_input != nullptr) {
      for (int j = 0; j < k_rp; ++j) {
        T* dst = d_input->data() + static_cast<std::size_t>(i + j) * input.channels;
        const T* src = d_segment.data() + static_cast<std::size_t>(j) * input.channels;
        for (int c = 0; c < input.channels; ++c) dst[c] += src[c];
      }
    }
    if (d_fused != nullptr) {
      const T* src = d_segment.data() + static_cast<std::size_t>(k_rp) * input.channels;
      for (int s = 0; s < fused_dim; ++s) (*d_fused)[s] += src[s];
    }
  }
}

// ---------------------------------------------------------------------------
// Two-unit max pooling with stride 2. An odd trailing position is dropped
// (with a warning). argmax_out records the winning input position per output
// cell for the backward pass; ties go to the first element.

template <typename T>
FeatureMap<T> maxpool2_forward(const FeatureMap<T>& input, std::vector<int>* argmax_out = nullptr,
                               Warnings* warnings = nullptr) {
  if (input.positions < 2) {
    throw ShapeError("cannot pool: " + std::to_string(input.positions) + " position(s)");
  }
  if (input.positions % 2 != 0) {
    warn(warnings, "maxpool2: odd length " + std::to_string(input.positions) +
                       ", dropping final position");
  }
  const int out_positions = input.positions / 2;
  FeatureMap<T> out(out_positions, input.channels);
  if (argmax_out != nullptr) {
    argmax_out->assign(static_cast<std::size_t>(out_positions) * input.channels, 0);
  }
  for (int i = 0; i < out_positions; ++i) {
    const T* a = input.row(2 * i);
    const T* b = input.row(2 * i + 1);
    T* o = out.row(i);
    out.live[i] = input.live[2 * i] || input.live[2 * i + 1];
    for (int c = 0; c < input.channels; ++c) {
      if (b[c] > a[c]) {
        o[c] = b[c];
        if (argmax_out != nullptr)
          (*argmax_out)[static_cast<std::size_t>(i) * input.channels + c] = 2 * i + 1;
      } else {
        o[c] = a[c];
        if (argmax_out != nullptr)
          (*argmax_out)[static_cast<std::size_t>(i) * input.channels + c] = 2 * i;
      }
    }
  }
  return out;
}

template <typename T>
void maxpool2_backward(const std::vector<T>& d_out, const std::vector<int>& argmax,
                       int in_positions, int channels, std::vector<T>* d_input) {
  d_input->assign(static_cast<std::size_t>(in_positions) * channels, T(0));
  const int out_positions = in_positions / 2;
  for (int i = 0; i < out_positions; ++i) {
    for (int c = 0; c < channels; ++c) {
      std::size_t cell = static_cast<std::size_t>(i) * channels + c;
      (*d_input)[static_cast<std::size_t>(argmax[cell]) * channels + c] += d_out[cell];
    }
  }
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/(1-p) so eval mode is the
// identity. mask_out stores the per-entry multiplier for the backward pass.

template <typename T>
std::vector<T> dropout_forward(const std::vector<T>& input, double p, RunMode mode, Rng& rng,
                               std::vector<T>* mask_out = nullptr) {
  if (p < 0.0 || p >= 1.0) {
    throw UsageError("dropout probability must satisfy 0 <= p < 1, got " + std::to_string(p));
  }
  if (mode == RunMode::eval || p == 0.0) {
    if (mask_out != nullptr) mask_out->assign(input.size(), T(1));
    return input;
  }
  const T keep_scale = T(1.0 / (1.0 - p));
  std::vector<T> out(input.size());
  if (mask_out != nullptr) mask_out->assign(input.size(), T(0));
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (rng.uniform() < p) {
      out[i] = T(0);
    } else {
      out[i] = input[i] * keep_scale;
      if (mask_out != nullptr) (*mask_out)[i] = keep_scale;
    }
  }
  return out;
}

template <typename T>
void dropout_backward(const std::vector<T>& d_out, const std::vector<T>& mask,
                      std::vector<T>* d_input) {
  d_input->resize(d_out.size());
  for (std::size_t i = 0; i < d_out.size(); ++i) (*d_input)[i] = d_out[i] * mask[i];
}

// ---------------------------------------------------------------------------
// SGD update over a ParamSet. Frozen arrays are untouched.

template <typename T>
void sgd_step(ParamSet<T>& params, double learning_rate) {
  for (auto& arr : params.arrays) {
    if (!arr->trainable) continue;
    for (std::size_t i = 0; i < arr->values.size(); ++i) {
      if (!std::isfinite(static_cast<double>(arr->grad[i]))) {
        throw NumericError("non-finite gradient in parameter " + arr->name);
      }
      arr->values[i] -= static_cast<T>(learning_rate) * arr->grad[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Central-difference gradient check. The caller has already populated
// analytic gradients (forward + backward); model_forward re-evaluates the
// scalar under the current parameter values. Arrays under 1000 entries get a
// full sweep, larger ones a 64-entry random sample.

template <typename T>
std::vector<GradCheckResult> finite_diff_check(const std::function<T()>& model_forward,
                                               ParamSet<T>& params, double epsilon,
                                               double tolerance, Rng& rng) {
  if (epsilon <= 0.0) throw UsageError("finite_diff_check: epsilon must be positive");
  std::vector<GradCheckResult> results;
  for (auto& arr : params.arrays) {
    if (!arr->trainable) continue;
    GradCheckResult res;
    res.param_name = arr->name;

    std::vector<std::size_t> entries;
    if (arr->size() < 1000) {
      entries.resize(arr->size());
      for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    } else {
      entries.reserve(64);
      for (int i = 0; i < 64; ++i) entries.push_back(rng.below(arr->size()));
    }

    double max_rel = 0.0;
    for (std::size_t idx : entries) {
      const T saved = arr->values[idx];
      arr->values[idx] = saved + static_cast<T>(epsilon);
      double f_plus = static_cast<double>(model_forward());
      arr->values[idx] = saved - static_cast<T>(epsilon);
      double f_minus = static_cast<double>(model_forward());
      arr->values[idx] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        throw NumericError("non-finite values encountered while checking " + arr->name);
      }
      double numeric = (f_plus - f_minus) / (2.0 * epsilon);
      double analytic = static_cast<double>(arr->grad[idx]);
      double rel = std::fabs(analytic - numeric) /
                   std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
    res.max_rel_error = max_rel;
    res.passed = max_rel < tolerance;
    results.push_back(res);
  }
  return results;
}

}  // namespace mcnn

#endif  // MCNN_KERNEL_HPP_
