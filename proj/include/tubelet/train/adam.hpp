#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tubelet/core/errors.hpp"
#include "tubelet/core/tensor.hpp"
#include "tubelet/model/params.hpp"

namespace tubelet::train {

// Adam first/second moments, one pair per parameter tensor in canonical
// entry order. beta1=0.9, beta2=0.999, epsilon 1e-8 added outside the
// square root in the denominator.
template <typename S>
struct OptimizerStateT {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step = 0;
  std::vector<core::TensorT<S>> m;
  std::vector<core::TensorT<S>> v;

  static OptimizerStateT init(const model::ModelParamsT<S>& params) {
    OptimizerStateT s;
    s.m.reserve(params.entries.size());
    s.v.reserve(params.entries.size());
    for (const auto& e : params.entries) {
      s.m.emplace_back(e.tensor.shape);
      s.v.emplace_back(e.tensor.shape);
    }
    return s;
  }
};

using OptimizerState = OptimizerStateT<float>;

// One bias-corrected Adam update across every parameter. Gradients are
// indexed like params.entries; a non-finite gradient aborts the step naming
// the offending parameter.
template <typename S>
void adam_step(model::ModelParamsT<S>& params, const std::vector<core::TensorT<S>>& grads,
               OptimizerStateT<S>& state, double lr) {
  if (grads.size() != params.entries.size() || state.m.size() != params.entries.size()) {
    throw ShapeError("adam_step: gradient/state list does not match parameters");
  }
  for (size_t p = 0; p < grads.size(); ++p) {
    if (!grads[p].all_finite()) {
      throw NumericalError("adam_step: non-finite gradient for parameter '" +
                           params.entries[p].name + "'");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < grads.size(); ++p) {
    auto& theta = params.entries[p].tensor.data;
    const auto& g = grads[p].data;
    auto& m = state.m[p].data;
    auto& v = state.v[p].data;
    for (size_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      theta[i] = static_cast<S>(static_cast<double>(theta[i]) -
                                lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon));
    }
  }
}

}  // namespace tubelet::train
