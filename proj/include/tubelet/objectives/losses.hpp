#pragma once

#include <cmath>
#include <vector>

#include "tubelet/core/tape.hpp"

namespace tubelet::objectives {

struct LossConfig {
  std::vector<double> scales{1.0, 0.5, 0.25};
  double w_mse = 0.5;
  double w_sam = 0.5;
  double sam_epsilon = 1e-8;

  void validate() const {
    if (w_mse < 0 || w_sam < 0) throw ConfigError("loss config: weights must be non-negative");
    if (scales.empty()) throw ConfigError("loss config: at least one scale required");
    for (double s : scales) {
      if (std::abs(s - 1.0) > 1e-12 && std::abs(s - 0.5) > 1e-12 && std::abs(s - 0.25) > 1e-12) {
        throw ConfigError("loss config: unsupported scale " + std::to_string(s));
      }
    }
  }
};

// Mean squared error over every element of (N,T,C,H,W).
template <typename S>
typename core::TapeT<S>::Id mse_loss(core::TapeT<S>& tape, typename core::TapeT<S>::Id pred,
                                     typename core::TapeT<S>::Id target) {
  core::require_same_shape(tape.value(pred), tape.value(target), "mse_loss");
  auto d = tape.sub(pred, target);
  return tape.mean_all(tape.mul(d, d));
}

// Mean spectral angle, radians, spectral vectors along axis 2 of
// (N,T,C,H,W). Cosine clamped to [-1,1] before arccos; epsilon sits in the
// norm-product denominator.
template <typename S>
typename core::TapeT<S>::Id sam_loss(core::TapeT<S>& tape, typename core::TapeT<S>::Id pred,
                                     typename core::TapeT<S>::Id target, double epsilon = 1e-8) {
  const auto& pv = tape.value(pred);
  core::require_same_shape(pv, tape.value(target), "sam_loss");
  if (pv.rank() != 5) {
    throw ShapeError("sam_loss: expected (N,T,C,H,W), got " + core::shape_str(pv.shape));
  }
  auto dot = tape.sum_axis(tape.mul(pred, target), 2);
  auto norm_p = tape.sqrt_ew(tape.sum_axis(tape.mul(pred, pred), 2));
  auto norm_t = tape.sqrt_ew(tape.sum_axis(tape.mul(target, target), 2));
  auto denom = tape.add_scalar(tape.mul(norm_p, norm_t), epsilon);
  auto angle = tape.acos_clamped(tape.div(dot, denom));
  return tape.mean_all(angle);
}

// Mean over pyramid scales of w_mse*MSE + w_sam*SAM, each level resizing
// both tensors spatially from full resolution.
template <typename S>
typename core::TapeT<S>::Id multiscale_loss(core::TapeT<S>& tape, typename core::TapeT<S>::Id pred,
                                            typename core::TapeT<S>::Id target,
                                            const LossConfig& cfg) {
  cfg.validate();
  using Id = typename core::TapeT<S>::Id;
  Id total = -1;
  for (double s : cfg.scales) {
    Id rp = tape.bilinear_resize(pred, s);
    Id rt = tape.bilinear_resize(target, s);
    Id term = tape.add(tape.scale(mse_loss(tape, rp, rt), cfg.w_mse),
                       tape.scale(sam_loss(tape, rp, rt, cfg.sam_epsilon), cfg.w_sam));
    total = (total < 0) ? term : tape.add(total, term);
  }
  return tape.scale(total, 1.0 / static_cast<double>(cfg.scales.size()));
}

}  // namespace tubelet::objectives
