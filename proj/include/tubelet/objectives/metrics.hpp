#pragma once

#include "tubelet/core/tensor.hpp"

namespace tubelet::objectives {

// Evaluation metrics over one sample: pred/target in (T,C,H,W), mask in
// (T,H,W). Plain functions (not differentiated); accumulation in double.

double mse_metric(const core::Tensor& pred, const core::Tensor& target);

// Mean spectral angle in radians over all (t,h,w) pixels.
double sam_metric(const core::Tensor& pred, const core::Tensor& target, double epsilon = 1e-8);

// 10*log10(1/MSE) for [0,1] data, capped at 100 dB (exact at MSE = 0).
double psnr_from_mse(double mse);

// Mean SSIM over 11x11 Gaussian windows (sigma 1.5, valid positions only),
// averaged over channels and timesteps. C1=(0.01)^2, C2=(0.03)^2 for L=1.
double ssim_metric(const core::Tensor& pred, const core::Tensor& target);

struct MetricsValues {
  double mse = 0.0;
  double sam = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double masked_mse = 0.0;
  double masked_sam = 0.0;
  double masked_psnr = 0.0;
  double masked_ssim = 0.0;
};

// Full-image metrics plus the same four restricted to mask=1 pixels
// (cloud-only diagnostics; SSIM restricted by window center). An empty mask
// reports the vacuous ideals (0 error, 100 dB, SSIM 1).
MetricsValues evaluate_all(const core::Tensor& pred, const core::Tensor& target,
                           const core::Tensor& mask);

}  // namespace tubelet::objectives
