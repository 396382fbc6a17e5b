#pragma once

#include <cstdint>

#include "tubelet/core/tensor.hpp"

namespace tubelet::datasim {

// Binary occlusion stack, 1 = occluded. Generated as a union of thresholded
// anisotropic Gaussian bumps, which gives contiguous blobs whose footprint
// scales with cloud_size.
struct CloudMask {
  core::Tensor mask;  // (T,H,W), values exactly 0.0 or 1.0
  int64_t cloud_count = 0;
  double cloud_size = 0.0;
  uint64_t seed = 0;
};

// n_clouds spread over the frames (remainder round-robin from frame 0);
// per-frame masked fraction kept inside [0.02, 0.70] by re-rolling the frame
// with a fresh sub-seed, up to 20 attempts.
CloudMask generate_cloud_mask(uint64_t seed, int64_t T, int64_t H, int64_t W, int64_t n_clouds,
                              double cloud_size);

// X * (1 - M): masked pixels drop to exactly 0. Pure; SAR never goes
// through here.
core::Tensor apply_cloud_mask(const core::Tensor& msi, const core::Tensor& mask);

// Elementwise OR, for compositing a detected mask with an artificial one.
core::Tensor combine_masks(const core::Tensor& a, const core::Tensor& b);

}  // namespace tubelet::datasim
