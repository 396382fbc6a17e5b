#pragma once

#include <array>
#include <string>

#include "tubelet/core/tensor.hpp"

namespace tubelet::io {

// 8-bit RGB PNG of three bands of a (C,H,W) frame, values clamped to [0,1].
// band_triple (3,2,1) gives the natural-color composite of the 11-band
// ordering (red=B4, green=B3, blue=B2).
void write_png(const core::Tensor& frame, const std::array<int64_t, 3>& band_triple,
               const std::string& path);

// Signed error map pred - target, averaged over the selected bands, rendered
// on a diverging ramp: 0 -> white, positive -> red, negative -> blue. The
// ramp spans [-1, 1] in data units.
void write_error_png(const core::Tensor& pred, const core::Tensor& target,
                     const std::array<int64_t, 3>& band_triple, const std::string& path);

}  // namespace tubelet::io
