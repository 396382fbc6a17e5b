#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tubelet/core/tensor.hpp"

namespace tubelet::datasim {

inline constexpr int64_t kFrames = 6;     // sequence length
inline constexpr int64_t kMsiBands = 11;  // B1..B12 subset
inline constexpr int64_t kSarBands = 2;   // VV, VH

// A synthetic cloud-free scene: Voronoi class regions, per-class smooth
// 11-band temporal trajectories, and SAR derived deterministically from the
// MSI so fusion models have a guaranteed signal to exploit.
struct Scene {
  core::Tensor msi;                // (6, 11, H, W) in [0,1]
  core::Tensor sar;                // (6, 2, H, W) in [0,1]
  std::vector<int32_t> class_map;  // H*W labels
};

// Fixed 2x11 mixing matrix used to derive SAR from MSI; rows sum to 1.
const std::array<std::array<double, 11>, 2>& sar_mixing_matrix();

// Relative amplitude of the multiplicative SAR speckle term.
inline constexpr double kSarNoiseAmp = 0.05;
// Per-pixel spatial texture sigma added to class trajectories.
inline constexpr double kTextureSigma = 0.02;

// Salts for the counter-based noise fields (pure functions of seed+index, so
// tests can recompute them independently).
inline constexpr uint64_t kSarNoiseSalt = 0x5341524e;   // "SARN"
inline constexpr uint64_t kTextureSalt = 0x54455854;    // "TEXT"

Scene generate_scene(uint64_t seed, int64_t H, int64_t W, int n_classes);

}  // namespace tubelet::datasim
