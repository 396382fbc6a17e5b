#include "tubelet/datasim/scene.hpp"

#include <algorithm>
#include <cmath>

#include "tubelet/core/rng.hpp"

namespace tubelet::datasim {

namespace {

// Bands 7 (NIR) and 8 (red edge 4) carry phenology-like monotone growth;
// the rest are smooth random walks.
bool monotone_band(int64_t b) { return b == 7 || b == 8; }

}  // namespace

const std::array<std::array<double, 11>, 2>& sar_mixing_matrix() {
  // VV leans on structure-sensitive NIR/red-edge bands, VH on SWIR/visible;
  // each row sums to 1 so mixed values stay inside [0,1].
  static const std::array<std::array<double, 11>, 2> mix = {{
      {0.02, 0.03, 0.05, 0.10, 0.08, 0.08, 0.10, 0.25, 0.15, 0.08, 0.06},
      {0.05, 0.10, 0.12, 0.08, 0.06, 0.06, 0.08, 0.10, 0.10, 0.15, 0.10},
  }};
  return mix;
}

Scene generate_scene(uint64_t seed, int64_t H, int64_t W, int n_classes) {
  if (H <= 0 || W <= 0 || H % 5 != 0 || W % 5 != 0) {
    throw ConfigError("generate_scene: H and W must be positive multiples of 5");
  }
  if (n_classes < 2) throw ConfigError("generate_scene: n_classes must be >= 2");

  core::Rng rng(core::derive_seed(seed, 0x5343454e /* "SCEN" */));

  // Voronoi partition of seeded random sites.
  std::vector<double> sx(static_cast<size_t>(n_classes)), sy(static_cast<size_t>(n_classes));
  for (int k = 0; k < n_classes; ++k) {
    sx[static_cast<size_t>(k)] = rng.uniform(0.0, static_cast<double>(W));
    sy[static_cast<size_t>(k)] = rng.uniform(0.0, static_cast<double>(H));
  }
  std::vector<int32_t> class_map(static_cast<size_t>(H * W));
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      double best = 1e300;
      int32_t best_k = 0;
      for (int k = 0; k < n_classes; ++k) {
        const double dx = static_cast<double>(x) + 0.5 - sx[static_cast<size_t>(k)];
        const double dy = static_cast<double>(y) + 0.5 - sy[static_cast<size_t>(k)];
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      class_map[static_cast<size_t>(y * W + x)] = best_k;
    }

  // Per-class band trajectories: smooth walks with bounded steps, monotone
  // trends on the NIR-analog bands.
  std::vector<double> traj(static_cast<size_t>(n_classes * kMsiBands * kFrames));
  for (int k = 0; k < n_classes; ++k)
    for (int64_t b = 0; b < kMsiBands; ++b) {
      double v = monotone_band(b) ? rng.uniform(0.10, 0.40) : rng.uniform(0.15, 0.85);
      for (int64_t t = 0; t < kFrames; ++t) {
        traj[static_cast<size_t>((k * kMsiBands + b) * kFrames + t)] = v;
        const double step = monotone_band(b) ? rng.uniform(0.02, 0.12) : rng.uniform(-0.15, 0.15);
        v = std::clamp(v + step, 0.05, 0.95);
      }
    }

  Scene scene;
  scene.class_map = std::move(class_map);
  scene.msi = core::Tensor({kFrames, kMsiBands, H, W});
  const uint64_t tex_seed = core::derive_seed(seed, kTextureSalt);
  for (int64_t t = 0; t < kFrames; ++t)
    for (int64_t b = 0; b < kMsiBands; ++b)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          const int32_t k = scene.class_map[static_cast<size_t>(y * W + x)];
          const double base = traj[static_cast<size_t>((k * kMsiBands + b) * kFrames + t)];
          // static per (band, pixel) texture keeps pixels temporally smooth
          const double tex =
              kTextureSigma * core::counter_normal(tex_seed, static_cast<uint64_t>((b * H + y) * W + x));
          scene.msi.at({t, b, y, x}) = static_cast<float>(std::clamp(base + tex, 0.0, 1.0));
        }

  // SAR = clamp01(mix * msi) * (1 + 0.05 * speckle), clamped to [0,1].
  scene.sar = core::Tensor({kFrames, kSarBands, H, W});
  const auto& mix = sar_mixing_matrix();
  const uint64_t sar_seed = core::derive_seed(seed, kSarNoiseSalt);
  for (int64_t t = 0; t < kFrames; ++t)
    for (int64_t p = 0; p < kSarBands; ++p)
      for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
          double v = 0.0;
          for (int64_t b = 0; b < kMsiBands; ++b) {
            v += mix[static_cast<size_t>(p)][static_cast<size_t>(b)] *
                 static_cast<double>(scene.msi.at({t, b, y, x}));
          }
          v = std::clamp(v, 0.0, 1.0);
          const uint64_t counter = static_cast<uint64_t>(((t * kSarBands + p) * H + y) * W + x);
          v *= 1.0 + kSarNoiseAmp * core::counter_normal(sar_seed, counter);
          scene.sar.at({t, p, y, x}) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }

  return scene;
}

}  // namespace tubelet::datasim
