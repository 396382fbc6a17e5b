#include "tubelet/datasim/clouds.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tubelet/core/rng.hpp"

namespace tubelet::datasim {

namespace {

// Super-level set of exp(-q/2) at half peak: q <= 2*ln(2).
constexpr double kLevelQ = 2.0 * M_LN2;

// Rasterizes one frame's worth of clouds; returns the masked fraction.
double rasterize_frame(float* frame, int64_t H, int64_t W, int64_t count, double cloud_size,
                       core::Rng& rng) {
  std::fill(frame, frame + H * W, 0.0f);
  const double base = cloud_size * static_cast<double>(H) / 4.0;
  for (int64_t c = 0; c < count; ++c) {
    const double cx = rng.uniform(0.0, static_cast<double>(W));
    const double cy = rng.uniform(0.0, static_cast<double>(H));
    const double sx = rng.uniform(0.5, 1.5) * base;
    const double sy = rng.uniform(0.5, 1.5) * base;
    const double theta = rng.uniform(0.0, M_PI);
    const double ct = std::cos(theta), st = std::sin(theta);
    // conservative bounding box around the ellipse
    const double reach = std::sqrt(kLevelQ) * std::max(sx, sy) + 1.0;
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - reach)));
    const int64_t y1 = std::min<int64_t>(H - 1, static_cast<int64_t>(std::ceil(cy + reach)));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - reach)));
    const int64_t x1 = std::min<int64_t>(W - 1, static_cast<int64_t>(std::ceil(cx + reach)));
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx;
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double u = (dx * ct + dy * st) / sx;
        const double v = (-dx * st + dy * ct) / sy;
        if (u * u + v * v <= kLevelQ) frame[y * W + x] = 1.0f;
      }
  }
  int64_t on = 0;
  for (int64_t i = 0; i < H * W; ++i) on += frame[i] > 0.5f ? 1 : 0;
  return static_cast<double>(on) / static_cast<double>(H * W);
}

}  // namespace

CloudMask generate_cloud_mask(uint64_t seed, int64_t T, int64_t H, int64_t W, int64_t n_clouds,
                              double cloud_size) {
  if (T <= 0 || H <= 0 || W <= 0) throw ConfigError("cloud mask: extents must be positive");
  if (n_clouds < 0) throw ConfigError("cloud mask: n_clouds must be >= 0");
  if (cloud_size <= 0.0 || cloud_size > 1.0) {
    throw ConfigError("cloud mask: cloud_size must be in (0, 1]");
  }
  CloudMask out;
  out.mask = core::Tensor({T, H, W});
  out.cloud_count = n_clouds;
  out.cloud_size = cloud_size;
  out.seed = seed;

  const int64_t per_frame = n_clouds / T;
  const int64_t remainder = n_clouds % T;
  for (int64_t f = 0; f < T; ++f) {
    const int64_t count = per_frame + (f < remainder ? 1 : 0);
    float* frame = out.mask.data.data() + f * H * W;
    if (count == 0) {
      std::fill(frame, frame + H * W, 0.0f);
      continue;
    }
    bool ok = false;
    for (int attempt = 0; attempt < 20; ++attempt) {
      core::Rng rng(core::derive_seed(seed, static_cast<uint64_t>(f), static_cast<uint64_t>(attempt)));
      const double frac = rasterize_frame(frame, H, W, count, cloud_size, rng);
      if (frac >= 0.02 && frac <= 0.70) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw DataError("cloud mask: frame " + std::to_string(f) +
                      " could not reach a masked fraction in [0.02, 0.70] after 20 attempts");
    }
  }
  return out;
}

core::Tensor apply_cloud_mask(const core::Tensor& msi, const core::Tensor& mask) {
  if (msi.rank() != 4 || mask.rank() != 3 || msi.shape[0] != mask.shape[0] ||
      msi.shape[2] != mask.shape[1] || msi.shape[3] != mask.shape[2]) {
    throw ShapeError("apply_cloud_mask: (T,C,H,W) x (T,H,W) required, got " +
                     core::shape_str(msi.shape) + " x " + core::shape_str(mask.shape));
  }
  const int64_t T = msi.shape[0], C = msi.shape[1], HW = msi.shape[2] * msi.shape[3];
  core::Tensor out(msi.shape);
  for (int64_t t = 0; t < T; ++t)
    for (int64_t c = 0; c < C; ++c) {
      const float* src = msi.data.data() + (t * C + c) * HW;
      const float* m = mask.data.data() + t * HW;
      float* dst = out.data.data() + (t * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] = src[i] * (1.0f - m[i]);
    }
  return out;
}

core::Tensor combine_masks(const core::Tensor& a, const core::Tensor& b) {
  core::require_same_shape(a, b, "combine_masks");
  core::Tensor out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (a.data[i] > 0.5f || b.data[i] > 0.5f) ? 1.0f : 0.0f;
  }
  return out;
}

}  // namespace tubelet::datasim
