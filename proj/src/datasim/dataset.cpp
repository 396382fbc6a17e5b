#include "tubelet/datasim/dataset.hpp"

#include <cstring>

#include "tubelet/core/rng.hpp"
#include "tubelet/datasim/clouds.hpp"
#include "tubelet/datasim/scene.hpp"

namespace tubelet::datasim {

namespace {

constexpr uint64_t kSceneSalt = 0x5343;  // "SC"
constexpr uint64_t kMaskSalt = 0x4d4b;   // "MK"
constexpr int kSceneClasses = 6;

void fnv_mix(uint64_t& h, const core::Tensor& t) {
  for (int64_t e : t.shape) {
    h ^= static_cast<uint64_t>(e);
    h *= 0x100000001b3ULL;
  }
  for (float v : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h ^= bits;
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

Dataset make_dataset(uint64_t seed, int64_t n_samples, int64_t H, int64_t W, int64_t clouds,
                     double cloud_size, bool include_sar) {
  if (n_samples < 5) throw ConfigError("make_dataset: n_samples must be >= 5 for the 80/20 split");
  Dataset ds;
  ds.seed = seed;
  ds.clouds = clouds;
  ds.cloud_size = cloud_size;
  ds.n_train = train_count(n_samples);
  ds.samples.reserve(static_cast<size_t>(n_samples));
  for (int64_t i = 0; i < n_samples; ++i) {
    Scene scene = generate_scene(core::derive_seed(seed, kSceneSalt, static_cast<uint64_t>(i)), H,
                                 W, kSceneClasses);
    CloudMask cm = generate_cloud_mask(core::derive_seed(seed, kMaskSalt, static_cast<uint64_t>(i)),
                                       kFrames, H, W, clouds, cloud_size);
    Sample s;
    s.msi_clouded = apply_cloud_mask(scene.msi, cm.mask);
    if (include_sar) s.sar = std::move(scene.sar);
    s.mask = std::move(cm.mask);
    s.target = std::move(scene.msi);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

uint64_t dataset_digest(const Dataset& ds) {
  uint64_t h = 0xcbf29ce484222325ULL;
  h ^= static_cast<uint64_t>(ds.samples.size());
  h *= 0x100000001b3ULL;
  for (const auto& s : ds.samples) {
    fnv_mix(h, s.msi_clouded);
    fnv_mix(h, s.sar);
    fnv_mix(h, s.mask);
    fnv_mix(h, s.target);
  }
  return h;
}

double mean_masked_fraction(const Dataset& ds) {
  double acc = 0.0;
  int64_t n = 0;
  for (const auto& s : ds.samples) {
    for (float v : s.mask.data) acc += v > 0.5f ? 1.0 : 0.0;
    n += s.mask.numel();
  }
  return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace tubelet::datasim
