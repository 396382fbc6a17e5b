#pragma once

#include <cstdint>
#include <vector>

#include "tubelet/core/tensor.hpp"

namespace tubelet::datasim {

// One training example. `sar` may be empty (numel 0) in MSI-only containers.
struct Sample {
  core::Tensor msi_clouded;  // (6, 11, H, W), already masked
  core::Tensor sar;          // (6, 2, H, W)
  core::Tensor mask;         // (6, H, W)
  core::Tensor target;       // (6, 11, H, W), the clean scene
};

struct Dataset {
  std::vector<Sample> samples;
  int64_t n_train = 0;  // indices [0, n_train) train, the rest validation
  uint64_t seed = 0;
  int64_t clouds = 0;
  double cloud_size = 0.0;

  bool has_sar() const { return !samples.empty() && samples.front().sar.numel() > 0; }

  std::vector<int64_t> train_indices() const {
    std::vector<int64_t> v;
    for (int64_t i = 0; i < n_train; ++i) v.push_back(i);
    return v;
  }
  std::vector<int64_t> val_indices() const {
    std::vector<int64_t> v;
    for (int64_t i = n_train; i < static_cast<int64_t>(samples.size()); ++i) v.push_back(i);
    return v;
  }
};

// Deterministic 80/20 split by sample index, fixed before any shuffling.
inline int64_t train_count(int64_t n_samples) { return n_samples * 4 / 5; }

// Independent scenes and masks from (seed, sample index) sub-seeds. Targets
// are the clean MSI; masks are fixed per sample.
Dataset make_dataset(uint64_t seed, int64_t n_samples, int64_t H, int64_t W, int64_t clouds,
                     double cloud_size, bool include_sar = true);

// Content hash (FNV-1a over all tensor payloads), for determinism checks.
uint64_t dataset_digest(const Dataset& ds);

// Mean masked fraction over all samples and frames.
double mean_masked_fraction(const Dataset& ds);

}  // namespace tubelet::datasim
