#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tubelet/datasim/dataset.hpp"
#include "tubelet/model/config.hpp"
#include "tubelet/model/params.hpp"
#include "tubelet/objectives/losses.hpp"
#include "tubelet/objectives/metrics.hpp"
#include "tubelet/train/adam.hpp"

namespace tubelet::train {

struct TrainConfig {
  int64_t epochs = 200;
  int64_t batch_size = 8;
  double lr = 1e-3;
  double gamma = 0.95;         // decay factor
  int64_t decay_every = 10;    // epochs between decays
  uint64_t seed = 42;
  int64_t val_every = 10;      // epochs between validation passes
  int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  int64_t clouds = 20;         // labels reports and checkpoints

  void validate() const {
    if (epochs <= 0 || batch_size <= 0 || decay_every <= 0 || val_every <= 0 ||
        checkpoint_every < 0 || lr <= 0 || gamma <= 0) {
      throw ConfigError("train config: values must be positive");
    }
  }
};

// Stepped decay: lr * gamma^floor(epoch / decay_every), epochs 0-based.
inline double lr_at(int64_t epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0");
  double lr = cfg.lr;
  for (int64_t k = 0; k < epoch / cfg.decay_every; ++k) lr *= cfg.gamma;
  return lr;
}

struct EpochLog {
  int64_t epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;
  bool has_val = false;
  objectives::MetricsValues val;
};

struct TrainResult {
  model::ModelParams params;
  OptimizerState opt;
  std::vector<EpochLog> log;
  int64_t next_epoch = 0;
};

// Warm-start state for resuming from a checkpoint at an epoch boundary.
struct ResumeState {
  model::ModelParams params;
  OptimizerState opt;
  int64_t next_epoch = 0;
};

struct TrainHooks {
  // called with (0-based epoch just finished, params, optimizer state)
  std::function<void(int64_t, const model::ModelParams&, const OptimizerState&)> on_checkpoint;
  std::ostream* progress = nullptr;
};

// Deterministic training loop: per epoch a seeded shuffle of the train
// split, per batch forward -> multi-scale loss -> backward -> Adam. The
// final partial batch is kept only when it holds at least 2 samples.
// Validation metrics every `val_every` epochs and on the last one.
TrainResult train(const datasim::Dataset& data, const model::ModelConfig& mcfg,
                  const TrainConfig& tcfg, const objectives::LossConfig& lcfg,
                  const std::optional<ResumeState>& resume = std::nullopt,
                  const TrainHooks& hooks = {});

// Mean per-sample metrics of the current parameters over a sample index set.
objectives::MetricsValues evaluate_split(const datasim::Dataset& data,
                                         const std::vector<int64_t>& indices,
                                         const model::ModelParams& params,
                                         const model::ModelConfig& mcfg);

}  // namespace tubelet::train
