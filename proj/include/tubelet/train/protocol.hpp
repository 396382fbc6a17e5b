#pragma once

#include <iosfwd>
#include <vector>

#include "tubelet/objectives/report.hpp"
#include "tubelet/train/trainer.hpp"

namespace tubelet::train {

// The robustness sweep: every (variant, cloud count, seed) cell is trained
// and evaluated on its validation split; per-cell rows feed a summary table
// of per-(variant, clouds) means plus one "(AVG)" row per variant.
struct ProtocolConfig {
  std::vector<model::Variant> variants{model::Variant::MtsVit, model::Variant::MtsVivit,
                                       model::Variant::SmtsVit, model::Variant::SmtsVivit};
  std::vector<int64_t> cloud_counts{20, 30};
  int n_seeds = 3;
  uint64_t data_seed = 42;
  int64_t n_samples = 16;
  int64_t H = 60;
  int64_t W = 60;
  double cloud_size = 0.3;
  TrainConfig base_train;
  objectives::LossConfig loss;
};

struct ProtocolResult {
  std::vector<objectives::MetricsRow> cells;
  std::vector<objectives::TableRow> table;
};

ProtocolResult run_protocol(const ProtocolConfig& cfg, std::ostream* progress = nullptr);

}  // namespace tubelet::train
