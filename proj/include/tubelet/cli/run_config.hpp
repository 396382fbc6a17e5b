#pragma once

#include <cstdint>
#include <string>

#include "tubelet/model/config.hpp"
#include "tubelet/objectives/losses.hpp"
#include "tubelet/train/trainer.hpp"

namespace tubelet::cli {

struct DataConfig {
  uint64_t seed = 42;
  int64_t n_samples = 32;
  int64_t H = 60;
  int64_t W = 60;
  int64_t clouds = 20;
  double cloud_size = 0.3;
};

// The single JSON run configuration. Section defaults are the reference
// hyperparameters; unknown keys are rejected so typos fail loudly. The
// variant fixes the temporal span and SAR usage; an explicit "t" must agree.
struct RunConfig {
  DataConfig data;
  model::Variant variant = model::Variant::SmtsVivit;
  model::ModelConfig model;  // H/W mirrored from the data section
  train::TrainConfig train;
  objectives::LossConfig loss;
  std::string out_dir = "out";
};

RunConfig default_run_config();
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

}  // namespace tubelet::cli
