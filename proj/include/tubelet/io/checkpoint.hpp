#pragma once

#include <string>

#include "tubelet/model/config.hpp"
#include "tubelet/model/params.hpp"
#include "tubelet/objectives/losses.hpp"
#include "tubelet/train/adam.hpp"
#include "tubelet/train/trainer.hpp"

namespace tubelet::io {

// TBLT checkpoint: magic "TBLT", version u16, a length-prefixed UTF-8 JSON
// blob (model/train/loss configs and resume state), named tensor entries for
// every parameter and both Adam moments, and a trailing CRC32 of all
// preceding bytes. Little-endian throughout; float32 payloads.
struct Checkpoint {
  model::Variant variant = model::Variant::SmtsVivit;
  model::ModelConfig model_cfg;
  train::TrainConfig train_cfg;
  objectives::LossConfig loss_cfg;
  int64_t next_epoch = 0;
  model::ModelParams params;
  train::OptimizerState opt;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace tubelet::io
