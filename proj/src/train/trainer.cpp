#include "tubelet/train/trainer.hpp"

#include <cmath>
#include <ostream>

#include "tubelet/core/rng.hpp"
#include "tubelet/core/tape.hpp"
#include "tubelet/model/network.hpp"

namespace tubelet::train {

namespace {

using core::Tape;
using model::ModelParams;

// Forward + backward for one sample; returns the loss value and adds the
// parameter gradients into `grad_accum` (canonical entry order).
double sample_step(const datasim::Sample& s, const ModelParams& params,
                   const model::ModelConfig& mcfg, const objectives::LossConfig& lcfg,
                   std::vector<core::Tensor>& grad_accum) {
  Tape tape;
  auto pids = model::register_params(tape, params, /*trainable=*/true);
  const core::Tensor* sar = mcfg.C_sar > 0 ? &s.sar : nullptr;
  if (mcfg.C_sar > 0 && s.sar.numel() == 0) {
    throw ConfigError("train: fusion variant requires SAR but the dataset has none");
  }
  auto x = tape.input(model::assemble_input(s.msi_clouded, sar, s.mask, mcfg));
  auto y = model::model_forward(tape, x, pids, mcfg);
  // (C,T,H,W) -> (1,T,C,H,W) to match the loss layout
  auto pred = tape.reshape(tape.permute(y, {1, 0, 2, 3}),
                           {1, mcfg.T, mcfg.C_msi, mcfg.H, mcfg.W});
  auto target = tape.input(core::Tensor({1, mcfg.T, mcfg.C_msi, mcfg.H, mcfg.W}, s.target.data));
  auto loss = objectives::multiscale_loss(tape, pred, target, lcfg);
  tape.backward(loss);
  size_t p = 0;
  for (const auto& e : params.entries) {
    const auto& g = tape.grad(pids(e.name));
    auto& acc = grad_accum[p++];
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
  }
  return static_cast<double>(tape.value(loss).data[0]);
}

}  // namespace

objectives::MetricsValues evaluate_split(const datasim::Dataset& data,
                                         const std::vector<int64_t>& indices,
                                         const ModelParams& params,
                                         const model::ModelConfig& mcfg) {
  objectives::MetricsValues acc;
  for (int64_t idx : indices) {
    const auto& s = data.samples[static_cast<size_t>(idx)];
    const core::Tensor* sar = mcfg.C_sar > 0 ? &s.sar : nullptr;
    core::Tensor pred = model::predict(params, mcfg, s.msi_clouded, sar, s.mask);
    auto m = objectives::evaluate_all(pred, s.target, s.mask);
    acc.mse += m.mse;
    acc.sam += m.sam;
    acc.psnr += m.psnr;
    acc.ssim += m.ssim;
    acc.masked_mse += m.masked_mse;
    acc.masked_sam += m.masked_sam;
    acc.masked_psnr += m.masked_psnr;
    acc.masked_ssim += m.masked_ssim;
  }
  const double n = static_cast<double>(indices.empty() ? 1 : indices.size());
  acc.mse /= n;
  acc.sam /= n;
  acc.psnr /= n;
  acc.ssim /= n;
  acc.masked_mse /= n;
  acc.masked_sam /= n;
  acc.masked_psnr /= n;
  acc.masked_ssim /= n;
  return acc;
}

TrainResult train(const datasim::Dataset& data, const model::ModelConfig& mcfg,
                  const TrainConfig& tcfg, const objectives::LossConfig& lcfg,
                  const std::optional<ResumeState>& resume, const TrainHooks& hooks) {
  mcfg.validate();
  tcfg.validate();
  lcfg.validate();
  if (data.samples.empty() || data.n_train == 0) {
    throw ConfigError("train: dataset has no training samples");
  }

  TrainResult res;
  if (resume) {
    res.params = resume->params;
    res.opt = resume->opt;
    res.next_epoch = resume->next_epoch;
  } else {
    res.params = model::init_params<float>(mcfg, tcfg.seed);
    res.opt = OptimizerState::init(res.params);
    res.next_epoch = 0;
  }

  std::vector<core::Tensor> grads;
  grads.reserve(res.params.entries.size());
  for (const auto& e : res.params.entries) grads.emplace_back(e.tensor.shape);

  const auto val_idx = data.val_indices();

  for (int64_t epoch = res.next_epoch; epoch < tcfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, tcfg);
    std::vector<int64_t> order = data.train_indices();
    core::Rng shuffle_rng(core::derive_seed(tcfg.seed, 0x53484c46 /* "SHLF" */,
                                            static_cast<uint64_t>(epoch)));
    core::shuffle(order, shuffle_rng);

    double epoch_loss = 0.0;
    int64_t used = 0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(tcfg.batch_size)) {
      const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(tcfg.batch_size));
      const int64_t n = static_cast<int64_t>(b1 - b0);
      // drop a trailing single-sample batch, keep anything >= 2
      if (n < 2 && b0 != 0) break;
      for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0f);
      double batch_loss = 0.0;
      for (size_t k = b0; k < b1; ++k) {
        batch_loss +=
            sample_step(data.samples[static_cast<size_t>(order[k])], res.params, mcfg, lcfg, grads);
      }
      batch_loss /= static_cast<double>(n);
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(b0 / static_cast<size_t>(tcfg.batch_size)));
      }
      const float inv_n = 1.0f / static_cast<float>(n);
      for (auto& g : grads) {
        for (auto& v : g.data) v *= inv_n;
      }
      adam_step(res.params, grads, res.opt, lr);
      epoch_loss += batch_loss * static_cast<double>(n);
      used += n;
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = used > 0 ? epoch_loss / static_cast<double>(used) : 0.0;
    const bool last = epoch + 1 == tcfg.epochs;
    if (!val_idx.empty() && ((epoch + 1) % tcfg.val_every == 0 || last)) {
      log.has_val = true;
      log.val = evaluate_split(data, val_idx, res.params, mcfg);
    }
    if (hooks.progress) {
      auto& os = *hooks.progress;
      os << "epoch " << epoch << " lr " << lr << " loss " << log.train_loss;
      if (log.has_val) os << " val_mse " << log.val.mse;
      os << "\n";
    }
    res.log.push_back(log);
    res.next_epoch = epoch + 1;

    if (hooks.on_checkpoint) {
      const bool cadence = tcfg.checkpoint_every > 0 && (epoch + 1) % tcfg.checkpoint_every == 0;
      if (cadence || last) hooks.on_checkpoint(epoch, res.params, res.opt);
    }
  }
  return res;
}

}  // namespace tubelet::train
