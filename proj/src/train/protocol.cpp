#include "tubelet/train/protocol.hpp"

#include <ostream>

#include "tubelet/core/rng.hpp"

namespace tubelet::train {

namespace {

objectives::MetricsValues mean_values(const std::vector<const objectives::MetricsValues*>& vs) {
  objectives::MetricsValues out;
  for (const auto* v : vs) {
    out.mse += v->mse;
    out.sam += v->sam;
    out.psnr += v->psnr;
    out.ssim += v->ssim;
    out.masked_mse += v->masked_mse;
    out.masked_sam += v->masked_sam;
    out.masked_psnr += v->masked_psnr;
    out.masked_ssim += v->masked_ssim;
  }
  const double n = static_cast<double>(vs.empty() ? 1 : vs.size());
  out.mse /= n;
  out.sam /= n;
  out.psnr /= n;
  out.ssim /= n;
  out.masked_mse /= n;
  out.masked_sam /= n;
  out.masked_psnr /= n;
  out.masked_ssim /= n;
  return out;
}

}  // namespace

ProtocolResult run_protocol(const ProtocolConfig& cfg, std::ostream* progress) {
  if (cfg.n_seeds < 1) throw ConfigError("run_protocol: n_seeds must be >= 1");
  ProtocolResult res;

  for (model::Variant variant : cfg.variants) {
    for (int64_t clouds : cfg.cloud_counts) {
      // one dataset per cloud count, shared across variants and seeds
      const uint64_t dseed = core::derive_seed(cfg.data_seed, static_cast<uint64_t>(clouds));
      datasim::Dataset data =
          make_dataset(dseed, cfg.n_samples, cfg.H, cfg.W, clouds, cfg.cloud_size);
      for (int k = 0; k < cfg.n_seeds; ++k) {
        model::ModelConfig mcfg = model::ModelConfig::for_variant(variant);
        mcfg.H = cfg.H;
        mcfg.W = cfg.W;
        TrainConfig tcfg = cfg.base_train;
        tcfg.seed = cfg.base_train.seed + static_cast<uint64_t>(k);
        tcfg.clouds = clouds;
        if (progress) {
          (*progress) << "[protocol] " << model::variant_name(variant) << " clouds=" << clouds
                      << " seed=" << tcfg.seed << "\n";
        }
        TrainResult tr = train(data, mcfg, tcfg, cfg.loss);
        objectives::MetricsRow row;
        row.variant = model::variant_key(variant);
        row.clouds = clouds;
        row.seed = static_cast<int64_t>(tcfg.seed);
        row.split = "val";
        row.values = evaluate_split(data, data.val_indices(), tr.params, mcfg);
        res.cells.push_back(std::move(row));
      }
    }
  }

  // per-(variant, clouds) means in Table-1 order, then per-variant averages
  for (model::Variant variant : cfg.variants) {
    for (int64_t clouds : cfg.cloud_counts) {
      std::vector<const objectives::MetricsValues*> vs;
      for (const auto& c : res.cells) {
        if (c.variant == model::variant_key(variant) && c.clouds == clouds) vs.push_back(&c.values);
      }
      auto m = mean_values(vs);
      res.table.push_back({model::variant_name(variant), std::to_string(clouds), m.mse, m.sam,
                           m.psnr, m.ssim});
    }
  }
  for (model::Variant variant : cfg.variants) {
    std::vector<const objectives::MetricsValues*> vs;
    for (const auto& c : res.cells) {
      if (c.variant == model::variant_key(variant)) vs.push_back(&c.values);
    }
    auto m = mean_values(vs);
    res.table.push_back(
        {std::string(model::variant_name(variant)) + " (AVG)", "-", m.mse, m.sam, m.psnr, m.ssim});
  }
  return res;
}

}  // namespace tubelet::train
