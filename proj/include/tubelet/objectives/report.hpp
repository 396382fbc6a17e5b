#pragma once

#include <string>
#include <vector>

#include "tubelet/objectives/metrics.hpp"

namespace tubelet::objectives {

// One record of a metrics report: a (variant, clouds, seed, split) cell.
struct MetricsRow {
  std::string variant;
  int64_t clouds = 0;
  int64_t seed = 0;
  std::string split;
  MetricsValues values;
};

inline constexpr const char* kMetricsCsvHeader =
    "variant,clouds,seed,split,mse,sam,psnr,ssim,masked_mse,masked_sam,masked_psnr,masked_ssim";

std::string to_csv(const std::vector<MetricsRow>& rows);
std::string to_json(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> rows_from_json(const std::string& text);

// A rendered summary row: per-variant x cloud-count means, plus "(AVG)"
// lines per variant. Raw values are stored; rendering applies the
// conventional factors (MSE x1e3, SAM x1e1).
struct TableRow {
  std::string label;       // e.g. "SMTS-ViViT" or "SMTS-ViViT (AVG)"
  std::string clouds;      // "20", "30" or "-"
  double mse = 0.0;
  double sam = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

std::string render_table(const std::vector<TableRow>& rows);

}  // namespace tubelet::objectives
