#include "tubelet/objectives/report.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "tubelet/core/errors.hpp"

namespace tubelet::objectives {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

nlohmann::json values_to_json(const MetricsValues& v) {
  return {{"mse", v.mse},
          {"sam", v.sam},
          {"psnr", v.psnr},
          {"ssim", v.ssim},
          {"masked_mse", v.masked_mse},
          {"masked_sam", v.masked_sam},
          {"masked_psnr", v.masked_psnr},
          {"masked_ssim", v.masked_ssim}};
}

}  // namespace

std::string to_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << kMetricsCsvHeader << "\n";
  for (const auto& r : rows) {
    os << r.variant << "," << r.clouds << "," << r.seed << "," << r.split << "," << fmt(r.values.mse)
       << "," << fmt(r.values.sam) << "," << fmt(r.values.psnr) << "," << fmt(r.values.ssim) << ","
       << fmt(r.values.masked_mse) << "," << fmt(r.values.masked_sam) << ","
       << fmt(r.values.masked_psnr) << "," << fmt(r.values.masked_ssim) << "\n";
  }
  return os.str();
}

std::string to_json(const std::vector<MetricsRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = values_to_json(r.values);
    j["variant"] = r.variant;
    j["clouds"] = r.clouds;
    j["seed"] = r.seed;
    j["split"] = r.split;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<MetricsRow> rows_from_json(const std::string& text) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics json: ") + e.what());
  }
  std::vector<MetricsRow> rows;
  for (const auto& j : arr) {
    MetricsRow r;
    r.variant = j.at("variant").get<std::string>();
    r.clouds = j.at("clouds").get<int64_t>();
    r.seed = j.at("seed").get<int64_t>();
    r.split = j.at("split").get<std::string>();
    r.values.mse = j.at("mse").get<double>();
    r.values.sam = j.at("sam").get<double>();
    r.values.psnr = j.at("psnr").get<double>();
    r.values.ssim = j.at("ssim").get<double>();
    r.values.masked_mse = j.at("masked_mse").get<double>();
    r.values.masked_sam = j.at("masked_sam").get<double>();
    r.values.masked_psnr = j.at("masked_psnr").get<double>();
    r.values.masked_ssim = j.at("masked_ssim").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_table(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-22s %8s %12s %12s %9s %7s\n", "Model", "#Cloud", "MSE(x1e-3)",
                "SAM(x1e-1)", "PSNR", "SSIM");
  os << buf;
  os << std::string(76, '-') << "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-22s %8s %12.3f %12.3f %9.3f %7.3f\n", r.label.c_str(),
                  r.clouds.c_str(), r.mse * 1e3, r.sam * 1e1, r.psnr, r.ssim);
    os << buf;
  }
  return os.str();
}

}  // namespace tubelet::objectives
