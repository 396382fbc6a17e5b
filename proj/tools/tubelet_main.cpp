#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tubelet/cli/run_config.hpp"
#include "tubelet/datasim/dataset.hpp"
#include "tubelet/io/checkpoint.hpp"
#include "tubelet/io/container.hpp"
#include "tubelet/io/png.hpp"
#include "tubelet/model/network.hpp"
#include "tubelet/objectives/report.hpp"
#include "tubelet/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace tubelet;

namespace {

constexpr std::array<int64_t, 3> kNaturalColor = {3, 2, 1};  // B4, B3, B2

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

cli::RunConfig config_from(const std::string& path) {
  return path.empty() ? cli::default_run_config() : cli::load_run_config(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
}

std::string loss_log_csv(const std::vector<train::EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,val_mse,val_sam,val_psnr,val_ssim\n";
  for (const auto& e : log) {
    os << e.epoch << "," << fmt_g(e.lr) << "," << fmt_g(e.train_loss) << ",";
    if (e.has_val) {
      os << fmt_g(e.val.mse) << "," << fmt_g(e.val.sam) << "," << fmt_g(e.val.psnr) << ","
         << fmt_g(e.val.ssim);
    } else {
      os << ",,,";
    }
    os << "\n";
  }
  return os.str();
}

core::Tensor frame_at(const core::Tensor& stack, int64_t t) {
  const int64_t C = stack.shape[1], H = stack.shape[2], W = stack.shape[3];
  core::Tensor frame({C, H, W});
  std::copy_n(stack.data.data() + t * C * H * W, C * H * W, frame.data.data());
  return frame;
}

int cmd_gen_data(const std::string& config_path, std::string out_path, std::optional<uint64_t> seed,
                 std::optional<int64_t> samples, std::optional<int64_t> clouds,
                 std::optional<double> cloud_size, bool no_sar) {
  cli::RunConfig cfg = config_from(config_path);
  if (seed) cfg.data.seed = *seed;
  if (samples) cfg.data.n_samples = *samples;
  if (clouds) cfg.data.clouds = *clouds;
  if (cloud_size) cfg.data.cloud_size = *cloud_size;
  if (out_path.empty()) out_path = cfg.out_dir + "/dataset.rstk";

  auto ds = datasim::make_dataset(cfg.data.seed, cfg.data.n_samples, cfg.data.H, cfg.data.W,
                                  cfg.data.clouds, cfg.data.cloud_size, !no_sar);
  fs::path p(out_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  io::write_container(out_path, ds);

  char digest[24];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(datasim::dataset_digest(ds)));
  std::cout << "wrote " << ds.samples.size() << " samples (" << ds.n_train << " train / "
            << ds.samples.size() - static_cast<size_t>(ds.n_train) << " val) to " << out_path
            << " clouds=" << cfg.data.clouds << " cloud_size=" << cfg.data.cloud_size
            << " masked_fraction=" << fmt_g(datasim::mean_masked_fraction(ds)) << " digest=0x"
            << digest << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path, std::string out_dir,
              const std::string& resume_path, std::optional<int64_t> epochs,
              std::optional<uint64_t> seed, std::optional<int64_t> batch_size,
              std::optional<std::string> variant_key) {
  cli::RunConfig cfg = config_from(config_path);
  if (variant_key) {
    cfg.variant = model::variant_from_key(*variant_key);
    const auto preserved = cfg.model;
    cfg.model = model::ModelConfig::for_variant(cfg.variant);
    cfg.model.k_s = preserved.k_s;
    cfg.model.d_e = preserved.d_e;
    cfg.model.depth = preserved.depth;
    cfg.model.heads = preserved.heads;
    cfg.model.ff_dim = preserved.ff_dim;
    cfg.model.use_mask_channel = preserved.use_mask_channel;
    cfg.model.H = preserved.H;
    cfg.model.W = preserved.W;
  }
  if (epochs) cfg.train.epochs = *epochs;
  if (seed) cfg.train.seed = *seed;
  if (batch_size) cfg.train.batch_size = *batch_size;
  if (out_dir.empty()) out_dir = cfg.out_dir;

  std::optional<train::ResumeState> resume;
  if (!resume_path.empty()) {
    io::Checkpoint ck = io::read_checkpoint(resume_path);
    cfg.variant = ck.variant;
    cfg.model = ck.model_cfg;
    cfg.loss = ck.loss_cfg;
    const int64_t epochs_override = epochs ? *epochs : ck.train_cfg.epochs;
    cfg.train = ck.train_cfg;
    cfg.train.epochs = epochs_override;
    resume = train::ResumeState{std::move(ck.params), std::move(ck.opt), ck.next_epoch};
  }

  datasim::Dataset data = io::read_container(data_path);
  if (cfg.model.C_sar > 0 && !data.has_sar()) {
    throw ConfigError("variant '" + std::string(model::variant_key(cfg.variant)) +
                      "' needs SAR but container '" + data_path + "' has none");
  }
  if (!data.samples.empty()) {
    const auto& shape = data.samples.front().target.shape;
    cfg.model.H = shape[2];
    cfg.model.W = shape[3];
    cfg.model.validate();
  }

  fs::create_directories(out_dir);
  train::TrainHooks hooks;
  hooks.progress = &std::cout;
  hooks.on_checkpoint = [&](int64_t epoch, const model::ModelParams& params,
                            const train::OptimizerState& opt) {
    io::Checkpoint ck;
    ck.variant = cfg.variant;
    ck.model_cfg = cfg.model;
    ck.train_cfg = cfg.train;
    ck.loss_cfg = cfg.loss;
    ck.next_epoch = epoch + 1;
    ck.params = params;
    ck.opt = opt;
    const bool last = epoch + 1 == cfg.train.epochs;
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_epoch%04lld.tblt",
                  static_cast<long long>(epoch + 1));
    io::write_checkpoint(out_dir + "/" + (last ? "checkpoint.tblt" : name), ck);
  };

  train::TrainResult res = train::train(data, cfg.model, cfg.train, cfg.loss, resume, hooks);
  write_text(out_dir + "/loss_log.csv", loss_log_csv(res.log));
  std::cout << "trained " << model::variant_name(cfg.variant) << " for "
            << cfg.train.epochs - (resume ? resume->next_epoch : 0) << " epochs -> " << out_dir
            << "/checkpoint.tblt\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, std::string out_dir,
             bool identity, const std::string& split, std::optional<int64_t> clouds_label) {
  datasim::Dataset data = io::read_container(data_path);
  std::vector<int64_t> indices;
  if (split == "val") {
    indices = data.val_indices();
  } else if (split == "train") {
    indices = data.train_indices();
  } else if (split == "all") {
    for (size_t i = 0; i < data.samples.size(); ++i) indices.push_back(static_cast<int64_t>(i));
  } else {
    throw ConfigError("eval: unknown split '" + split + "' (val|train|all)");
  }
  if (indices.empty()) throw DataError("eval: split '" + split + "' is empty");

  objectives::MetricsRow row;
  row.split = split;
  if (identity) {
    objectives::MetricsValues acc;
    for (int64_t i : indices) {
      const auto& s = data.samples[static_cast<size_t>(i)];
      auto m = objectives::evaluate_all(s.target, s.target, s.mask);
      acc.mse += m.mse;
      acc.sam += m.sam;
      acc.psnr += m.psnr;
      acc.ssim += m.ssim;
      acc.masked_mse += m.masked_mse;
      acc.masked_sam += m.masked_sam;
      acc.masked_psnr += m.masked_psnr;
      acc.masked_ssim += m.masked_ssim;
    }
    const double n = static_cast<double>(indices.size());
    acc.mse /= n;
    acc.sam /= n;
    acc.psnr /= n;
    acc.ssim /= n;
    acc.masked_mse /= n;
    acc.masked_sam /= n;
    acc.masked_psnr /= n;
    acc.masked_ssim /= n;
    row.variant = "identity";
    row.seed = 0;
    row.clouds = clouds_label.value_or(0);
    row.values = acc;
  } else {
    if (ckpt_path.empty()) throw ConfigError("eval: --checkpoint required unless --identity");
    io::Checkpoint ck = io::read_checkpoint(ckpt_path);
    if (ck.model_cfg.C_sar > 0 && !data.has_sar()) {
      throw ConfigError("eval: checkpoint variant needs SAR but container has none");
    }
    row.variant = model::variant_key(ck.variant);
    row.seed = static_cast<int64_t>(ck.train_cfg.seed);
    row.clouds = clouds_label.value_or(ck.train_cfg.clouds);
    row.values = train::evaluate_split(data, indices, ck.params, ck.model_cfg);
  }

  fs::create_directories(out_dir);
  const std::vector<objectives::MetricsRow> rows{row};
  write_text(out_dir + "/metrics.csv", objectives::to_csv(rows));
  write_text(out_dir + "/metrics.json", objectives::to_json(rows));
  std::cout << objectives::render_table({{row.variant, std::to_string(row.clouds), row.values.mse,
                                          row.values.sam, row.values.psnr, row.values.ssim}});
  return 0;
}

int cmd_reconstruct(const std::string& ckpt_path, const std::string& data_path,
                    std::string out_dir, int64_t sample) {
  io::Checkpoint ck = io::read_checkpoint(ckpt_path);
  datasim::Dataset data = io::read_container(data_path);
  if (sample < 0 || sample >= static_cast<int64_t>(data.samples.size())) {
    throw ConfigError("reconstruct: sample " + std::to_string(sample) + " out of range [0," +
                      std::to_string(data.samples.size()) + ")");
  }
  const auto& s = data.samples[static_cast<size_t>(sample)];
  if (ck.model_cfg.C_sar > 0 && s.sar.numel() == 0) {
    throw ConfigError("reconstruct: checkpoint variant needs SAR but container has none");
  }
  const core::Tensor* sar = ck.model_cfg.C_sar > 0 ? &s.sar : nullptr;
  core::Tensor pred = model::predict(ck.params, ck.model_cfg, s.msi_clouded, sar, s.mask);

  fs::create_directories(out_dir);
  const int64_t T = s.target.shape[0];
  for (int64_t t = 0; t < T; ++t) {
    const std::string stem = out_dir + "/s" + std::to_string(sample) + "_t" + std::to_string(t);
    io::write_png(frame_at(s.msi_clouded, t), kNaturalColor, stem + "_input.png");
    io::write_png(frame_at(pred, t), kNaturalColor, stem + "_recon.png");
    io::write_error_png(frame_at(pred, t), frame_at(s.target, t), kNaturalColor,
                        stem + "_error.png");
    io::write_png(frame_at(s.target, t), kNaturalColor, stem + "_target.png");
  }
  std::cout << "wrote " << 4 * T << " PNGs for sample " << sample << " to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tubelet: temporal-spatial tubelet transformer toolkit for cloud-robust "
               "multispectral reconstruction"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, resume_path, ckpt_path, split = "val";
  std::optional<uint64_t> seed;
  std::optional<int64_t> samples, clouds, epochs, batch_size;
  std::optional<double> cloud_size;
  std::optional<std::string> variant_key;
  bool no_sar = false, identity = false;
  int64_t sample_index = 0;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset container");
  gen->add_option("--config", config_path, "JSON run configuration");
  gen->add_option("--out", out_path, "output .rstk path");
  gen->add_option("--seed", seed, "override data.seed");
  gen->add_option("--samples", samples, "override data.n_samples");
  gen->add_option("--clouds", clouds, "override data.clouds");
  gen->add_option("--cloud-size", cloud_size, "override data.cloud_size");
  gen->add_flag("--no-sar", no_sar, "omit SAR entries from the container");

  auto* tr = app.add_subcommand("train", "train a variant on a dataset container");
  tr->add_option("--config", config_path, "JSON run configuration");
  tr->add_option("--data", data_path, "input .rstk container")->required();
  tr->add_option("--out", out_path, "output directory");
  tr->add_option("--resume", resume_path, "checkpoint to continue from");
  tr->add_option("--epochs", epochs, "override train.epochs");
  tr->add_option("--seed", seed, "override train.seed");
  tr->add_option("--batch-size", batch_size, "override train.batch_size");
  tr->add_option("--variant", variant_key, "override model.variant");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint .tblt path");
  ev->add_option("--data", data_path, "input .rstk container")->required();
  ev->add_option("--out", out_path, "output directory")->required();
  ev->add_option("--split", split, "val|train|all (default val)");
  ev->add_option("--clouds", clouds, "label rows with this cloud count");
  ev->add_flag("--identity", identity, "evaluate targets against themselves (debug)");

  auto* rc = app.add_subcommand("reconstruct", "emit per-timestep PNGs for one sample");
  rc->add_option("--checkpoint", ckpt_path, "checkpoint .tblt path")->required();
  rc->add_option("--data", data_path, "input .rstk container")->required();
  rc->add_option("--sample", sample_index, "sample index in the container");
  rc->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_gen_data(config_path, out_path, seed, samples, clouds, cloud_size, no_sar);
    }
    if (tr->parsed()) {
      return cmd_train(config_path, data_path, out_path, resume_path, epochs, seed, batch_size,
                       variant_key);
    }
    if (ev->parsed()) {
      return cmd_eval(ckpt_path, data_path, out_path, identity, split, clouds);
    }
    if (rc->parsed()) {
      return cmd_reconstruct(ckpt_path, data_path, out_path, sample_index);
    }
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
