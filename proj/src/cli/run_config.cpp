#include "tubelet/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tubelet::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.model = model::ModelConfig::for_variant(cfg.variant);
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(j, {"data", "model", "train", "loss", "out_dir"}, "top level");

  RunConfig cfg = default_run_config();

  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"seed", "n_samples", "H", "W", "clouds", "cloud_size"}, "data");
    maybe(d, "seed", cfg.data.seed);
    maybe(d, "n_samples", cfg.data.n_samples);
    maybe(d, "H", cfg.data.H);
    maybe(d, "W", cfg.data.W);
    maybe(d, "clouds", cfg.data.clouds);
    maybe(d, "cloud_size", cfg.data.cloud_size);
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"variant", "t", "k_s", "d_e", "depth", "heads", "ff_dim",
                       "use_mask_channel"},
                   "model");
    if (m.contains("variant")) {
      cfg.variant = model::variant_from_key(m.at("variant").get<std::string>());
    }
    cfg.model = model::ModelConfig::for_variant(cfg.variant);
    if (m.contains("t")) {
      const int64_t t = m.at("t").get<int64_t>();
      if (t != cfg.model.t) {
        throw ConfigError("config: t=" + std::to_string(t) + " contradicts variant '" +
                          model::variant_key(cfg.variant) + "' (implies t=" +
                          std::to_string(cfg.model.t) + ")");
      }
    }
    maybe(m, "k_s", cfg.model.k_s);
    maybe(m, "d_e", cfg.model.d_e);
    maybe(m, "depth", cfg.model.depth);
    maybe(m, "heads", cfg.model.heads);
    maybe(m, "ff_dim", cfg.model.ff_dim);
    maybe(m, "use_mask_channel", cfg.model.use_mask_channel);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t, {"epochs", "batch_size", "lr", "gamma", "decay_every", "seed"}, "train");
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "lr", cfg.train.lr);
    maybe(t, "gamma", cfg.train.gamma);
    maybe(t, "decay_every", cfg.train.decay_every);
    maybe(t, "seed", cfg.train.seed);
  }

  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    reject_unknown(l, {"scales", "w_mse", "w_sam"}, "loss");
    maybe(l, "scales", cfg.loss.scales);
    maybe(l, "w_mse", cfg.loss.w_mse);
    maybe(l, "w_sam", cfg.loss.w_sam);
  }

  maybe(j, "out_dir", cfg.out_dir);

  cfg.model.H = cfg.data.H;
  cfg.model.W = cfg.data.W;
  cfg.train.clouds = cfg.data.clouds;
  cfg.model.validate();
  cfg.train.validate();
  cfg.loss.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace tubelet::cli
