#include "tubelet/io/checkpoint.hpp"

#include <zlib.h>

#include <set>

#include "json.hpp"
#include "tubelet/io/binary.hpp"

namespace tubelet::io {

namespace {

constexpr char kMagic[4] = {'T', 'B', 'L', 'T'};
constexpr uint16_t kVersion = 1;

using nlohmann::json;

json config_to_json(const Checkpoint& c) {
  json j;
  j["model"] = {{"variant", model::variant_key(c.variant)},
                {"T", c.model_cfg.T},
                {"C_msi", c.model_cfg.C_msi},
                {"C_sar", c.model_cfg.C_sar},
                {"use_mask_channel", c.model_cfg.use_mask_channel},
                {"t", c.model_cfg.t},
                {"k_s", c.model_cfg.k_s},
                {"d_e", c.model_cfg.d_e},
                {"depth", c.model_cfg.depth},
                {"heads", c.model_cfg.heads},
                {"ff_dim", c.model_cfg.ff_dim},
                {"H", c.model_cfg.H},
                {"W", c.model_cfg.W}};
  j["train"] = {{"epochs", c.train_cfg.epochs},
                {"batch_size", c.train_cfg.batch_size},
                {"lr", c.train_cfg.lr},
                {"gamma", c.train_cfg.gamma},
                {"decay_every", c.train_cfg.decay_every},
                {"seed", c.train_cfg.seed},
                {"val_every", c.train_cfg.val_every},
                {"checkpoint_every", c.train_cfg.checkpoint_every},
                {"clouds", c.train_cfg.clouds}};
  j["loss"] = {{"scales", c.loss_cfg.scales},
               {"w_mse", c.loss_cfg.w_mse},
               {"w_sam", c.loss_cfg.w_sam},
               {"sam_epsilon", c.loss_cfg.sam_epsilon}};
  j["state"] = {{"next_epoch", c.next_epoch}, {"adam_step", c.opt.step}};
  return j;
}

void config_from_json(const json& j, Checkpoint& c) {
  const auto& m = j.at("model");
  c.variant = model::variant_from_key(m.at("variant").get<std::string>());
  c.model_cfg.T = m.at("T").get<int64_t>();
  c.model_cfg.C_msi = m.at("C_msi").get<int64_t>();
  c.model_cfg.C_sar = m.at("C_sar").get<int64_t>();
  c.model_cfg.use_mask_channel = m.at("use_mask_channel").get<bool>();
  c.model_cfg.t = m.at("t").get<int64_t>();
  c.model_cfg.k_s = m.at("k_s").get<int64_t>();
  c.model_cfg.d_e = m.at("d_e").get<int64_t>();
  c.model_cfg.depth = m.at("depth").get<int64_t>();
  c.model_cfg.heads = m.at("heads").get<int64_t>();
  c.model_cfg.ff_dim = m.at("ff_dim").get<int64_t>();
  c.model_cfg.H = m.at("H").get<int64_t>();
  c.model_cfg.W = m.at("W").get<int64_t>();
  const auto& t = j.at("train");
  c.train_cfg.epochs = t.at("epochs").get<int64_t>();
  c.train_cfg.batch_size = t.at("batch_size").get<int64_t>();
  c.train_cfg.lr = t.at("lr").get<double>();
  c.train_cfg.gamma = t.at("gamma").get<double>();
  c.train_cfg.decay_every = t.at("decay_every").get<int64_t>();
  c.train_cfg.seed = t.at("seed").get<uint64_t>();
  c.train_cfg.val_every = t.at("val_every").get<int64_t>();
  c.train_cfg.checkpoint_every = t.at("checkpoint_every").get<int64_t>();
  c.train_cfg.clouds = t.at("clouds").get<int64_t>();
  const auto& l = j.at("loss");
  c.loss_cfg.scales = l.at("scales").get<std::vector<double>>();
  c.loss_cfg.w_mse = l.at("w_mse").get<double>();
  c.loss_cfg.w_sam = l.at("w_sam").get<double>();
  c.loss_cfg.sam_epsilon = l.at("sam_epsilon").get<double>();
  const auto& s = j.at("state");
  c.next_epoch = s.at("next_epoch").get<int64_t>();
  c.opt.step = s.at("adam_step").get<int64_t>();
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  const std::string blob = config_to_json(ckpt).dump();
  put_u32(out, static_cast<uint32_t>(blob.size()));
  out.insert(out.end(), blob.begin(), blob.end());
  for (const auto& e : ckpt.params.entries) put_tensor_entry(out, e.name, e.tensor);
  for (size_t p = 0; p < ckpt.params.entries.size(); ++p) {
    put_tensor_entry(out, "adam.m." + ckpt.params.entries[p].name, ckpt.opt.m[p]);
    put_tensor_entry(out, "adam.v." + ckpt.params.entries[p].name, ckpt.opt.v[p]);
  }
  const uint32_t crc =
      static_cast<uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
  put_u32(out, crc);
  write_file_bytes(path, out);
}

Checkpoint read_checkpoint(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  const std::string ctx = "checkpoint '" + path + "'";
  if (bytes.size() < 14) throw DataError(ctx + ": truncated file");
  const uint32_t stored_crc = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
  const uint32_t actual_crc = static_cast<uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (stored_crc != actual_crc) throw DataError(ctx + ": CRC mismatch");

  Reader r(bytes.data(), bytes.size() - 4, ctx);
  const uint8_t* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError(ctx + ": bad magic");
  const uint16_t version = r.u16();
  if (version != kVersion) {
    throw DataError(ctx + ": unsupported version " + std::to_string(version));
  }
  const uint32_t blob_len = r.u32();
  const uint8_t* blob = r.take(blob_len);

  Checkpoint c;
  try {
    config_from_json(nlohmann::json::parse(blob, blob + blob_len), c);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ctx + ": bad config blob: " + e.what());
  }
  c.model_cfg.validate();
  c.params = model::make_param_layout<float>(c.model_cfg);
  c.opt.m.clear();
  c.opt.v.clear();
  for (const auto& e : c.params.entries) {
    c.opt.m.emplace_back(e.tensor.shape);
    c.opt.v.emplace_back(e.tensor.shape);
  }

  std::set<std::string> seen;
  while (r.remaining() > 0) {
    TensorEntry e = read_tensor_entry(r, ctx);
    if (!seen.insert(e.name).second) throw DataError(ctx + ": duplicate entry '" + e.name + "'");
    std::string base = e.name;
    core::Tensor* dst = nullptr;
    if (base.rfind("adam.m.", 0) == 0) {
      base = base.substr(7);
      if (c.params.has(base)) dst = &c.opt.m[c.params.index.at(base)];
    } else if (base.rfind("adam.v.", 0) == 0) {
      base = base.substr(7);
      if (c.params.has(base)) dst = &c.opt.v[c.params.index.at(base)];
    } else if (c.params.has(base)) {
      dst = &c.params.at(base);
    }
    if (dst == nullptr) throw DataError(ctx + ": unexpected entry '" + e.name + "'");
    if (dst->shape != e.tensor.shape) {
      throw DataError(ctx + ": entry '" + e.name + "' has shape " +
                      core::shape_str(e.tensor.shape) + ", expected " +
                      core::shape_str(dst->shape));
    }
    *dst = std::move(e.tensor);
  }
  const size_t expected = c.params.entries.size() * 3;
  if (seen.size() != expected) {
    throw DataError(ctx + ": " + std::to_string(seen.size()) + " entries, expected " +
                    std::to_string(expected));
  }
  return c;
}

}  // namespace tubelet::io
