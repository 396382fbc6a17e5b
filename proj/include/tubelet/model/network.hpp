#pragma once

#include <array>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubelet/core/tape.hpp"
#include "tubelet/core/tensor.hpp"
#include "tubelet/model/config.hpp"
#include "tubelet/model/params.hpp"

namespace tubelet::model {

// Parameter tensors registered on a tape, looked up by dotted name.
template <typename S>
struct TapeParams {
  using Id = typename core::TapeT<S>::Id;
  std::unordered_map<std::string, Id> ids;

  Id operator()(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw ConfigError("parameter '" + name + "' not registered on tape");
    return it->second;
  }
};

template <typename S>
TapeParams<S> register_params(core::TapeT<S>& tape, const ModelParamsT<S>& params,
                              bool trainable = true) {
  TapeParams<S> out;
  for (const auto& e : params.entries) {
    out.ids.emplace(e.name, trainable ? tape.param(e.tensor) : tape.input(e.tensor));
  }
  return out;
}

struct TokenAnchor {
  int64_t tp, row, col;
};

// Tubelet tokens (N_tokens, d_e) on the tape plus their tiling anchors,
// enumerated row-major in (t', row, col).
template <typename S>
struct TokenGridT {
  typename core::TapeT<S>::Id tokens;
  std::vector<TokenAnchor> anchors;
};

inline std::vector<TokenAnchor> enumerate_anchors(const ModelConfig& cfg) {
  std::vector<TokenAnchor> anchors;
  anchors.reserve(static_cast<size_t>(cfg.n_tokens()));
  for (int64_t tp = 0; tp < cfg.tokens_t(); ++tp)
    for (int64_t r = 0; r < cfg.tokens_h(); ++r)
      for (int64_t c = 0; c < cfg.tokens_w(); ++c) anchors.push_back({tp, r, c});
  return anchors;
}

// Channel concatenation [MSI | SAR | mask] in (C_total, T, H, W) layout,
// ready for the 3D convolution. The clouded MSI arrives already masked; SAR
// is copied through untouched (it is never masked anywhere). The mask enters
// as one extra channel when configured, disambiguating zeroed cloud pixels
// from genuinely dark ones.
template <typename S>
core::TensorT<S> assemble_input(const core::TensorT<S>& msi_clouded, const core::TensorT<S>* sar,
                                const core::TensorT<S>& mask, const ModelConfig& cfg) {
  cfg.validate();
  const int64_t T = cfg.T, H = cfg.H, W = cfg.W, HW = H * W;
  if (msi_clouded.rank() != 4 || msi_clouded.shape[0] != T || msi_clouded.shape[1] != cfg.C_msi ||
      msi_clouded.shape[2] != H || msi_clouded.shape[3] != W) {
    throw ConfigError("assemble_input: msi shape " + core::shape_str(msi_clouded.shape) +
                      " does not match config (" + std::to_string(T) + "," +
                      std::to_string(cfg.C_msi) + "," + std::to_string(H) + "," +
                      std::to_string(W) + ")");
  }
  if (cfg.C_sar > 0) {
    if (sar == nullptr) throw ConfigError("assemble_input: fusion variant requires SAR input");
    if (sar->rank() != 4 || sar->shape[0] != T || sar->shape[1] != cfg.C_sar ||
        sar->shape[2] != H || sar->shape[3] != W) {
      throw ConfigError("assemble_input: sar shape " + core::shape_str(sar->shape) +
                        " does not match config");
    }
  } else if (sar != nullptr) {
    throw ConfigError("assemble_input: SAR provided to an MSI-only variant");
  }
  if (mask.rank() != 3 || mask.shape[0] != T || mask.shape[1] != H || mask.shape[2] != W) {
    throw ConfigError("assemble_input: mask shape " + core::shape_str(mask.shape) +
                      " does not match config");
  }

  core::TensorT<S> out({cfg.c_total(), T, H, W});
  for (int64_t c = 0; c < cfg.C_msi; ++c)
    for (int64_t t = 0; t < T; ++t)
      std::copy_n(msi_clouded.data.data() + (t * cfg.C_msi + c) * HW, HW,
                  out.data.data() + (c * T + t) * HW);
  if (cfg.C_sar > 0) {
    for (int64_t c = 0; c < cfg.C_sar; ++c)
      for (int64_t t = 0; t < T; ++t)
        std::copy_n(sar->data.data() + (t * cfg.C_sar + c) * HW, HW,
                    out.data.data() + ((cfg.C_msi + c) * T + t) * HW);
  }
  if (cfg.use_mask_channel) {
    const int64_t c = cfg.C_msi + cfg.C_sar;
    for (int64_t t = 0; t < T; ++t)
      std::copy_n(mask.data.data() + t * HW, HW, out.data.data() + (c * T + t) * HW);
  }
  return out;
}

// 3D convolution over non-overlapping tubelets, flattened row-major in
// (t', row, col), then the linear embedding and the learned positional row.
template <typename S>
TokenGridT<S> tubelet_embed(core::TapeT<S>& tape, typename core::TapeT<S>::Id x,
                            const TapeParams<S>& p, const ModelConfig& cfg) {
  auto conv = tape.conv3d(x, p("tubelet.kernel"), p("tubelet.bias"), cfg.t, cfg.k_s);
  // (d_e, T', H', W') -> (T', H', W', d_e) -> (N, d_e)
  auto moved = tape.permute(conv, {1, 2, 3, 0});
  auto flat = tape.reshape(moved, {cfg.n_tokens(), cfg.d_e});
  auto projected = tape.linear(flat, p("embed.weight"), p("embed.bias"));
  auto tokens = tape.add(projected, p("pos.table"));
  return {tokens, enumerate_anchors(cfg)};
}

// Pre-norm encoder stack: x += MHSA(LN(x)); x += FFN(LN(x)). Joint attention
// over all tokens, no masking. Per-head scaled dot-product with 1/sqrt(d_k).
// When `attn_capture` is given it receives the softmax node of every
// (layer, head) pair in order.
template <typename S>
TokenGridT<S> encoder_forward(core::TapeT<S>& tape, const TokenGridT<S>& grid,
                              const TapeParams<S>& p, const ModelConfig& cfg,
                              std::vector<typename core::TapeT<S>::Id>* attn_capture = nullptr) {
  using Id = typename core::TapeT<S>::Id;
  const int64_t dk = cfg.d_head();
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Id x = grid.tokens;
  for (int64_t l = 0; l < cfg.depth; ++l) {
    const std::string b = "enc." + std::to_string(l) + ".";
    Id h = tape.layer_norm(x, p(b + "ln1.gain"), p(b + "ln1.shift"));
    Id q = tape.linear(h, p(b + "attn.q.weight"), p(b + "attn.q.bias"));
    Id k = tape.linear(h, p(b + "attn.k.weight"), p(b + "attn.k.bias"));
    Id v = tape.linear(h, p(b + "attn.v.weight"), p(b + "attn.v.bias"));
    std::vector<Id> head_outs;
    head_outs.reserve(static_cast<size_t>(cfg.heads));
    for (int64_t hd = 0; hd < cfg.heads; ++hd) {
      Id qi = tape.slice_cols(q, hd * dk, dk);
      Id ki = tape.slice_cols(k, hd * dk, dk);
      Id vi = tape.slice_cols(v, hd * dk, dk);
      Id scores = tape.scale(tape.matmul(qi, tape.permute(ki, {1, 0})), att_scale);
      Id attn = tape.softmax(scores, 1);
      if (attn_capture) attn_capture->push_back(attn);
      head_outs.push_back(tape.matmul(attn, vi));
    }
    Id merged = tape.concat_cols(head_outs);
    Id proj = tape.linear(merged, p(b + "attn.out.weight"), p(b + "attn.out.bias"));
    x = tape.add(x, proj);
    Id h2 = tape.layer_norm(x, p(b + "ln2.gain"), p(b + "ln2.shift"));
    Id f1 = tape.gelu(tape.linear(h2, p(b + "ffn.fc1.weight"), p(b + "ffn.fc1.bias")));
    Id f2 = tape.linear(f1, p(b + "ffn.fc2.weight"), p(b + "ffn.fc2.bias"));
    x = tape.add(x, f2);
  }
  return {x, grid.anchors};
}

// Layer-norm, linear projection to one (t x k_s x k_s x C_msi) patch per
// token, scattered back into the (C_msi, T, H, W) grid.
template <typename S>
typename core::TapeT<S>::Id decode_patches(core::TapeT<S>& tape, const TokenGridT<S>& grid,
                                           const TapeParams<S>& p, const ModelConfig& cfg) {
  auto h = tape.layer_norm(grid.tokens, p("dec.norm.gain"), p("dec.norm.shift"));
  auto patches = tape.linear(h, p("dec.linear.weight"), p("dec.linear.bias"));
  std::vector<std::array<int64_t, 3>> anchors;
  anchors.reserve(grid.anchors.size());
  for (const auto& a : grid.anchors) anchors.push_back({a.tp, a.row, a.col});
  return tape.scatter_patches(patches, anchors, cfg.C_msi, cfg.t, cfg.k_s, cfg.T, cfg.H, cfg.W);
}

// Full pipeline on an already-assembled input tensor. Returns the
// reconstruction as a (C_msi, T, H, W) node.
template <typename S>
typename core::TapeT<S>::Id model_forward(core::TapeT<S>& tape,
                                          typename core::TapeT<S>::Id assembled,
                                          const TapeParams<S>& p, const ModelConfig& cfg) {
  auto grid = tubelet_embed(tape, assembled, p, cfg);
  auto encoded = encoder_forward(tape, grid, p, cfg);
  return decode_patches(tape, encoded, p, cfg);
}

// Inference without gradients: assembles, runs the pipeline, and returns the
// prediction in (T, C_msi, H, W) data layout.
template <typename S>
core::TensorT<S> predict(const ModelParamsT<S>& params, const ModelConfig& cfg,
                         const core::TensorT<S>& msi_clouded, const core::TensorT<S>* sar,
                         const core::TensorT<S>& mask) {
  core::TapeT<S> tape;
  auto p = register_params(tape, params, /*trainable=*/false);
  auto x = tape.input(assemble_input(msi_clouded, sar, mask, cfg));
  auto y = model_forward(tape, x, p, cfg);
  auto tchw = tape.permute(y, {1, 0, 2, 3});
  return tape.value(tchw);
}

}  // namespace tubelet::model
