#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubelet/core/rng.hpp"
#include "tubelet/core/tensor.hpp"
#include "tubelet/model/config.hpp"

namespace tubelet::model {

// All learnable tensors, each with a stable dotted name used by checkpoint
// I/O and the optimizer. Creation order is fixed and part of the contract.
template <typename S>
struct ModelParamsT {
  struct Entry {
    std::string name;
    core::TensorT<S> tensor;
  };

  std::vector<Entry> entries;
  std::unordered_map<std::string, size_t> index;

  core::TensorT<S>& add(const std::string& name, core::Shape shape) {
    index.emplace(name, entries.size());
    entries.push_back({name, core::TensorT<S>(std::move(shape))});
    return entries.back().tensor;
  }

  core::TensorT<S>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries[it->second].tensor;
  }

  const core::TensorT<S>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries[it->second].tensor;
  }

  bool has(const std::string& name) const { return index.count(name) != 0; }

  int64_t total_count() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.tensor.numel();
    return n;
  }
};

using ModelParams = ModelParamsT<float>;

// Declares every tensor of the architecture (zero-filled) in the canonical
// order: embedding, positional table, encoder blocks, decoder head.
template <typename S>
ModelParamsT<S> make_param_layout(const ModelConfig& cfg) {
  cfg.validate();
  ModelParamsT<S> p;
  p.add("tubelet.kernel", {cfg.d_e, cfg.c_total(), cfg.t, cfg.k_s, cfg.k_s});
  p.add("tubelet.bias", {cfg.d_e});
  p.add("embed.weight", {cfg.d_e, cfg.d_e});
  p.add("embed.bias", {cfg.d_e});
  p.add("pos.table", {cfg.n_tokens(), cfg.d_e});
  for (int64_t l = 0; l < cfg.depth; ++l) {
    const std::string b = "enc." + std::to_string(l) + ".";
    p.add(b + "ln1.gain", {cfg.d_e});
    p.add(b + "ln1.shift", {cfg.d_e});
    for (const char* proj : {"q", "k", "v", "out"}) {
      p.add(b + "attn." + proj + ".weight", {cfg.d_e, cfg.d_e});
      p.add(b + "attn." + proj + ".bias", {cfg.d_e});
    }
    p.add(b + "ln2.gain", {cfg.d_e});
    p.add(b + "ln2.shift", {cfg.d_e});
    p.add(b + "ffn.fc1.weight", {cfg.ff_dim, cfg.d_e});
    p.add(b + "ffn.fc1.bias", {cfg.ff_dim});
    p.add(b + "ffn.fc2.weight", {cfg.d_e, cfg.ff_dim});
    p.add(b + "ffn.fc2.bias", {cfg.d_e});
  }
  p.add("dec.norm.gain", {cfg.d_e});
  p.add("dec.norm.shift", {cfg.d_e});
  p.add("dec.linear.weight", {cfg.patch_values(), cfg.d_e});
  p.add("dec.linear.bias", {cfg.patch_values()});
  return p;
}

// Closed-form parameter count, kept separate from the layout so tests can
// audit one against the other.
inline int64_t expected_param_count(const ModelConfig& cfg) {
  const int64_t d = cfg.d_e;
  int64_t n = 0;
  n += d * cfg.c_total() * cfg.t * cfg.k_s * cfg.k_s + d;  // tubelet conv
  n += d * d + d;                                          // embed linear
  n += cfg.n_tokens() * d;                                 // positional table
  int64_t per_layer = 0;
  per_layer += 2 * d;                // ln1
  per_layer += 4 * (d * d + d);      // q,k,v,out
  per_layer += 2 * d;                // ln2
  per_layer += cfg.ff_dim * d + cfg.ff_dim + d * cfg.ff_dim + d;
  n += cfg.depth * per_layer;
  n += 2 * d;                                       // decoder norm
  n += cfg.patch_values() * d + cfg.patch_values();  // decoder linear
  return n;
}

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases, unit
// layer-norm gains, normal(0, 0.02) positional table. Fully determined by
// the seed; draws happen in canonical entry order.
template <typename S>
ModelParamsT<S> init_params(const ModelConfig& cfg, uint64_t seed) {
  ModelParamsT<S> p = make_param_layout<S>(cfg);
  core::Rng rng(core::derive_seed(seed, 0x70617261 /* "para" */, 0));
  for (auto& e : p.entries) {
    auto& t = e.tensor;
    const bool is_bias = e.name.ends_with(".bias") || e.name.ends_with(".shift");
    const bool is_gain = e.name.ends_with(".gain");
    if (is_bias) {
      continue;  // zero-filled already
    }
    if (is_gain) {
      std::fill(t.data.begin(), t.data.end(), S(1));
      continue;
    }
    if (e.name == "pos.table") {
      for (auto& v : t.data) v = static_cast<S>(rng.normal(0.0, 0.02));
      continue;
    }
    // weights: fan_in = product of all extents except the leading output one
    int64_t fan_in = 1;
    for (size_t k = 1; k < t.shape.size(); ++k) fan_in *= t.shape[k];
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<S>(rng.uniform(-a, a));
  }
  return p;
}

template <typename To, typename From>
ModelParamsT<To> params_cast(const ModelParamsT<From>& in) {
  ModelParamsT<To> out;
  for (const auto& e : in.entries) {
    out.index.emplace(e.name, out.entries.size());
    out.entries.push_back({e.name, core::tensor_cast<To>(e.tensor)});
  }
  return out;
}

}  // namespace tubelet::model
