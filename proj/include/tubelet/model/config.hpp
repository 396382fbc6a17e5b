#pragma once

#include <cstdint>
#include <string>

#include "tubelet/core/errors.hpp"

namespace tubelet::model {

// The four experiment variants. *-ViT variants aggregate the full sequence
// into one temporal slab (t = T); *-ViViT variants use the constrained
// span t = 2. S* variants additionally consume SAR channels.
enum class Variant { MtsVit, MtsVivit, SmtsVit, SmtsVivit };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::MtsVit: return "MTS-ViT";
    case Variant::MtsVivit: return "MTS-ViViT";
    case Variant::SmtsVit: return "SMTS-ViT";
    case Variant::SmtsVivit: return "SMTS-ViViT";
  }
  return "?";
}

inline const char* variant_key(Variant v) {
  switch (v) {
    case Variant::MtsVit: return "mts-vit";
    case Variant::MtsVivit: return "mts-vivit";
    case Variant::SmtsVit: return "smts-vit";
    case Variant::SmtsVivit: return "smts-vivit";
  }
  return "?";
}

inline Variant variant_from_key(const std::string& key) {
  if (key == "mts-vit") return Variant::MtsVit;
  if (key == "mts-vivit") return Variant::MtsVivit;
  if (key == "smts-vit") return Variant::SmtsVit;
  if (key == "smts-vivit") return Variant::SmtsVivit;
  throw ConfigError("unknown variant '" + key +
                    "' (expected mts-vit|mts-vivit|smts-vit|smts-vivit)");
}

inline bool variant_uses_sar(Variant v) {
  return v == Variant::SmtsVit || v == Variant::SmtsVivit;
}

inline int64_t variant_temporal_span(Variant v, int64_t T) {
  return (v == Variant::MtsVivit || v == Variant::SmtsVivit) ? 2 : T;
}

struct ModelConfig {
  int64_t T = 6;          // sequence length
  int64_t C_msi = 11;     // MSI channels
  int64_t C_sar = 0;      // 2 for fusion variants, 0 otherwise
  bool use_mask_channel = true;
  int64_t t = 2;          // temporal span of one tubelet
  int64_t k_s = 5;        // spatial patch edge
  int64_t d_e = 64;       // embedding dim
  int64_t depth = 6;      // encoder layers
  int64_t heads = 8;
  int64_t ff_dim = 256;
  int64_t H = 60;
  int64_t W = 60;

  int64_t c_total() const { return C_msi + C_sar + (use_mask_channel ? 1 : 0); }
  int64_t d_head() const { return d_e / heads; }
  int64_t tokens_t() const { return T / t; }
  int64_t tokens_h() const { return H / k_s; }
  int64_t tokens_w() const { return W / k_s; }
  int64_t n_tokens() const { return tokens_t() * tokens_h() * tokens_w(); }
  int64_t patch_values() const { return t * k_s * k_s * C_msi; }

  void validate() const {
    if (T <= 0 || C_msi <= 0 || C_sar < 0 || t <= 0 || k_s <= 0 || d_e <= 0 || depth <= 0 ||
        heads <= 0 || ff_dim <= 0 || H <= 0 || W <= 0) {
      throw tubelet::ConfigError("model config: all extents must be positive");
    }
    if (T % t != 0) {
      throw tubelet::ConfigError("model config: T=" + std::to_string(T) +
                                 " not divisible by temporal span t=" + std::to_string(t));
    }
    if (H % k_s != 0 || W % k_s != 0) {
      throw tubelet::ConfigError("model config: H,W=(" + std::to_string(H) + "," +
                                 std::to_string(W) + ") not divisible by patch edge k_s=" +
                                 std::to_string(k_s));
    }
    if (d_e % heads != 0) {
      throw tubelet::ConfigError("model config: d_e=" + std::to_string(d_e) +
                                 " not divisible by heads=" + std::to_string(heads));
    }
  }

  static ModelConfig for_variant(Variant v) {
    ModelConfig c;
    c.C_sar = variant_uses_sar(v) ? 2 : 0;
    c.t = variant_temporal_span(v, c.T);
    return c;
  }
};

}  // namespace tubelet::model
