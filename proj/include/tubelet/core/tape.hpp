#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "tubelet/core/matmul.hpp"
#include "tubelet/core/tensor.hpp"
#include "tubelet/core/threading.hpp"

namespace tubelet::core {

// Reverse-mode gradient tape. Operations append nodes in execution order;
// backward() replays them in exact reverse order. A tape is built for one
// forward pass, differentiated once, then discarded.
//
// Reductions and normalization statistics accumulate in double regardless of
// the value type S; every accumulation runs in a fixed order so results are
// bit-identical for any thread count.
template <typename S>
class TapeT {
 public:
  using Id = int32_t;

  // ---- leaves ----

  Id input(TensorT<S> v) { return push(std::move(v), false, nullptr); }

  Id param(TensorT<S> v) { return push(std::move(v), true, nullptr); }

  const TensorT<S>& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }

  // Gradient of the last backward() target w.r.t. node `id`. A parameter the
  // loss never touched reports exact zeros.
  const TensorT<S>& grad(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = TensorT<S>(n.value.shape);
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  Id add(Id a, Id b) {
    require_same_shape(value(a), value(b), "add");
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] + bv[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }

  Id sub(Id a, Id b) {
    require_same_shape(value(a), value(b), "sub");
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] - bv[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }

  Id mul(Id a, Id b) {
    require_same_shape(value(a), value(b), "mul");
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * bv[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      const auto& bv = t.value(b).data;
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }

  Id div(Id a, Id b) {
    require_same_shape(value(a), value(b), "div");
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const auto& bv = value(b).data;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] / bv[i];
    return push(std::move(out), needs(a) || needs(b), [a, b](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      const auto& yv = t.value(self).data;
      const auto& bv = t.value(b).data;
      if (t.needs(a)) {
        auto& ga = t.grad_buf(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
      }
      if (t.needs(b)) {
        auto& gb = t.grad_buf(b);
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * yv[i] / bv[i];
      }
    });
  }

  Id scale(Id a, double s) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const S sv = static_cast<S>(s);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] * sv;
    return push(std::move(out), needs(a), [a, sv](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
    });
  }

  Id add_scalar(Id a, double c) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const S cv = static_cast<S>(c);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = av[i] + cv;
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  // Subgradient: passes through strictly inside [lo, hi], zero outside.
  Id clamp(Id a, double lo, double hi) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    const S l = static_cast<S>(lo), h = static_cast<S>(hi);
    for (size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] = av[i] < l ? l : (av[i] > h ? h : av[i]);
    }
    return push(std::move(out), needs(a), [a, l, h](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) {
        if (av[i] >= l && av[i] <= h) ga[i] += g[i];
      }
    });
  }

  Id sqrt_ew(Id a) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::sqrt(av[i]);
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      const auto& yv = t.value(self).data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) {
        // sqrt'(0) taken as 0 to keep zero-norm spectra out of the gradients
        if (yv[i] > S(0)) ga[i] += g[i] * S(0.5) / yv[i];
      }
    });
  }

  // arccos of the input clamped to [-1, 1]; gradient is zero at and beyond
  // the clamp boundary, which keeps collinear spectra finite.
  Id acos_clamped(Id a) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    for (size_t i = 0; i < out.data.size(); ++i) {
      double c = std::min(1.0, std::max(-1.0, static_cast<double>(av[i])));
      out.data[i] = static_cast<S>(std::acos(c));
    }
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) {
        const double v = static_cast<double>(av[i]);
        if (v > -1.0 && v < 1.0) {
          ga[i] += static_cast<S>(-static_cast<double>(g[i]) / std::sqrt(1.0 - v * v));
        }
      }
    });
  }

  // Exact Gaussian-error-function GELU: x * Phi(x).
  Id gelu(Id a) {
    TensorT<S> out(value(a).shape);
    const auto& av = value(a).data;
    for (size_t i = 0; i < out.data.size(); ++i) {
      const double x = static_cast<double>(av[i]);
      out.data[i] = static_cast<S>(x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2)));
    }
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      const auto& av = t.value(a).data;
      auto& ga = t.grad_buf(a);
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (size_t i = 0; i < g.size(); ++i) {
        const double x = static_cast<double>(av[i]);
        const double phi_cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        const double phi_pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        ga[i] += static_cast<S>(static_cast<double>(g[i]) * (phi_cdf + x * phi_pdf));
      }
    });
  }

  // (T,C,H,W) * (T,H,W), the mask repeated across C. The only broadcast the
  // toolkit needs.
  Id mul_mask(Id x, Id m) {
    const auto& xv = value(x);
    const auto& mv = value(m);
    if (xv.rank() != 4 || mv.rank() != 3 || xv.shape[0] != mv.shape[0] ||
        xv.shape[2] != mv.shape[1] || xv.shape[3] != mv.shape[2]) {
      throw ShapeError("mul_mask: expected (T,C,H,W)x(T,H,W), got " + shape_str(xv.shape) +
                       " x " + shape_str(mv.shape));
    }
    const int64_t T = xv.shape[0], C = xv.shape[1], HW = xv.shape[2] * xv.shape[3];
    TensorT<S> out(xv.shape);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t c = 0; c < C; ++c) {
        const S* xs = xv.data.data() + (t * C + c) * HW;
        const S* ms = mv.data.data() + t * HW;
        S* os = out.data.data() + (t * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) os[i] = xs[i] * ms[i];
      }
    return push(std::move(out), needs(x) || needs(m), [x, m, T, C, HW](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      const auto& xv = t.value(x).data;
      const auto& mv = t.value(m).data;
      if (t.needs(x)) {
        auto& gx = t.grad_buf(x);
        for (int64_t tt = 0; tt < T; ++tt)
          for (int64_t c = 0; c < C; ++c) {
            const int64_t base = (tt * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) gx[base + i] += g[base + i] * mv[tt * HW + i];
          }
      }
      if (t.needs(m)) {
        auto& gm = t.grad_buf(m);
        for (int64_t tt = 0; tt < T; ++tt)
          for (int64_t c = 0; c < C; ++c) {
            const int64_t base = (tt * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) gm[tt * HW + i] += g[base + i] * xv[base + i];
          }
      }
    });
  }

  // ---- linear algebra ----

  Id matmul(Id a, Id b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) {
      throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape) + " x " +
                       shape_str(bv.shape));
    }
    const int64_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
    TensorT<S> out({m, n});
    mm_nn_acc(out.data.data(), av.data.data(), bv.data.data(), m, k, n);
    return push(std::move(out), needs(a) || needs(b), [a, b, m, k, n](TapeT& t, Id self) {
      const S* g = t.node(self).grad.data.data();
      if (t.needs(a)) {
        mm_nt_acc(t.grad_buf(a).data(), g, t.value(b).data.data(), m, k, n);
      }
      if (t.needs(b)) {
        mm_tn_acc(t.grad_buf(b).data(), t.value(a).data.data(), g, m, k, n);
      }
    });
  }

  // y = x * W^T + bias, W stored (out_features, in_features).
  Id linear(Id x, Id w, Id b) {
    const auto& xv = value(x);
    const auto& wv = value(w);
    const auto& bv = value(b);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[1] || bv.rank() != 1 ||
        bv.shape[0] != wv.shape[0]) {
      throw ShapeError("linear: incompatible shapes x" + shape_str(xv.shape) + " w" +
                       shape_str(wv.shape) + " b" + shape_str(bv.shape));
    }
    const int64_t rows = xv.shape[0], in = xv.shape[1], out_f = wv.shape[0];
    TensorT<S> out({rows, out_f});
    mm_nt_acc(out.data.data(), xv.data.data(), wv.data.data(), rows, out_f, in);
    for (int64_t i = 0; i < rows; ++i) {
      S* orow = out.data.data() + i * out_f;
      for (int64_t j = 0; j < out_f; ++j) orow[j] += bv.data[static_cast<size_t>(j)];
    }
    return push(std::move(out), needs(x) || needs(w) || needs(b),
                [x, w, b, rows, in, out_f](TapeT& t, Id self) {
                  const S* g = t.node(self).grad.data.data();
                  if (t.needs(x)) {
                    mm_nn_acc(t.grad_buf(x).data(), g, t.value(w).data.data(), rows, out_f, in);
                  }
                  if (t.needs(w)) {
                    mm_tn_acc(t.grad_buf(w).data(), g, t.value(x).data.data(), rows, out_f, in);
                  }
                  if (t.needs(b)) {
                    auto& gb = t.grad_buf(b);
                    for (int64_t j = 0; j < out_f; ++j) {
                      double acc = 0.0;
                      for (int64_t i = 0; i < rows; ++i) acc += static_cast<double>(g[i * out_f + j]);
                      gb[static_cast<size_t>(j)] += static_cast<S>(acc);
                    }
                  }
                });
  }

  // Non-overlapping 3D convolution: stride must equal the kernel extents, so
  // every input element lands in exactly one output position per channel.
  // x (C_in,T,H,W), kernel (C_out,C_in,kt,ks,ks), bias (C_out).
  Id conv3d(Id x, Id kernel, Id bias, int64_t stride_t, int64_t stride_s) {
    const auto& xv = value(x);
    const auto& kv = value(kernel);
    const auto& bv = value(bias);
    if (xv.rank() != 4 || kv.rank() != 5) {
      throw ShapeError("conv3d: expected x rank 4 and kernel rank 5, got " + shape_str(xv.shape) +
                       " and " + shape_str(kv.shape));
    }
    const int64_t cin = xv.shape[0], T = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
    const int64_t cout = kv.shape[0], kt = kv.shape[2], ks = kv.shape[3];
    if (kv.shape[1] != cin || kv.shape[4] != ks) {
      throw ShapeError("conv3d: kernel " + shape_str(kv.shape) + " does not match input " +
                       shape_str(xv.shape));
    }
    if (stride_t != kt || stride_s != ks) {
      throw ConfigError("conv3d: stride must equal kernel extents (non-overlapping tubelets)");
    }
    if (bv.rank() != 1 || bv.shape[0] != cout) {
      throw ShapeError("conv3d: bias " + shape_str(bv.shape) + " must be (" +
                       std::to_string(cout) + ")");
    }
    if (T % kt != 0 || H % ks != 0 || W % ks != 0) {
      throw ConfigError("conv3d: extents " + shape_str(xv.shape) + " not divisible by kernel (" +
                        std::to_string(kt) + "," + std::to_string(ks) + "," + std::to_string(ks) +
                        ")");
    }
    const int64_t To = T / kt, Ho = H / ks, Wo = W / ks;
    TensorT<S> out({cout, To, Ho, Wo});
    const S* xp = xv.data.data();
    const S* kp = kv.data.data();
    const S* bp = bv.data.data();
    S* op = out.data.data();
    parallel_for(cout, 1, [=](int64_t oc0, int64_t oc1) {
      for (int64_t oc = oc0; oc < oc1; ++oc) {
        for (int64_t tp = 0; tp < To; ++tp)
          for (int64_t rp = 0; rp < Ho; ++rp)
            for (int64_t cp = 0; cp < Wo; ++cp) {
              S acc = bp[oc];
              for (int64_t ci = 0; ci < cin; ++ci)
                for (int64_t tt = 0; tt < kt; ++tt)
                  for (int64_t i = 0; i < ks; ++i) {
                    const S* xrow = xp + ((ci * T + tp * kt + tt) * H + rp * ks + i) * W + cp * ks;
                    const S* krow = kp + (((oc * cin + ci) * kt + tt) * ks + i) * ks;
                    for (int64_t j = 0; j < ks; ++j) acc += krow[j] * xrow[j];
                  }
              op[((oc * To + tp) * Ho + rp) * Wo + cp] = acc;
            }
      }
    });
    return push(std::move(out), needs(x) || needs(kernel) || needs(bias),
                [x, kernel, bias, cin, T, H, W, cout, kt, ks, To, Ho, Wo](TapeT& t, Id self) {
                  const S* g = t.node(self).grad.data.data();
                  const S* xp = t.value(x).data.data();
                  const S* kp = t.value(kernel).data.data();
                  if (t.needs(x)) {
                    S* gx = t.grad_buf(x).data();
                    parallel_for(cin, 1, [=](int64_t ci0, int64_t ci1) {
                      for (int64_t ci = ci0; ci < ci1; ++ci) {
                        for (int64_t tt0 = 0; tt0 < T; ++tt0)
                          for (int64_t h = 0; h < H; ++h)
                            for (int64_t w = 0; w < W; ++w) {
                              const int64_t tp = tt0 / kt, tt = tt0 % kt;
                              const int64_t rp = h / ks, i = h % ks;
                              const int64_t cp = w / ks, j = w % ks;
                              S acc = S(0);
                              for (int64_t oc = 0; oc < cout; ++oc) {
                                acc += g[((oc * To + tp) * Ho + rp) * Wo + cp] *
                                       kp[(((oc * cin + ci) * kt + tt) * ks + i) * ks + j];
                              }
                              gx[((ci * T + tt0) * H + h) * W + w] += acc;
                            }
                      }
                    });
                  }
                  if (t.needs(kernel)) {
                    S* gk = t.grad_buf(kernel).data();
                    parallel_for(cout, 1, [=](int64_t oc0, int64_t oc1) {
                      for (int64_t oc = oc0; oc < oc1; ++oc) {
                        for (int64_t ci = 0; ci < cin; ++ci)
                          for (int64_t tt = 0; tt < kt; ++tt)
                            for (int64_t i = 0; i < ks; ++i)
                              for (int64_t j = 0; j < ks; ++j) {
                                S acc = S(0);
                                for (int64_t tp = 0; tp < To; ++tp)
                                  for (int64_t rp = 0; rp < Ho; ++rp)
                                    for (int64_t cp = 0; cp < Wo; ++cp) {
                                      acc += g[((oc * To + tp) * Ho + rp) * Wo + cp] *
                                             xp[((ci * T + tp * kt + tt) * H + rp * ks + i) * W +
                                                cp * ks + j];
                                    }
                                gk[(((oc * cin + ci) * kt + tt) * ks + i) * ks + j] += acc;
                              }
                      }
                    });
                  }
                  if (t.needs(bias)) {
                    auto& gb = t.grad_buf(bias);
                    const int64_t per = To * Ho * Wo;
                    for (int64_t oc = 0; oc < cout; ++oc) {
                      double acc = 0.0;
                      for (int64_t i = 0; i < per; ++i) acc += static_cast<double>(g[oc * per + i]);
                      gb[static_cast<size_t>(oc)] += static_cast<S>(acc);
                    }
                  }
                });
  }

  // ---- shape ----

  Id reshape(Id a, Shape new_shape) {
    const auto& av = value(a);
    if (shape_numel(new_shape) != av.numel()) {
      throw ShapeError("reshape: cannot view " + shape_str(av.shape) + " as " +
                       shape_str(new_shape));
    }
    TensorT<S> out(std::move(new_shape), av.data);
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }

  Id permute(Id a, std::vector<int> perm) {
    const auto& av = value(a);
    const int r = av.rank();
    if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: rank mismatch");
    Shape oshape(static_cast<size_t>(r));
    for (int k = 0; k < r; ++k) oshape[static_cast<size_t>(k)] = av.shape[static_cast<size_t>(perm[static_cast<size_t>(k)])];
    TensorT<S> out(oshape);
    // src strides arranged in output-axis order
    std::vector<int64_t> in_strides(static_cast<size_t>(r), 1);
    for (int k = r - 2; k >= 0; --k) {
      in_strides[static_cast<size_t>(k)] =
          in_strides[static_cast<size_t>(k + 1)] * av.shape[static_cast<size_t>(k + 1)];
    }
    std::vector<int64_t> src_stride(static_cast<size_t>(r));
    for (int k = 0; k < r; ++k) src_stride[static_cast<size_t>(k)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(k)])];
    const int64_t n = av.numel();
    std::vector<int64_t> idx(static_cast<size_t>(r), 0);
    int64_t src = 0;
    for (int64_t flat = 0; flat < n; ++flat) {
      out.data[static_cast<size_t>(flat)] = av.data[static_cast<size_t>(src)];
      for (int k = r - 1; k >= 0; --k) {
        src += src_stride[static_cast<size_t>(k)];
        if (++idx[static_cast<size_t>(k)] < oshape[static_cast<size_t>(k)]) break;
        src -= src_stride[static_cast<size_t>(k)] * oshape[static_cast<size_t>(k)];
        idx[static_cast<size_t>(k)] = 0;
      }
    }
    return push(std::move(out), needs(a), [a, oshape, src_stride, r](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      std::vector<int64_t> idx(static_cast<size_t>(r), 0);
      int64_t src = 0;
      const int64_t n = static_cast<int64_t>(g.size());
      for (int64_t flat = 0; flat < n; ++flat) {
        ga[static_cast<size_t>(src)] += g[static_cast<size_t>(flat)];
        for (int k = r - 1; k >= 0; --k) {
          src += src_stride[static_cast<size_t>(k)];
          if (++idx[static_cast<size_t>(k)] < oshape[static_cast<size_t>(k)]) break;
          src -= src_stride[static_cast<size_t>(k)] * oshape[static_cast<size_t>(k)];
          idx[static_cast<size_t>(k)] = 0;
        }
      }
    });
  }

  Id slice_cols(Id a, int64_t start, int64_t len) {
    const auto& av = value(a);
    if (av.rank() != 2 || start < 0 || start + len > av.shape[1]) {
      throw ShapeError("slice_cols: invalid slice [" + std::to_string(start) + "," +
                       std::to_string(start + len) + ") of " + shape_str(av.shape));
    }
    const int64_t rows = av.shape[0], cols = av.shape[1];
    TensorT<S> out({rows, len});
    for (int64_t i = 0; i < rows; ++i) {
      const S* src = av.data.data() + i * cols + start;
      S* dst = out.data.data() + i * len;
      for (int64_t j = 0; j < len; ++j) dst[j] = src[j];
    }
    return push(std::move(out), needs(a), [a, start, len, rows, cols](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      for (int64_t i = 0; i < rows; ++i) {
        S* dst = ga.data() + i * cols + start;
        const S* src = g.data() + i * len;
        for (int64_t j = 0; j < len; ++j) dst[j] += src[j];
      }
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int64_t rows = value(parts[0]).shape[0];
    int64_t total = 0;
    bool any = false;
    for (Id p : parts) {
      const auto& pv = value(p);
      if (pv.rank() != 2 || pv.shape[0] != rows) {
        throw ShapeError("concat_cols: row mismatch at " + shape_str(pv.shape));
      }
      total += pv.shape[1];
      any = any || needs(p);
    }
    TensorT<S> out({rows, total});
    int64_t off = 0;
    for (Id p : parts) {
      const auto& pv = value(p);
      const int64_t w = pv.shape[1];
      for (int64_t i = 0; i < rows; ++i) {
        const S* src = pv.data.data() + i * w;
        S* dst = out.data.data() + i * total + off;
        for (int64_t j = 0; j < w; ++j) dst[j] = src[j];
      }
      off += w;
    }
    std::vector<Id> ps = parts;
    return push(std::move(out), any, [ps, rows, total](TapeT& t, Id self) {
      const auto& g = t.node(self).grad.data;
      int64_t off = 0;
      for (Id p : ps) {
        const int64_t w = t.value(p).shape[1];
        if (t.needs(p)) {
          auto& gp = t.grad_buf(p);
          for (int64_t i = 0; i < rows; ++i) {
            S* dst = gp.data() + i * w;
            const S* src = g.data() + i * total + off;
            for (int64_t j = 0; j < w; ++j) dst[j] += src[j];
          }
        }
        off += w;
      }
    });
  }

  // Scatters per-token patch vectors into the (C,T,H,W) image grid. Token p
  // anchored at (tp, row, col) owns the block t in [tp*t_span, (tp+1)*t_span),
  // spatial [row*ks, ...) x [col*ks, ...); vector layout is (ch, dt, i, j).
  // The anchors tile the output exactly, each pixel written once.
  Id scatter_patches(Id tok, const std::vector<std::array<int64_t, 3>>& anchors, int64_t C,
                     int64_t t_span, int64_t ks, int64_t T, int64_t H, int64_t W) {
    const auto& tv = value(tok);
    const int64_t L = C * t_span * ks * ks;
    if (tv.rank() != 2 || tv.shape[0] != static_cast<int64_t>(anchors.size()) ||
        tv.shape[1] != L) {
      throw ShapeError("scatter_patches: tokens " + shape_str(tv.shape) + " need shape (" +
                       std::to_string(anchors.size()) + "," + std::to_string(L) + ")");
    }
    TensorT<S> out({C, T, H, W});
    auto anch = std::make_shared<std::vector<std::array<int64_t, 3>>>(anchors);
    const S* tp = tv.data.data();
    S* op = out.data.data();
    for (size_t p = 0; p < anchors.size(); ++p) {
      const auto [at, ar, ac] = anchors[p];
      const S* vec = tp + static_cast<int64_t>(p) * L;
      for (int64_t ch = 0; ch < C; ++ch)
        for (int64_t dt = 0; dt < t_span; ++dt)
          for (int64_t i = 0; i < ks; ++i) {
            S* orow = op + ((ch * T + at * t_span + dt) * H + ar * ks + i) * W + ac * ks;
            const S* vrow = vec + ((ch * t_span + dt) * ks + i) * ks;
            for (int64_t j = 0; j < ks; ++j) orow[j] = vrow[j];
          }
    }
    return push(std::move(out), needs(tok), [tok, anch, C, t_span, ks, T, H, W, L](TapeT& t, Id self) {
      if (!t.needs(tok)) return;
      const auto& g = t.node(self).grad.data;
      auto& gt = t.grad_buf(tok);
      const S* gp = g.data();
      for (size_t p = 0; p < anch->size(); ++p) {
        const auto [at, ar, ac] = (*anch)[p];
        S* vec = gt.data() + static_cast<int64_t>(p) * L;
        for (int64_t ch = 0; ch < C; ++ch)
          for (int64_t dt = 0; dt < t_span; ++dt)
            for (int64_t i = 0; i < ks; ++i) {
              const S* grow = gp + ((ch * T + at * t_span + dt) * H + ar * ks + i) * W + ac * ks;
              S* vrow = vec + ((ch * t_span + dt) * ks + i) * ks;
              for (int64_t j = 0; j < ks; ++j) vrow[j] += grow[j];
            }
      }
    });
  }

  // ---- normalization / attention ----

  Id softmax(Id a, int axis) {
    const auto& av = value(a);
    const int r = av.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("softmax: bad axis");
    const int64_t d = av.shape[static_cast<size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int k = 0; k < axis; ++k) outer *= av.shape[static_cast<size_t>(k)];
    for (int k = axis + 1; k < r; ++k) inner *= av.shape[static_cast<size_t>(k)];
    TensorT<S> out(av.shape);
    const S* xp = av.data.data();
    S* yp = out.data.data();
    parallel_for(outer, 8, [=](int64_t o0, int64_t o1) {
      for (int64_t o = o0; o < o1; ++o)
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * d * inner + in;
          double mx = -1e300;
          for (int64_t j = 0; j < d; ++j) mx = std::max(mx, static_cast<double>(xp[base + j * inner]));
          double sum = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            const double e = std::exp(static_cast<double>(xp[base + j * inner]) - mx);
            yp[base + j * inner] = static_cast<S>(e);
            sum += e;
          }
          const double inv = 1.0 / sum;
          for (int64_t j = 0; j < d; ++j) {
            yp[base + j * inner] = static_cast<S>(static_cast<double>(yp[base + j * inner]) * inv);
          }
        }
    });
    return push(std::move(out), needs(a), [a, d, outer, inner](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      const auto& y = t.value(self).data;
      auto& ga = t.grad_buf(a);
      const S* gp = g.data();
      const S* yp = y.data();
      S* gap = ga.data();
      parallel_for(outer, 8, [=](int64_t o0, int64_t o1) {
        for (int64_t o = o0; o < o1; ++o)
          for (int64_t in = 0; in < inner; ++in) {
            const int64_t base = o * d * inner + in;
            double dot = 0.0;
            for (int64_t j = 0; j < d; ++j) {
              dot += static_cast<double>(gp[base + j * inner]) * static_cast<double>(yp[base + j * inner]);
            }
            for (int64_t j = 0; j < d; ++j) {
              const int64_t ix = base + j * inner;
              gap[ix] += static_cast<S>(static_cast<double>(yp[ix]) *
                                        (static_cast<double>(gp[ix]) - dot));
            }
          }
      });
    });
  }

  // Per-vector normalization over the last axis, then affine (gain, shift).
  Id layer_norm(Id x, Id gain, Id shift, double eps = 1e-5) {
    const auto& xv = value(x);
    const int64_t d = xv.shape.back();
    const auto& gv = value(gain);
    const auto& sv = value(shift);
    if (gv.rank() != 1 || gv.shape[0] != d || sv.rank() != 1 || sv.shape[0] != d) {
      throw ShapeError("layer_norm: gain/shift must be (" + std::to_string(d) + ")");
    }
    const int64_t rows = xv.numel() / d;
    TensorT<S> out(xv.shape);
    auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * 2));
    const S* xp = xv.data.data();
    const S* gp0 = gv.data.data();
    const S* sp = sv.data.data();
    S* yp = out.data.data();
    double* st = stats->data();
    for (int64_t i = 0; i < rows; ++i) {
      const S* row = xp + i * d;
      double mean = 0.0;
      for (int64_t j = 0; j < d; ++j) mean += static_cast<double>(row[j]);
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        const double dv = static_cast<double>(row[j]) - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(d);
      const double rstd = 1.0 / std::sqrt(var + eps);
      st[i * 2] = mean;
      st[i * 2 + 1] = rstd;
      S* yrow = yp + i * d;
      for (int64_t j = 0; j < d; ++j) {
        const double xhat = (static_cast<double>(row[j]) - mean) * rstd;
        yrow[j] = static_cast<S>(xhat * static_cast<double>(gp0[j]) + static_cast<double>(sp[j]));
      }
    }
    return push(std::move(out), needs(x) || needs(gain) || needs(shift),
                [x, gain, shift, rows, d, stats](TapeT& t, Id self) {
                  const auto& g = t.node(self).grad.data;
                  const S* xp = t.value(x).data.data();
                  const S* gp0 = t.value(gain).data.data();
                  const double* st = stats->data();
                  if (t.needs(x)) {
                    auto& gx = t.grad_buf(x);
                    for (int64_t i = 0; i < rows; ++i) {
                      const double mean = st[i * 2], rstd = st[i * 2 + 1];
                      const S* xrow = xp + i * d;
                      const S* grow = g.data() + i * d;
                      double sum1 = 0.0, sum2 = 0.0;
                      for (int64_t j = 0; j < d; ++j) {
                        const double xhat = (static_cast<double>(xrow[j]) - mean) * rstd;
                        const double dxhat = static_cast<double>(grow[j]) * static_cast<double>(gp0[j]);
                        sum1 += dxhat;
                        sum2 += dxhat * xhat;
                      }
                      S* gxrow = gx.data() + i * d;
                      const double inv_d = 1.0 / static_cast<double>(d);
                      for (int64_t j = 0; j < d; ++j) {
                        const double xhat = (static_cast<double>(xrow[j]) - mean) * rstd;
                        const double dxhat = static_cast<double>(grow[j]) * static_cast<double>(gp0[j]);
                        gxrow[j] += static_cast<S>(rstd * (dxhat - sum1 * inv_d - xhat * sum2 * inv_d));
                      }
                    }
                  }
                  if (t.needs(gain)) {
                    auto& gg = t.grad_buf(gain);
                    for (int64_t j = 0; j < d; ++j) {
                      double acc = 0.0;
                      for (int64_t i = 0; i < rows; ++i) {
                        const double xhat = (static_cast<double>(xp[i * d + j]) - st[i * 2]) * st[i * 2 + 1];
                        acc += static_cast<double>(g[static_cast<size_t>(i * d + j)]) * xhat;
                      }
                      gg[static_cast<size_t>(j)] += static_cast<S>(acc);
                    }
                  }
                  if (t.needs(shift)) {
                    auto& gs = t.grad_buf(shift);
                    for (int64_t j = 0; j < d; ++j) {
                      double acc = 0.0;
                      for (int64_t i = 0; i < rows; ++i) {
                        acc += static_cast<double>(g[static_cast<size_t>(i * d + j)]);
                      }
                      gs[static_cast<size_t>(j)] += static_cast<S>(acc);
                    }
                  }
                });
  }

  // Half-pixel-center bilinear rescale of the last two axes, edge-clamped.
  // Scale 1.0 is the identity (bitwise). Supported scales: 1.0, 0.5, 0.25.
  Id bilinear_resize(Id x, double s) {
    const auto& xv = value(x);
    if (xv.rank() < 2) throw ShapeError("bilinear_resize: rank must be >= 2");
    const bool supported = std::abs(s - 1.0) < 1e-12 || std::abs(s - 0.5) < 1e-12 ||
                           std::abs(s - 0.25) < 1e-12;
    if (!supported) throw ConfigError("bilinear_resize: unsupported scale " + std::to_string(s));
    if (std::abs(s - 1.0) < 1e-12) {
      TensorT<S> out = xv;
      return push(std::move(out), needs(x), [x](TapeT& t, Id self) {
        if (!t.needs(x)) return;
        const auto& g = t.node(self).grad.data;
        auto& gx = t.grad_buf(x);
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
    }
    const int r = xv.rank();
    const int64_t H = xv.shape[static_cast<size_t>(r - 2)], W = xv.shape[static_cast<size_t>(r - 1)];
    const int64_t Ho = static_cast<int64_t>(std::ceil(s * static_cast<double>(H) - 1e-9));
    const int64_t Wo = static_cast<int64_t>(std::ceil(s * static_cast<double>(W) - 1e-9));
    const int64_t batch = xv.numel() / (H * W);
    struct Tap {
      int64_t lo, hi;
      double f;
    };
    auto make_taps = [s](int64_t n_out, int64_t n_in) {
      std::vector<Tap> taps(static_cast<size_t>(n_out));
      for (int64_t i = 0; i < n_out; ++i) {
        double src = (static_cast<double>(i) + 0.5) / s - 0.5;
        src = std::min(static_cast<double>(n_in - 1), std::max(0.0, src));
        const int64_t lo = static_cast<int64_t>(std::floor(src));
        taps[static_cast<size_t>(i)] = {lo, std::min(lo + 1, n_in - 1), src - static_cast<double>(lo)};
      }
      return taps;
    };
    auto row_taps = std::make_shared<std::vector<Tap>>(make_taps(Ho, H));
    auto col_taps = std::make_shared<std::vector<Tap>>(make_taps(Wo, W));
    Shape oshape = xv.shape;
    oshape[static_cast<size_t>(r - 2)] = Ho;
    oshape[static_cast<size_t>(r - 1)] = Wo;
    TensorT<S> out(oshape);
    const S* xp = xv.data.data();
    S* yp = out.data.data();
    for (int64_t b = 0; b < batch; ++b) {
      const S* plane = xp + b * H * W;
      S* oplane = yp + b * Ho * Wo;
      for (int64_t i = 0; i < Ho; ++i) {
        const Tap& ti = (*row_taps)[static_cast<size_t>(i)];
        for (int64_t j = 0; j < Wo; ++j) {
          const Tap& tj = (*col_taps)[static_cast<size_t>(j)];
          const double v00 = static_cast<double>(plane[ti.lo * W + tj.lo]);
          const double v01 = static_cast<double>(plane[ti.lo * W + tj.hi]);
          const double v10 = static_cast<double>(plane[ti.hi * W + tj.lo]);
          const double v11 = static_cast<double>(plane[ti.hi * W + tj.hi]);
          oplane[i * Wo + j] = static_cast<S>((1.0 - ti.f) * ((1.0 - tj.f) * v00 + tj.f * v01) +
                                              ti.f * ((1.0 - tj.f) * v10 + tj.f * v11));
        }
      }
    }
    return push(std::move(out), needs(x),
                [x, H, W, Ho, Wo, batch, row_taps, col_taps](TapeT& t, Id self) {
                  if (!t.needs(x)) return;
                  const auto& g = t.node(self).grad.data;
                  auto& gx = t.grad_buf(x);
                  for (int64_t b = 0; b < batch; ++b) {
                    S* gplane = gx.data() + b * H * W;
                    const S* goplane = g.data() + b * Ho * Wo;
                    for (int64_t i = 0; i < Ho; ++i) {
                      const auto& ti = (*row_taps)[static_cast<size_t>(i)];
                      for (int64_t j = 0; j < Wo; ++j) {
                        const auto& tj = (*col_taps)[static_cast<size_t>(j)];
                        const double gv = static_cast<double>(goplane[i * Wo + j]);
                        gplane[ti.lo * W + tj.lo] += static_cast<S>(gv * (1.0 - ti.f) * (1.0 - tj.f));
                        gplane[ti.lo * W + tj.hi] += static_cast<S>(gv * (1.0 - ti.f) * tj.f);
                        gplane[ti.hi * W + tj.lo] += static_cast<S>(gv * ti.f * (1.0 - tj.f));
                        gplane[ti.hi * W + tj.hi] += static_cast<S>(gv * ti.f * tj.f);
                      }
                    }
                  }
                });
  }

  // ---- reductions ----

  Id sum_all(Id a) {
    const auto& av = value(a);
    double acc = 0.0;
    for (S v : av.data) acc += static_cast<double>(v);
    TensorT<S> out({1});
    out.data[0] = static_cast<S>(acc);
    return push(std::move(out), needs(a), [a](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const S g = t.node(self).grad.data[0];
      auto& ga = t.grad_buf(a);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }

  Id mean_all(Id a) {
    const int64_t n = value(a).numel();
    return scale(sum_all(a), 1.0 / static_cast<double>(n));
  }

  Id sum_axis(Id a, int axis) {
    const auto& av = value(a);
    const int r = av.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("sum_axis: bad axis");
    const int64_t d = av.shape[static_cast<size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int k = 0; k < axis; ++k) outer *= av.shape[static_cast<size_t>(k)];
    for (int k = axis + 1; k < r; ++k) inner *= av.shape[static_cast<size_t>(k)];
    Shape oshape;
    for (int k = 0; k < r; ++k) {
      if (k != axis) oshape.push_back(av.shape[static_cast<size_t>(k)]);
    }
    if (oshape.empty()) oshape.push_back(1);
    TensorT<S> out(oshape);
    const S* xp = av.data.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t in = 0; in < inner; ++in) {
        double acc = 0.0;
        for (int64_t j = 0; j < d; ++j) acc += static_cast<double>(xp[(o * d + j) * inner + in]);
        out.data[static_cast<size_t>(o * inner + in)] = static_cast<S>(acc);
      }
    return push(std::move(out), needs(a), [a, d, outer, inner](TapeT& t, Id self) {
      if (!t.needs(a)) return;
      const auto& g = t.node(self).grad.data;
      auto& ga = t.grad_buf(a);
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < d; ++j)
          for (int64_t in = 0; in < inner; ++in) {
            ga[static_cast<size_t>((o * d + j) * inner + in)] += g[static_cast<size_t>(o * inner + in)];
          }
    });
  }

  // ---- driver ----

  void backward(Id loss) {
    Node& ln = nodes_[static_cast<size_t>(loss)];
    if (ln.value.numel() != 1) {
      throw ShapeError("backward: target must be scalar, got " + shape_str(ln.value.shape));
    }
    grad_buf(loss)[0] = S(1);
    for (int32_t i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.backfn && n.needs_grad && !n.grad.data.empty()) {
        n.backfn(*this, i);
      }
    }
  }

  bool needs(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

 private:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;
    bool needs_grad = false;
    std::function<void(TapeT&, Id)> backfn;
  };

  Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }

  std::vector<S>& grad_buf(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = TensorT<S>(n.value.shape);
    return n.grad.data;
  }

  Id push(TensorT<S> value, bool needs_grad, std::function<void(TapeT&, Id)> backfn) {
    nodes_.push_back(Node{std::move(value), {}, needs_grad, std::move(backfn)});
    return static_cast<Id>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace tubelet::core
