#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tubelet/core/errors.hpp"

namespace tubelet::core {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

// Dense row-major N-d array. Single precision for training, double for
// gradient checking; the scalar type is a template parameter throughout.
template <typename S>
struct TensorT {
  Shape shape;
  std::vector<S> data;

  TensorT() = default;

  explicit TensorT(Shape s) : shape(std::move(s)) {
    for (int64_t e : shape) {
      if (e <= 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(shape));
    }
    data.assign(static_cast<size_t>(shape_numel(shape)), S(0));
  }

  TensorT(Shape s, std::vector<S> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
  }

  static TensorT full(Shape s, S v) {
    TensorT t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  int64_t extent(int axis) const { return shape[static_cast<size_t>(axis)]; }

  // Row-major flat offset for up to 5 indices.
  int64_t offset(std::initializer_list<int64_t> idx) const {
    int64_t flat = 0;
    size_t k = 0;
    for (int64_t i : idx) {
      flat = flat * shape[k] + i;
      ++k;
    }
    return flat;
  }

  S& at(std::initializer_list<int64_t> idx) { return data[static_cast<size_t>(offset(idx))]; }
  S at(std::initializer_list<int64_t> idx) const { return data[static_cast<size_t>(offset(idx))]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (S v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  TensorT<To> out(t.shape);
  for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
  return out;
}

template <typename S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
}

// ---- plain (non-differentiated) elementwise helpers ----

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape(a, b, "add");
  TensorT<S> out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape(a, b, "sub");
  TensorT<S> out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] - b.data[i];
  return out;
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape(a, b, "mul");
  TensorT<S> out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, double s) {
  TensorT<S> out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<S>(a.data[i] * s);
  return out;
}

template <typename S>
TensorT<S> clamp(const TensorT<S>& a, double lo, double hi) {
  TensorT<S> out(a.shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<S>(std::min(hi, std::max(lo, static_cast<double>(a.data[i]))));
  }
  return out;
}

// The one sanctioned broadcast: (T,C,H,W) times a (T,H,W) field repeated over C.
template <typename S>
TensorT<S> mul_bcast_mask(const TensorT<S>& x, const TensorT<S>& m) {
  if (x.rank() != 4 || m.rank() != 3 || x.shape[0] != m.shape[0] || x.shape[2] != m.shape[1] ||
      x.shape[3] != m.shape[2]) {
    throw ShapeError("mul_bcast_mask: expected (T,C,H,W)x(T,H,W), got " + shape_str(x.shape) +
                     " x " + shape_str(m.shape));
  }
  const int64_t T = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3];
  TensorT<S> out(x.shape);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t c = 0; c < C; ++c) {
      const S* xs = x.data.data() + (t * C + c) * HW;
      const S* ms = m.data.data() + t * HW;
      S* os = out.data.data() + (t * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) os[i] = xs[i] * ms[i];
    }
  }
  return out;
}

}  // namespace tubelet::core
