#pragma once

#include <cstdint>

#include "tubelet/core/threading.hpp"

namespace tubelet::core {

// Accumulating matrix kernels. All three keep a fixed per-element summation
// order (ascending k, or the 8-lane partial scheme in dot8), so results are
// bit-identical regardless of thread count. Callers pass zeroed or
// gradient-accumulator output buffers; kernels always add into C.

// Fixed-order vector dot: eight interleaved partial sums, combined in a set
// order. Vectorizes without -ffast-math while staying deterministic.
template <typename S>
inline S dot8(const S* a, const S* b, int64_t n) {
  S lane[8] = {S(0), S(0), S(0), S(0), S(0), S(0), S(0), S(0)};
  int64_t k = 0;
  for (; k + 8 <= n; k += 8) {
    for (int l = 0; l < 8; ++l) lane[l] += a[k + l] * b[k + l];
  }
  S tail = S(0);
  for (; k < n; ++k) tail += a[k] * b[k];
  S s01 = lane[0] + lane[1], s23 = lane[2] + lane[3];
  S s45 = lane[4] + lane[5], s67 = lane[6] + lane[7];
  return ((s01 + s23) + (s45 + s67)) + tail;
}

// C(M,N) += A(M,K) * B(K,N)
template <typename S>
void mm_nn_acc(S* c, const S* a, const S* b, int64_t m, int64_t k, int64_t n) {
  parallel_for(m, 16, [=](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      S* crow = c + i * n;
      const S* arow = a + i * k;
      for (int64_t kk = 0; kk < k; ++kk) {
        const S av = arow[kk];
        const S* brow = b + kk * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// C(M,N) += A(M,K) * B(N,K)^T   (rows of B are the contraction vectors)
template <typename S>
void mm_nt_acc(S* c, const S* a, const S* b, int64_t m, int64_t n, int64_t k) {
  parallel_for(m, 16, [=](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      S* crow = c + i * n;
      const S* arow = a + i * k;
      for (int64_t j = 0; j < n; ++j) crow[j] += dot8(arow, b + j * k, k);
    }
  });
}

// C(K,N) += A(M,K)^T * B(M,N)
template <typename S>
void mm_tn_acc(S* c, const S* a, const S* b, int64_t m, int64_t k, int64_t n) {
  parallel_for(k, 16, [=](int64_t k0, int64_t k1) {
    for (int64_t kk = k0; kk < k1; ++kk) {
      S* crow = c + kk * n;
      for (int64_t i = 0; i < m; ++i) {
        const S av = a[i * k + kk];
        const S* brow = b + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

}  // namespace tubelet::core
