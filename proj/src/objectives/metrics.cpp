#include "tubelet/objectives/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tubelet::objectives {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_kernel_1d() {
  static const std::vector<double> k = [] {
    std::vector<double> v(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double x = i - (kWindow - 1) / 2.0;
      v[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * kSigma * kSigma));
      sum += v[static_cast<size_t>(i)];
    }
    for (auto& e : v) e /= sum;
    return v;
  }();
  return k;
}

void check_pair(const core::Tensor& pred, const core::Tensor& target) {
  core::require_same_shape(pred, target, "metrics");
  if (pred.rank() != 4) {
    throw ShapeError("metrics: expected (T,C,H,W), got " + core::shape_str(pred.shape));
  }
}

// Separable Gaussian blur of one H x W plane; emits only the valid
// (H-10) x (W-10) grid of window sums.
void gaussian_valid(const float* img, int64_t H, int64_t W, std::vector<double>& tmp,
                    std::vector<double>& out) {
  const auto& k = gaussian_kernel_1d();
  const int64_t Wv = W - kWindow + 1, Hv = H - kWindow + 1;
  tmp.assign(static_cast<size_t>(H * Wv), 0.0);
  for (int64_t i = 0; i < H; ++i)
    for (int64_t j = 0; j < Wv; ++j) {
      double acc = 0.0;
      for (int w = 0; w < kWindow; ++w) acc += k[static_cast<size_t>(w)] * img[i * W + j + w];
      tmp[static_cast<size_t>(i * Wv + j)] = acc;
    }
  out.assign(static_cast<size_t>(Hv * Wv), 0.0);
  for (int64_t i = 0; i < Hv; ++i)
    for (int64_t j = 0; j < Wv; ++j) {
      double acc = 0.0;
      for (int w = 0; w < kWindow; ++w) acc += k[static_cast<size_t>(w)] * tmp[static_cast<size_t>((i + w) * Wv + j)];
      out[static_cast<size_t>(i * Wv + j)] = acc;
    }
}

struct SsimPlanes {
  std::vector<double> mu_x, mu_y, xx, yy, xy;
  int64_t Hv = 0, Wv = 0;
};

// Window statistics for one (t,c) image pair.
SsimPlanes ssim_planes(const float* x, const float* y, int64_t H, int64_t W) {
  SsimPlanes p;
  p.Hv = H - kWindow + 1;
  p.Wv = W - kWindow + 1;
  const size_t n = static_cast<size_t>(H * W);
  std::vector<float> prod(n), sqx(n), sqy(n);
  for (size_t i = 0; i < n; ++i) {
    prod[i] = x[i] * y[i];
    sqx[i] = x[i] * x[i];
    sqy[i] = y[i] * y[i];
  }
  std::vector<double> tmp;
  gaussian_valid(x, H, W, tmp, p.mu_x);
  gaussian_valid(y, H, W, tmp, p.mu_y);
  gaussian_valid(sqx.data(), H, W, tmp, p.xx);
  gaussian_valid(sqy.data(), H, W, tmp, p.yy);
  gaussian_valid(prod.data(), H, W, tmp, p.xy);
  return p;
}

double ssim_at(const SsimPlanes& p, int64_t idx) {
  const double mx = p.mu_x[static_cast<size_t>(idx)];
  const double my = p.mu_y[static_cast<size_t>(idx)];
  const double vx = p.xx[static_cast<size_t>(idx)] - mx * mx;
  const double vy = p.yy[static_cast<size_t>(idx)] - my * my;
  const double cxy = p.xy[static_cast<size_t>(idx)] - mx * my;
  return ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) /
         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

}  // namespace

double mse_metric(const core::Tensor& pred, const core::Tensor& target) {
  check_pair(pred, target);
  double acc = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

double sam_metric(const core::Tensor& pred, const core::Tensor& target, double epsilon) {
  check_pair(pred, target);
  const int64_t T = pred.shape[0], C = pred.shape[1], HW = pred.shape[2] * pred.shape[3];
  double acc = 0.0;
  for (int64_t t = 0; t < T; ++t)
    for (int64_t i = 0; i < HW; ++i) {
      double dot = 0.0, np = 0.0, nt = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double pv = pred.data[static_cast<size_t>((t * C + c) * HW + i)];
        const double tv = target.data[static_cast<size_t>((t * C + c) * HW + i)];
        dot += pv * tv;
        np += pv * pv;
        nt += tv * tv;
      }
      const double cosv =
          std::clamp(dot / (std::sqrt(np) * std::sqrt(nt) + epsilon), -1.0, 1.0);
      acc += std::acos(cosv);
    }
  return acc / static_cast<double>(T * HW);
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const core::Tensor& pred, const core::Tensor& target) {
  check_pair(pred, target);
  const int64_t T = pred.shape[0], C = pred.shape[1], H = pred.shape[2], W = pred.shape[3];
  if (H < kWindow || W < kWindow) {
    throw ConfigError("ssim: image smaller than the 11x11 window");
  }
  double acc = 0.0;
  for (int64_t t = 0; t < T; ++t)
    for (int64_t c = 0; c < C; ++c) {
      const float* x = pred.data.data() + (t * C + c) * H * W;
      const float* y = target.data.data() + (t * C + c) * H * W;
      SsimPlanes p = ssim_planes(x, y, H, W);
      double img_acc = 0.0;
      for (int64_t i = 0; i < p.Hv * p.Wv; ++i) img_acc += ssim_at(p, i);
      acc += img_acc / static_cast<double>(p.Hv * p.Wv);
    }
  return acc / static_cast<double>(T * C);
}

MetricsValues evaluate_all(const core::Tensor& pred, const core::Tensor& target,
                           const core::Tensor& mask) {
  check_pair(pred, target);
  const int64_t T = pred.shape[0], C = pred.shape[1], H = pred.shape[2], W = pred.shape[3];
  const int64_t HW = H * W;
  if (mask.rank() != 3 || mask.shape[0] != T || mask.shape[1] != H || mask.shape[2] != W) {
    throw ShapeError("evaluate_all: mask shape " + core::shape_str(mask.shape) +
                     " does not match images");
  }

  MetricsValues m;
  m.mse = mse_metric(pred, target);
  m.sam = sam_metric(pred, target);
  m.psnr = psnr_from_mse(m.mse);
  m.ssim = ssim_metric(pred, target);

  // cloud-only diagnostics over mask = 1
  double se = 0.0, ang = 0.0;
  int64_t n_px = 0;
  for (int64_t t = 0; t < T; ++t)
    for (int64_t i = 0; i < HW; ++i) {
      if (mask.data[static_cast<size_t>(t * HW + i)] < 0.5f) continue;
      ++n_px;
      double dot = 0.0, np = 0.0, nt = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        const double pv = pred.data[static_cast<size_t>((t * C + c) * HW + i)];
        const double tv = target.data[static_cast<size_t>((t * C + c) * HW + i)];
        const double d = pv - tv;
        se += d * d;
        dot += pv * tv;
        np += pv * pv;
        nt += tv * tv;
      }
      ang += std::acos(std::clamp(dot / (std::sqrt(np) * std::sqrt(nt) + 1e-8), -1.0, 1.0));
    }
  if (n_px == 0) {
    m.masked_mse = 0.0;
    m.masked_sam = 0.0;
    m.masked_psnr = 100.0;
    m.masked_ssim = 1.0;
    return m;
  }
  m.masked_mse = se / static_cast<double>(n_px * C);
  m.masked_sam = ang / static_cast<double>(n_px);
  m.masked_psnr = psnr_from_mse(m.masked_mse);

  // SSIM restricted to windows whose center pixel is masked
  if (H >= kWindow && W >= kWindow) {
    const int64_t r = kWindow / 2;
    double acc = 0.0;
    int64_t n_win = 0;
    for (int64_t t = 0; t < T; ++t) {
      const float* mrow = mask.data.data() + t * HW;
      for (int64_t c = 0; c < C; ++c) {
        const float* x = pred.data.data() + (t * C + c) * HW;
        const float* y = target.data.data() + (t * C + c) * HW;
        SsimPlanes p = ssim_planes(x, y, H, W);
        for (int64_t i = 0; i < p.Hv; ++i)
          for (int64_t j = 0; j < p.Wv; ++j) {
            if (mrow[(i + r) * W + (j + r)] < 0.5f) continue;
            acc += ssim_at(p, i * p.Wv + j);
            ++n_win;
          }
      }
    }
    m.masked_ssim = n_win > 0 ? acc / static_cast<double>(n_win) : 1.0;
  } else {
    m.masked_ssim = 1.0;
  }
  return m;
}

}  // namespace tubelet::objectives
