#pragma once

#include <cmath>
#include <stdexcept>

#include "tridiff/core/tensor.hpp"

namespace tridiff {

constexpr double kPsnrCapDb = 100.0;

/// Peak signal-to-noise ratio in dB over any pair of equal-shaped tensors.
/// Zero MSE (and anything above the cap) reports the cap so aggregate
/// reports stay finite.
inline double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0,
                   double cap_db = kPsnrCapDb) {
    a.require_same_shape(b, "psnr");
    const double err = mse(a, b);
    if (err <= 0.0) return cap_db;
    return std::min(cap_db, 10.0 * std::log10(max_val * max_val / err));
}

namespace detail {
inline Tensor to_luma(const Tensor& frame) {
    if (frame.rank() == 2) return frame;
    if (frame.rank() != 3 || frame.dim(0) != 3)
        throw std::invalid_argument("ssim expects (3,H,W) or (H,W) frames");
    const int h = frame.dim(1), w = frame.dim(2);
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    Tensor luma(Shape{h, w});
    for (std::int64_t i = 0; i < hw; ++i)
        luma[i] = 0.299 * frame[i] + 0.587 * frame[hw + i] + 0.114 * frame[2 * hw + i];
    return luma;
}
}  // namespace detail

/// Structural similarity over luma, averaged across non-overlapping
/// window x window tiles (partial edge tiles are ignored). Degenerate
/// zero-variance tiles resolve to ratio 1 through the stabilizing constants.
inline double ssim(const Tensor& frame_a, const Tensor& frame_b, int window = 8,
                   double k1 = 0.01, double k2 = 0.03) {
    Tensor a = detail::to_luma(frame_a);
    Tensor b = detail::to_luma(frame_b);
    a.require_same_shape(b, "ssim");
    const int h = a.dim(0), w = a.dim(1);
    if (window < 1 || h < window || w < window)
        throw std::invalid_argument("ssim: frame smaller than window");
    constexpr double L = 1.0;
    const double c1 = (k1 * L) * (k1 * L);
    const double c2 = (k2 * L) * (k2 * L);

    double acc = 0.0;
    int tiles = 0;
    const double n = static_cast<double>(window) * window;
    for (int ti = 0; ti + window <= h; ti += window)
        for (int tj = 0; tj + window <= w; tj += window) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = ti; i < ti + window; ++i)
                for (int j = tj; j < tj + window; ++j) {
                    const double va = a[static_cast<std::int64_t>(i) * w + j];
                    const double vb = b[static_cast<std::int64_t>(i) * w + j];
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            const double mu_a = sa / n, mu_b = sb / n;
            const double var_a = saa / n - mu_a * mu_a;
            const double var_b = sbb / n - mu_b * mu_b;
            const double cov = sab / n - mu_a * mu_b;
            acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++tiles;
        }
    return acc / tiles;
}

/// Mean frame SSIM over a (K,3,H,W) video pair.
inline double ssim_video(const Tensor& a, const Tensor& b, int window = 8) {
    a.require_same_shape(b, "ssim_video");
    if (a.rank() != 4) throw std::invalid_argument("ssim_video expects (K,3,H,W)");
    const int k = a.dim(0);
    const std::int64_t fs = a.size() / k;
    double acc = 0.0;
    for (int f = 0; f < k; ++f) {
        Tensor fa(Shape{3, a.dim(2), a.dim(3)}), fb(fa.shape());
        for (std::int64_t i = 0; i < fs; ++i) {
            fa[i] = a[f * fs + i];
            fb[i] = b[f * fs + i];
        }
        acc += ssim(fa, fb, window);
    }
    return acc / k;
}

}  // namespace tridiff
