#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

constexpr std::uint64_t kLpipsNetSeed = 0x10C4'15EEDULL;
constexpr std::uint64_t kVideoFeatNetSeed = 0xF1D'0'5EEDULL;
constexpr int kVideoFeatDim = 64;

namespace detail {
inline Tensor random_conv_weights(int cout, int cin, int k, Rng& rng) {
    return kaiming_normal(Shape{cout, cin, k, k}, cin * k * k, rng);
}

inline Tensor silu_plain(Tensor t) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = t[i] / (1.0 + std::exp(-t[i]));
    return t;
}
}  // namespace detail

/// Frozen random-weight conv tower used as the perceptual feature extractor.
/// Weights are pinned by the seed at construction; the instance is read-only
/// afterwards. Distances computed with it are internally consistent but not
/// comparable to published perceptual-metric magnitudes.
class LpipsFeatureNet {
public:
    explicit LpipsFeatureNet(std::uint64_t seed = kLpipsNetSeed) {
        Rng rng(seed);
        w1_ = detail::random_conv_weights(8, 3, 3, rng);
        w2_ = detail::random_conv_weights(16, 8, 3, rng);
        w3_ = detail::random_conv_weights(16, 16, 3, rng);
    }

    /// Per-layer feature maps for one (3,H,W) frame.
    std::vector<Tensor> features(const Tensor& frame) const {
        if (frame.rank() != 3 || frame.dim(0) != 3)
            throw std::invalid_argument("feature net expects (3,H,W)");
        Tensor x = frame.reshaped(Shape{1, 3, frame.dim(1), frame.dim(2)});
        std::vector<Tensor> out;
        x = detail::silu_plain(Tape::conv2d_forward(x, w1_, nullptr, 2, 1));
        out.push_back(x);
        x = detail::silu_plain(Tape::conv2d_forward(x, w2_, nullptr, 2, 1));
        out.push_back(x);
        x = Tape::conv2d_forward(x, w3_, nullptr, 2, 1);
        out.push_back(x);
        return out;
    }

private:
    Tensor w1_, w2_, w3_;
};

/// Perceptual distance proxy: mean over frames and layers of the squared
/// distance between channel-unit-normalized feature maps.
inline double lpips_proxy(const Tensor& video_a, const Tensor& video_b,
                          const LpipsFeatureNet& net) {
    video_a.require_same_shape(video_b, "lpips_proxy");
    if (video_a.rank() != 4) throw std::invalid_argument("lpips_proxy expects (K,3,H,W)");
    const int k = video_a.dim(0);
    const std::int64_t fs = video_a.size() / k;

    auto normalize = [](Tensor& f) {
        const int c = f.dim(1), h = f.dim(2), w = f.dim(3);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double sq = 0.0;
                for (int ch = 0; ch < c; ++ch) sq += f.at4(0, ch, i, j) * f.at4(0, ch, i, j);
                const double inv = 1.0 / std::sqrt(sq + 1e-10);
                for (int ch = 0; ch < c; ++ch) f.at4(0, ch, i, j) *= inv;
            }
    };

    double acc = 0.0;
    for (int f = 0; f < k; ++f) {
        Tensor fa(Shape{3, video_a.dim(2), video_a.dim(3)}), fb(fa.shape());
        for (std::int64_t i = 0; i < fs; ++i) {
            fa[i] = video_a[f * fs + i];
            fb[i] = video_b[f * fs + i];
        }
        auto la = net.features(fa);
        auto lb = net.features(fb);
        double frame_acc = 0.0;
        for (size_t l = 0; l < la.size(); ++l) {
            normalize(la[l]);
            normalize(lb[l]);
            frame_acc += mse(la[l], lb[l]);
        }
        acc += frame_acc / static_cast<double>(la.size());
    }
    return acc / k;
}

/// Frozen spatio-temporal feature tower mapping a (K,3,H,W) clip to a
/// kVideoFeatDim vector: per-frame conv features, global spatial pooling,
/// a temporal conv over the frame axis, then a random linear head.
class VideoFeatureNet {
public:
    explicit VideoFeatureNet(std::uint64_t seed = kVideoFeatNetSeed, int out_dim = kVideoFeatDim)
        : out_dim_(out_dim) {
        Rng rng(seed);
        w1_ = detail::random_conv_weights(8, 3, 3, rng);
        w2_ = detail::random_conv_weights(16, 8, 3, rng);
        w3_ = detail::random_conv_weights(16, 16, 3, rng);
        wt_ = kaiming_normal(Shape{16, 16, 3}, 16 * 3, rng);  // temporal conv (out,in,k)
        head_ = kaiming_normal(Shape{16, out_dim}, 16, rng);
    }

    int out_dim() const { return out_dim_; }

    Tensor features(const Tensor& clip) const {
        if (clip.rank() != 4 || clip.dim(1) != 3)
            throw std::invalid_argument("video feature net expects (K,3,H,W)");
        const int k = clip.dim(0);
        // per-frame spatial tower -> (K,16)
        Tensor seq(Shape{k, 16});
        for (int f = 0; f < k; ++f) {
            Tensor frame(Shape{1, 3, clip.dim(2), clip.dim(3)});
            const std::int64_t fs = frame.size();
            for (std::int64_t i = 0; i < fs; ++i) frame[i] = clip[f * fs + i];
            Tensor x = detail::silu_plain(Tape::conv2d_forward(frame, w1_, nullptr, 2, 1));
            x = detail::silu_plain(Tape::conv2d_forward(x, w2_, nullptr, 2, 1));
            x = detail::silu_plain(Tape::conv2d_forward(x, w3_, nullptr, 2, 1));
            const int hw = x.dim(2) * x.dim(3);
            for (int c = 0; c < 16; ++c) {
                double s = 0.0;
                for (int i = 0; i < hw; ++i) s += x[static_cast<std::int64_t>(c) * hw + i];
                seq.at2(f, c) = s / hw;
            }
        }
        // temporal conv (kernel 3, zero-padded) + mean over frames
        Tensor pooled(Shape{16});
        for (int co = 0; co < 16; ++co) {
            double mean = 0.0;
            for (int f = 0; f < k; ++f) {
                double acc = 0.0;
                for (int ci = 0; ci < 16; ++ci)
                    for (int dt = -1; dt <= 1; ++dt) {
                        const int ft = f + dt;
                        if (ft < 0 || ft >= k) continue;
                        acc += seq.at2(ft, ci) * wt_[(static_cast<std::int64_t>(co) * 16 + ci) * 3 +
                                                     (dt + 1)];
                    }
                mean += acc / (1.0 + std::exp(-acc));  // silu
            }
            pooled[co] = mean / k;
        }
        // linear head -> out_dim
        Tensor out(Shape{out_dim_});
        for (int j = 0; j < out_dim_; ++j) {
            double acc = 0.0;
            for (int i = 0; i < 16; ++i) acc += pooled[i] * head_.at2(i, j);
            out[j] = acc;
        }
        return out;
    }

private:
    int out_dim_;
    Tensor w1_, w2_, w3_, wt_, head_;
};

}  // namespace tridiff
