#pragma once

#include <cmath>
#include <stdexcept>

#include "tridiff/codec/codec.hpp"
#include "tridiff/cond/stack.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tensor.hpp"
#include "tridiff/diffusion/process.hpp"
#include "tridiff/diffusion/schedule.hpp"
#include "tridiff/model/denoiser.hpp"

namespace tridiff {

struct GenerationBundle {
    VideoCodec* codec = nullptr;
    DenoiserNet* denoiser = nullptr;
    ConditioningStack* cond = nullptr;
    int frames = kClipFrames;
};

/// Generates a K-frame video from one conditioning frame and a triplet:
/// the frame is encoded, tiled across all K frame slots, noised to the top
/// of the schedule, and denoised over a strided reverse pass conditioned on
/// the fused (frame, triplet) features at every step. Deterministic for a
/// fixed seed; output is (K,3,H,W) clamped to [0,1].
inline Tensor sample_video(const Tensor& x0_frame, const ActionTriplet& triplet,
                           GenerationBundle& bundle, const NoiseSchedule& sched, int steps,
                           std::uint64_t seed) {
    if (!bundle.codec || !bundle.denoiser || !bundle.cond)
        throw std::invalid_argument("sample_video: incomplete generation bundle");
    if (x0_frame.rank() != 3 || x0_frame.dim(0) != 3)
        throw std::invalid_argument("sample_video expects a (3,H,W) conditioning frame");
    triplet.validate();
    if (steps < 1) throw std::invalid_argument("sample_video: steps must be >= 1");
    if (steps > sched.T)
        throw std::invalid_argument("sample_video: steps exceed the schedule length");

    Rng rng(seed);

    // fused conditioning, computed once and applied at every step
    Tensor cond = bundle.cond->cond_plain(triplet, x0_frame);

    // encode the frame and tile it across the K frame slots
    Tensor single = x0_frame.reshaped(Shape{1, 3, x0_frame.dim(1), x0_frame.dim(2)});
    Tensor lat0 = bundle.codec->encode_video(single);
    const int k = bundle.frames;
    Tensor tiled(Shape{k, lat0.dim(1), lat0.dim(2), lat0.dim(3)});
    const std::int64_t fs = lat0.size();
    for (int f = 0; f < k; ++f)
        for (std::int64_t i = 0; i < fs; ++i) tiled[f * fs + i] = lat0[i];

    const NoiseSchedule sub = make_strided_schedule(sched, steps);
    Tensor z = forward_marginal(tiled, sub.T, Tensor::randn(tiled.shape(), rng), sub);
    for (int i = sub.T; i >= 1; --i) {
        Tensor eps_hat = bundle.denoiser->forward_plain(z, sub.source_step_at(i), cond);
        if (i > 1) {
            Tensor noise = Tensor::randn(z.shape(), rng);
            z = reverse_step(z, i, eps_hat, sub, &noise);
        } else {
            z = reverse_step(z, i, eps_hat, sub, nullptr);
        }
    }
    return bundle.codec->decode_video(z);
}

}  // namespace tridiff
