#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/diffusion/sampler.hpp"
#include "tridiff/metrics/feature_nets.hpp"
#include "tridiff/metrics/frechet.hpp"
#include "tridiff/metrics/quality.hpp"
#include "tridiff/metrics/report.hpp"
#include "tridiff/train/trainer.hpp"

namespace tridiff {

/// Per-clip generations for inspection alongside the aggregate report.
struct EvalOutputs {
    MetricsReport report;
    std::vector<Tensor> generated;  // manifest order
};

/// Aggregation shared by evaluate and its tests: PSNR/SSIM/LPIPS averaged
/// per clip then over clips, plus the set-level Frechet feature distance.
inline MetricsReport aggregate_metrics(const std::vector<Tensor>& real,
                                       const std::vector<Tensor>& generated,
                                       const LpipsFeatureNet& lpips_net,
                                       const VideoFeatureNet& video_net) {
    if (real.empty() || real.size() != generated.size())
        throw std::invalid_argument("aggregate_metrics: clip sets must be non-empty and aligned");
    MetricsReport report;
    for (size_t i = 0; i < real.size(); ++i) {
        report.psnr_db += psnr(generated[i], real[i]);
        report.ssim += ssim_video(generated[i], real[i]);
        report.lpips += lpips_proxy(generated[i], real[i], lpips_net);
    }
    const double n = static_cast<double>(real.size());
    report.psnr_db /= n;
    report.ssim /= n;
    report.lpips /= n;
    report.fvd = fvd(real, generated, video_net);
    report.n_clips = static_cast<int>(real.size());
    return report;
}

/// Generates a video from each test clip's first frame and common triplet,
/// scores it against the clip's ground-truth frames (PSNR/SSIM/LPIPS
/// averaged per clip, then over clips), and computes the set-level Frechet
/// feature distance. Refuses test clips that appear in the model's training
/// manifest.
inline EvalOutputs evaluate(TrainedModel& model, VideoCodec& codec,
                            const ClipStore& test_data, int steps, std::uint64_t seed) {
    if (test_data.clips.empty()) throw std::invalid_argument("evaluate: empty test set");

    std::set<std::string> trained(model.trained_on.begin(), model.trained_on.end());
    for (const auto& id : test_data.ids)
        if (trained.count(id))
            throw std::invalid_argument("evaluate: test clip " + id +
                                        " appears in the training manifest");

    GenerationBundle bundle;
    bundle.codec = &codec;
    bundle.denoiser = &model.denoiser;
    bundle.cond = &model.cond;

    Rng rng(seed);
    EvalOutputs out;
    std::vector<Tensor> real;
    for (size_t i = 0; i < test_data.clips.size(); ++i) {
        const Clip& clip = test_data.clips[i];
        bundle.frames = clip.frame_count();
        Tensor gen = sample_video(video_frame(clip.frames, 0), clip.common_triplet, bundle,
                                  model.sched, steps, rng.derive(i).seed());
        real.push_back(clip.frames);
        out.generated.push_back(std::move(gen));
    }
    out.report = aggregate_metrics(real, out.generated, LpipsFeatureNet(), VideoFeatureNet());
    return out;
}

}  // namespace tridiff
