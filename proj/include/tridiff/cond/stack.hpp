#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tridiff/cond/encoders.hpp"
#include "tridiff/cond/fusion.hpp"
#include "tridiff/cond/triplet.hpp"
#include "tridiff/core/adam.hpp"
#include "tridiff/core/nn.hpp"
#include "tridiff/core/tape.hpp"

namespace tridiff {

enum class ConditioningKind { none, learnable, text, text_finetuned };

inline const char* conditioning_kind_name(ConditioningKind k) {
    switch (k) {
        case ConditioningKind::none: return "none";
        case ConditioningKind::learnable: return "learnable";
        case ConditioningKind::text: return "text";
        case ConditioningKind::text_finetuned: return "text-ft";
    }
    return "?";
}

inline ConditioningKind conditioning_kind_from(const std::string& s) {
    if (s == "none") return ConditioningKind::none;
    if (s == "learnable") return ConditioningKind::learnable;
    if (s == "text") return ConditioningKind::text;
    if (s == "text-ft") return ConditioningKind::text_finetuned;
    throw std::invalid_argument("unknown conditioning kind: " + s);
}

struct CondConfig {
    ConditioningKind kind = ConditioningKind::learnable;
    FusionKind fusion = FusionKind::attn_triplet_query;
    int token_dim = 32;
    int cond_dim = 32;
    int frame_hidden = 16;
};

/// Everything between (triplet, conditioning frame) and the cond vector the
/// denoiser consumes. For kind == none the output is a learned null token
/// and neither the frame nor the triplet is looked at. For kind == text the
/// text encoder participates in the forward pass but its parameters are
/// excluded from the trainable set (frozen); text_finetuned trains them.
class ConditioningStack {
public:
    ConditioningStack() = default;

    ConditioningStack(CondConfig cfg, Lexicon lexicon, Rng init_rng) : cfg_(cfg) {
        if (cfg_.kind == ConditioningKind::none) {
            null_token_ = Param{"cond.null_token",
                                kaiming_normal(Shape{cfg_.cond_dim}, cfg_.cond_dim, init_rng)};
            return;
        }
        if (cfg_.kind == ConditioningKind::learnable)
            embed_ = TripletEmbeddingEncoder(cfg_.token_dim, init_rng.derive(1));
        else
            text_ = TextEncoder(cfg_.token_dim, std::move(lexicon), init_rng.derive(2));
        frame_enc_ = CondFrameEncoder(cfg_.token_dim, cfg_.frame_hidden, init_rng.derive(3));
        fusion_ = FusionModule(cfg_.fusion, cfg_.token_dim, cfg_.cond_dim, init_rng.derive(4));
    }

    const CondConfig& config() const { return cfg_; }
    TextEncoder& text_encoder() { return text_; }
    TripletEmbeddingEncoder& embedding_encoder() { return embed_; }
    FusionModule& fusion() { return fusion_; }
    CondFrameEncoder& frame_encoder() { return frame_enc_; }

    /// frame: (3,H,W) or (1,3,H,W) in [0,1].
    Var cond(Tape& tape, const ActionTriplet& triplet, const Tensor& frame) {
        return cond_with_details(tape, triplet, frame).cond;
    }

    FusionResult cond_with_details(Tape& tape, const ActionTriplet& triplet, const Tensor& frame) {
        if (cfg_.kind == ConditioningKind::none) return {tape.param(null_token_), Var{}};
        Var trip_tokens = cfg_.kind == ConditioningKind::learnable
                              ? embed_.encode(tape, triplet)
                              : text_.encode(tape, triplet);
        Var img_tokens = frame_enc_.encode(tape, tape.constant(frame));
        return fusion_.fuse(tape, img_tokens, trip_tokens);
    }

    Tensor cond_plain(const ActionTriplet& triplet, const Tensor& frame) {
        Tape tape;
        return tape.value(cond(tape, triplet, frame));
    }

    /// Parameters updated by the video objective; excludes the text encoder
    /// unless fine-tuning is requested.
    void collect_trainable(std::vector<Param*>& out) {
        if (cfg_.kind == ConditioningKind::none) {
            out.push_back(&null_token_);
            return;
        }
        if (cfg_.kind == ConditioningKind::learnable) embed_.collect(out);
        if (cfg_.kind == ConditioningKind::text_finetuned) text_.collect(out);
        frame_enc_.collect(out);
        fusion_.collect(out);
    }

    /// Every parameter, frozen or not (checkpointing).
    void collect_all(std::vector<Param*>& out) {
        if (cfg_.kind == ConditioningKind::none) {
            out.push_back(&null_token_);
            return;
        }
        if (cfg_.kind == ConditioningKind::learnable) embed_.collect(out);
        if (cfg_.kind == ConditioningKind::text || cfg_.kind == ConditioningKind::text_finetuned)
            text_.collect(out);
        frame_enc_.collect(out);
        fusion_.collect(out);
    }

private:
    CondConfig cfg_;
    TripletEmbeddingEncoder embed_;
    TextEncoder text_;
    CondFrameEncoder frame_enc_;
    FusionModule fusion_;
    Param null_token_;
};

/// Caption <-> clip contrastive pretraining for the text encoder: pooled
/// caption vectors and projected clip summaries are pushed toward an
/// identity similarity matrix over the batch. The clip-side projection head
/// is scaffolding and is discarded with the call frame. Returns the loss
/// curve.
inline std::vector<double> pretrain_text_encoder(
    TextEncoder& text, const std::vector<std::pair<ActionTriplet, Tensor>>& pairs, int iters,
    double lr, int batch_size, std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("pretrain_text_encoder: no caption/clip pairs");
    Rng rng(seed);

    // Fixed clip summary: per-channel mean, std, and mean |temporal diff|.
    auto summarize = [](const Tensor& clip) {
        const int k = clip.dim(0), h = clip.dim(2), w = clip.dim(3);
        Tensor out(Shape{9});
        const std::int64_t per_ch = static_cast<std::int64_t>(k) * h * w;
        for (int c = 0; c < 3; ++c) {
            double s = 0.0, s2 = 0.0, dsum = 0.0;
            for (int f = 0; f < k; ++f)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const double v = clip.at4(f, c, i, j);
                        s += v;
                        s2 += v * v;
                        if (f > 0) dsum += std::fabs(v - clip.at4(f - 1, c, i, j));
                    }
            const double mean = s / static_cast<double>(per_ch);
            out[c] = mean;
            out[3 + c] = std::sqrt(std::max(0.0, s2 / static_cast<double>(per_ch) - mean * mean));
            out[6 + c] = k > 1 ? dsum / static_cast<double>(per_ch - h * w) : 0.0;
        }
        return out;
    };

    Rng head_rng = rng.derive(1);
    LinearLayer clip_head;
    clip_head.init("text_pretrain.clip_head", 9, text.dim(), head_rng);

    std::vector<Param*> params;
    text.collect(params);
    clip_head.collect(params);
    Adam opt(params, lr);

    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(iters));
    const int bsz = std::min<int>(batch_size, static_cast<int>(pairs.size()));
    for (int it = 0; it < iters; ++it) {
        Tape tape;
        std::vector<Var> text_rows, clip_rows;
        for (int b = 0; b < bsz; ++b) {
            const auto& [triplet, clip] =
                pairs[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pairs.size()) - 1))];
            text_rows.push_back(tape.mean_axis0(text.encode(tape, triplet)));
            clip_rows.push_back(clip_head.forward(tape, tape.constant(summarize(clip))));
        }
        Var sim = tape.matmul(tape.stack_rows(text_rows),
                              tape.permute(tape.stack_rows(clip_rows), {1, 0}));
        Tensor identity(Shape{bsz, bsz});
        for (int i = 0; i < bsz; ++i) identity.at2(i, i) = 1.0;
        Var loss = tape.mse_to(sim, identity);
        const double lv = tape.value(loss)[0];
        if (!std::isfinite(lv))
            throw std::runtime_error("text pretraining diverged at iteration " +
                                     std::to_string(it));
        curve.push_back(lv);
        tape.backward(loss);
        opt.step(opt.grads_from(tape));
    }
    return curve;
}

}  // namespace tridiff
