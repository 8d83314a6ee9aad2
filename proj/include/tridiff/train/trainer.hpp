#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/codec/codec.hpp"
#include "tridiff/cond/stack.hpp"
#include "tridiff/core/adam.hpp"
#include "tridiff/data/clip_store.hpp"
#include "tridiff/diffusion/loss.hpp"
#include "tridiff/diffusion/schedule.hpp"
#include "tridiff/model/denoiser.hpp"
#include "tridiff/train/config.hpp"

namespace tridiff {

/// Denoiser + conditioning stack + schedule: everything one checkpoint
/// holds besides the codec.
struct TrainedModel {
    TrainConfig cfg;
    DenoiserNet denoiser;
    ConditioningStack cond;
    NoiseSchedule sched;
    std::vector<std::string> trained_on;  // clip content ids

    static TrainedModel initialize(const TrainConfig& cfg, const Lexicon& lexicon,
                                   int latent_channels) {
        cfg.validate();
        TrainedModel m;
        m.cfg = cfg;
        DenoiserConfig dcfg;
        dcfg.latent_channels = latent_channels;
        dcfg.base_channels = cfg.base_channels;
        dcfg.depth = cfg.depth;
        dcfg.cond_dim = cfg.cond_dim;
        dcfg.time_embed_dim = cfg.time_embed_dim;
        dcfg.temporal_enabled = cfg.temporal_enabled;
        Rng init(cfg.seed);
        m.denoiser = DenoiserNet(dcfg, init.derive(0x0D));
        CondConfig ccfg;
        ccfg.kind = cfg.conditioning;
        ccfg.fusion = cfg.fusion;
        ccfg.token_dim = cfg.token_dim;
        ccfg.cond_dim = cfg.cond_dim;
        ccfg.frame_hidden = cfg.frame_hidden;
        m.cond = ConditioningStack(ccfg, lexicon, init.derive(0x0C));
        m.sched = make_linear_schedule(cfg.timesteps, cfg.beta_start, cfg.beta_end);
        return m;
    }

    void collect_params(std::vector<Param*>& out) {
        denoiser.collect(out);
        cond.collect_all(out);
    }

    void save(const std::string& path, const Lexicon& lexicon) {
        nlohmann::json meta;
        meta["kind"] = "model";
        meta["train_config"] = cfg.to_json();
        meta["latent_channels"] = denoiser.config().latent_channels;
        meta["lexicon"] = lexicon.to_json();
        meta["trained_on"] = trained_on;
        std::vector<Param*> ps;
        collect_params(ps);
        ckpt::save(path, meta, std::vector<const Param*>(ps.begin(), ps.end()));
    }

    static TrainedModel load(const std::string& path) {
        nlohmann::json meta = ckpt::peek_meta(path);
        if (meta.value("kind", "") != "model")
            throw std::runtime_error(path + " is not a model checkpoint");
        const TrainConfig cfg = TrainConfig::from_json(meta["train_config"]);
        const Lexicon lexicon = Lexicon::from_json(meta["lexicon"]);
        TrainedModel m = initialize(cfg, lexicon, meta["latent_channels"]);
        std::vector<Param*> ps;
        m.collect_params(ps);
        ckpt::load(path, ps);
        m.trained_on = meta["trained_on"].get<std::vector<std::string>>();
        return m;
    }
};

/// Text-encoder checkpoint (pretrain-text output).
inline void save_text_encoder(const std::string& path, TextEncoder& enc, std::uint64_t seed) {
    nlohmann::json meta;
    meta["kind"] = "text_encoder";
    meta["dim"] = enc.dim();
    meta["lexicon"] = enc.lexicon().to_json();
    meta["seed"] = seed;
    std::vector<Param*> ps;
    enc.collect(ps);
    ckpt::save(path, meta, std::vector<const Param*>(ps.begin(), ps.end()));
}

inline TextEncoder load_text_encoder(const std::string& path) {
    nlohmann::json meta = ckpt::peek_meta(path);
    if (meta.value("kind", "") != "text_encoder")
        throw std::runtime_error(path + " is not a text-encoder checkpoint");
    TextEncoder enc(meta["dim"], Lexicon::from_json(meta["lexicon"]), Rng(0));
    std::vector<Param*> ps;
    enc.collect(ps);
    ckpt::load(path, ps);
    return enc;
}

struct TrainHooks {
    std::string checkpoint_path;  // written at the end (and at intervals) when set
    std::string trace_csv_path;   // per-iteration loss trace when set
    std::ostream* progress = nullptr;
    int progress_every = 100;
};

/// Trains a fresh model on the clip store. Each iteration samples a batch,
/// encodes it with the frozen codec, conditions on each clip's common
/// triplet and first frame, and takes one Adam step on the denoising
/// objective. Deterministic given (config, data, codec): batch order, noise
/// draws and initialization all derive from cfg.seed.
inline TrainedModel train(const TrainConfig& cfg, const ClipStore& data, VideoCodec& codec,
                          const Lexicon& lexicon, TextEncoder* pretrained_text = nullptr,
                          std::vector<double>* loss_trace_out = nullptr,
                          const TrainHooks& hooks = {}) {
    cfg.validate();
    if (data.clips.empty()) throw std::invalid_argument("train: empty clip store");

    TrainedModel model =
        TrainedModel::initialize(cfg, lexicon, codec.config().latent_channels);
    model.trained_on = data.ids;

    const bool uses_text = cfg.conditioning == ConditioningKind::text ||
                           cfg.conditioning == ConditioningKind::text_finetuned;
    if (uses_text && pretrained_text) {
        // adopt the pretrained weights (names match one-to-one)
        std::vector<Param*> src, dst;
        pretrained_text->collect(src);
        model.cond.text_encoder().collect(dst);
        if (src.size() != dst.size())
            throw std::invalid_argument("pretrained text encoder is incompatible");
        for (size_t i = 0; i < src.size(); ++i) {
            if (src[i]->value.shape() != dst[i]->value.shape())
                throw std::invalid_argument("pretrained text encoder width mismatch");
            dst[i]->value = src[i]->value;
        }
    }

    // codec is frozen during diffusion training; encode everything once
    std::vector<Tensor> latents, frame0;
    latents.reserve(data.clips.size());
    frame0.reserve(data.clips.size());
    for (const auto& clip : data.clips) {
        latents.push_back(codec.encode_video(clip.frames));
        frame0.push_back(video_frame(clip.frames, 0));
    }

    std::vector<Param*> trainable;
    model.denoiser.collect(trainable);
    model.cond.collect_trainable(trainable);
    Adam opt(trainable, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, 1e-8,
             cfg.grad_clip_norm);

    std::ofstream trace_csv;
    if (!hooks.trace_csv_path.empty()) {
        trace_csv.open(hooks.trace_csv_path, std::ios::trunc);
        if (!trace_csv) throw std::runtime_error("cannot write " + hooks.trace_csv_path);
        trace_csv << "iter,loss\n";
        trace_csv.precision(12);
    }

    Rng rng(cfg.seed);
    Rng batch_rng = rng.derive(0xBA);
    Rng loss_rng = rng.derive(0x10);
    DenoiseFn model_fn = [&model](Tape& tape, Var z_t, int t, Var c) {
        return model.denoiser.forward(tape, z_t, t, c);
    };

    if (loss_trace_out) loss_trace_out->clear();
    for (int it = 0; it < cfg.iterations; ++it) {
        Tape tape;
        Var total{};
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto ci = static_cast<size_t>(
                batch_rng.uniform_int(0, static_cast<int>(data.clips.size()) - 1));
            Var cond = model.cond.cond(tape, data.clips[ci].common_triplet, frame0[ci]);
            Var term = training_loss_on_tape(tape, latents[ci], cond, model_fn, model.sched,
                                             loss_rng);
            total = total.valid() ? tape.add(total, term) : term;
        }
        total = tape.scale(total, 1.0 / cfg.batch_size);
        const double loss = tape.value(total)[0];
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged at iteration " + std::to_string(it) +
                                     " (loss not finite)");
        if (loss_trace_out) loss_trace_out->push_back(loss);
        if (trace_csv.is_open()) trace_csv << it << "," << loss << "\n";
        if (hooks.progress && hooks.progress_every > 0 && it % hooks.progress_every == 0)
            *hooks.progress << "iter " << it << " loss " << loss << "\n";

        tape.backward(total);
        opt.step(opt.grads_from(tape));

        if (!hooks.checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
            (it + 1) % cfg.checkpoint_interval == 0 && it + 1 < cfg.iterations)
            model.save(hooks.checkpoint_path, lexicon);
    }

    if (!hooks.checkpoint_path.empty()) model.save(hooks.checkpoint_path, lexicon);
    return model;
}

}  // namespace tridiff
