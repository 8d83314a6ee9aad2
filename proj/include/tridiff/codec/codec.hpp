#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tridiff/core/adam.hpp"
#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/serialize.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

struct CodecConfig {
    int f = 4;                 // spatial downsample factor, one of {1,2,4}
    int latent_channels = 4;
    int hidden = 32;
    bool identity_mode = false;  // exact encode/decode inverse; requires f=1

    void validate() const {
        if (f != 1 && f != 2 && f != 4)
            throw std::invalid_argument("codec downsample factor must be 1, 2 or 4");
        if (identity_mode && f != 1)
            throw std::invalid_argument("identity_mode requires f=1");
        if (identity_mode && latent_channels < 3)
            throw std::invalid_argument("identity_mode requires latent_channels >= 3");
        if (latent_channels < 1 || hidden < 1)
            throw std::invalid_argument("codec channel counts must be positive");
    }
};

/// Per-frame convolutional autoencoder defining the latent space the
/// diffusion model runs in. Frames are processed independently (the K axis
/// is the conv batch axis), so encode/decode commute with frame order.
///
/// After pretraining, `latent_scale` normalizes encoder outputs to roughly
/// unit standard deviation; encode divides by it, decode multiplies back.
class VideoCodec {
public:
    VideoCodec() = default;

    VideoCodec(CodecConfig cfg, Rng init_rng) : cfg_(cfg) {
        cfg_.validate();
        if (cfg_.identity_mode) return;
        const int stages = cfg_.f == 4 ? 2 : (cfg_.f == 2 ? 1 : 0);
        enc_in_.init("codec.enc_in", 3, cfg_.hidden, 3, 1, 1, init_rng);
        for (int s = 0; s < stages; ++s) {
            Conv2dLayer down;
            down.init("codec.enc_down" + std::to_string(s), cfg_.hidden, cfg_.hidden, 3, 2, 1,
                      init_rng);
            enc_down_.push_back(down);
        }
        enc_out_.init("codec.enc_out", cfg_.hidden, cfg_.latent_channels, 3, 1, 1, init_rng);
        dec_in_.init("codec.dec_in", cfg_.latent_channels, cfg_.hidden, 3, 1, 1, init_rng);
        for (int s = 0; s < stages; ++s) {
            Conv2dLayer up, refine;
            up.init("codec.dec_up" + std::to_string(s), cfg_.hidden, cfg_.hidden, 3, 1, 1, init_rng);
            refine.init("codec.dec_refine" + std::to_string(s), cfg_.hidden, cfg_.hidden, 3, 1, 1,
                        init_rng);
            dec_up_.push_back(up);
            dec_refine_.push_back(refine);
        }
        dec_out_.init("codec.dec_out", cfg_.hidden, 3, 3, 1, 1, init_rng);
    }

    const CodecConfig& config() const { return cfg_; }
    double latent_scale() const { return latent_scale_; }
    void set_latent_scale(double s) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("latent scale must be positive and finite");
        latent_scale_ = s;
    }

    void collect(std::vector<Param*>& out) {
        if (cfg_.identity_mode) return;
        enc_in_.collect(out);
        for (auto& l : enc_down_) l.collect(out);
        enc_out_.collect(out);
        dec_in_.collect(out);
        for (size_t s = 0; s < dec_up_.size(); ++s) {
            dec_up_[s].collect(out);
            dec_refine_[s].collect(out);
        }
        dec_out_.collect(out);
    }

    /// (K,3,H,W) in [0,1] -> (K,C_lat,H/f,W/f).
    Tensor encode_video(const Tensor& frames) {
        check_frames(frames);
        if (cfg_.identity_mode) return encode_identity(frames);
        Tape tape;
        Tensor lat = tape.value(encode_on_tape(tape, tape.constant(frames)));
        lat *= 1.0 / latent_scale_;
        return lat;
    }

    /// (K,C_lat,h,w) -> (K,3,H,W), clamped to [0,1].
    Tensor decode_video(const Tensor& lat) {
        check_latent(lat);
        if (cfg_.identity_mode) return decode_identity(lat);
        Tensor scaled = lat;
        scaled *= latent_scale_;
        Tape tape;
        return clamp01(tape.value(decode_on_tape(tape, tape.constant(scaled))));
    }

    /// Training path (no latent scaling, no clamp); pre-activation outputs.
    Var encode_on_tape(Tape& tape, Var frames) {
        if (cfg_.identity_mode)
            return tape.constant(encode_identity(tape.value(frames)));
        Var h = tape.silu(enc_in_.forward(tape, frames));
        for (auto& l : enc_down_) h = tape.silu(l.forward(tape, h));
        return enc_out_.forward(tape, h);
    }

    Var decode_on_tape(Tape& tape, Var lat) {
        if (cfg_.identity_mode)
            return tape.constant(decode_identity(tape.value(lat)));
        Var h = tape.silu(dec_in_.forward(tape, lat));
        for (size_t s = 0; s < dec_up_.size(); ++s) {
            h = tape.silu(dec_up_[s].forward(tape, tape.upsample_nearest2x(h)));
            h = tape.silu(dec_refine_[s].forward(tape, h));
        }
        return dec_out_.forward(tape, h);
    }

    void save(const std::string& path, std::uint64_t seed) {
        nlohmann::json meta;
        meta["kind"] = "codec";
        meta["config"] = {{"f", cfg_.f},
                          {"latent_channels", cfg_.latent_channels},
                          {"hidden", cfg_.hidden},
                          {"identity_mode", cfg_.identity_mode}};
        meta["latent_scale"] = latent_scale_;
        meta["seed"] = seed;
        std::vector<Param*> ps;
        collect(ps);
        std::vector<const Param*> cps(ps.begin(), ps.end());
        ckpt::save(path, meta, cps);
    }

    static VideoCodec load(const std::string& path) {
        nlohmann::json meta = ckpt::peek_meta(path);
        if (meta.value("kind", "") != "codec")
            throw std::runtime_error(path + " is not a codec checkpoint");
        CodecConfig cfg;
        cfg.f = meta["config"]["f"];
        cfg.latent_channels = meta["config"]["latent_channels"];
        cfg.hidden = meta["config"]["hidden"];
        cfg.identity_mode = meta["config"]["identity_mode"];
        VideoCodec codec(cfg, Rng(0));
        std::vector<Param*> ps;
        codec.collect(ps);
        ckpt::load(path, ps);
        codec.latent_scale_ = meta["latent_scale"];
        return codec;
    }

private:
    void check_frames(const Tensor& frames) const {
        if (frames.rank() != 4 || frames.dim(1) != 3)
            throw std::invalid_argument("encode expects (K,3,H,W), got " +
                                        shape_str(frames.shape()));
        if (frames.dim(2) % cfg_.f != 0 || frames.dim(3) % cfg_.f != 0)
            throw std::invalid_argument("frame size " + std::to_string(frames.dim(2)) + "x" +
                                        std::to_string(frames.dim(3)) +
                                        " not divisible by downsample factor " +
                                        std::to_string(cfg_.f));
    }
    void check_latent(const Tensor& lat) const {
        if (lat.rank() != 4 || lat.dim(1) != cfg_.latent_channels)
            throw std::invalid_argument("decode expects (K," +
                                        std::to_string(cfg_.latent_channels) + ",h,w), got " +
                                        shape_str(lat.shape()));
    }

    Tensor encode_identity(const Tensor& frames) const {
        const int k = frames.dim(0), h = frames.dim(2), w = frames.dim(3);
        Tensor lat(Shape{k, cfg_.latent_channels, h, w});
        for (int n = 0; n < k; ++n)
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) lat.at4(n, c, i, j) = frames.at4(n, c, i, j);
        return lat;
    }
    Tensor decode_identity(const Tensor& lat) const {
        const int k = lat.dim(0), h = lat.dim(2), w = lat.dim(3);
        Tensor frames(Shape{k, 3, h, w});
        for (int n = 0; n < k; ++n)
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < w; ++j) frames.at4(n, c, i, j) = lat.at4(n, c, i, j);
        return clamp01(std::move(frames));
    }

    CodecConfig cfg_;
    double latent_scale_ = 1.0;
    Conv2dLayer enc_in_, enc_out_, dec_in_, dec_out_;
    std::vector<Conv2dLayer> enc_down_, dec_up_, dec_refine_;
};

/// Reconstruction pretraining for the codec. Samples one random frame per
/// clip per step and minimizes pixel MSE. Returns the per-iteration loss
/// curve. Throws if the loss ever goes non-finite.
inline std::vector<double> pretrain_codec(VideoCodec& codec, const std::vector<Tensor>& clips,
                                          int iters, double lr, int batch_size,
                                          std::uint64_t seed) {
    if (codec.config().identity_mode || iters == 0) return {};
    if (clips.empty()) throw std::invalid_argument("pretrain_codec: empty dataset");
    Rng rng(seed);
    std::vector<Param*> params;
    codec.collect(params);
    // plain reconstruction objective; the divergence check below is the
    // stability guard, so no gradient clipping here
    Adam opt(params, lr, 0.9, 0.999, 1e-8, /*clip_norm=*/0.0);

    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(iters));
    for (int it = 0; it < iters; ++it) {
        Tape tape;
        Var loss{};
        for (int b = 0; b < batch_size; ++b) {
            const auto ci = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(clips.size()) - 1));
            const Tensor& clip = clips[ci];
            const int fi = static_cast<int>(rng.uniform_int(0, clip.dim(0) - 1));
            Tensor frame(Shape{1, 3, clip.dim(2), clip.dim(3)});
            const std::int64_t stride = frame.size();
            for (std::int64_t i = 0; i < stride; ++i) frame[i] = clip[fi * stride + i];
            Var recon = codec.decode_on_tape(tape, codec.encode_on_tape(tape, tape.constant(frame)));
            Var term = tape.mse_to(recon, frame);
            loss = loss.valid() ? tape.add(loss, term) : term;
        }
        loss = tape.scale(loss, 1.0 / batch_size);
        const double lv = tape.value(loss)[0];
        if (!std::isfinite(lv))
            throw std::runtime_error("codec pretraining diverged at iteration " +
                                     std::to_string(it) + " (loss not finite)");
        curve.push_back(lv);
        tape.backward(loss);
        opt.step(opt.grads_from(tape));
    }

    // Normalize the latent space to ~unit std for diffusion.
    double sq_sum = 0.0;
    std::int64_t count = 0;
    for (const Tensor& clip : clips) {
        Tape tape;
        const Tensor lat = tape.value(codec.encode_on_tape(tape, tape.constant(clip)));
        for (std::int64_t i = 0; i < lat.size(); ++i) sq_sum += lat[i] * lat[i];
        count += lat.size();
    }
    const double scale = std::sqrt(std::max(sq_sum / std::max<std::int64_t>(1, count), 1e-12));
    codec.set_latent_scale(scale);
    return curve;
}

}  // namespace tridiff
