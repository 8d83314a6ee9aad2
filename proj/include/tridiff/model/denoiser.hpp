#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

struct DenoiserConfig {
    int latent_channels = 4;
    int base_channels = 32;
    int depth = 3;             // spatial residual blocks
    int cond_dim = 32;         // fused conditioning width
    int time_embed_dim = 32;
    bool temporal_enabled = true;

    void validate() const {
        if (depth < 1) throw std::invalid_argument("denoiser depth must be >= 1");
        if (cond_dim < 1) throw std::invalid_argument("cond_dim must be positive");
        if (latent_channels < 1 || base_channels < 1 || time_embed_dim < 1)
            throw std::invalid_argument("denoiser channel counts must be positive");
    }
};

/// Epsilon-predicting video denoiser: a stack of per-frame residual conv
/// blocks, each followed (when enabled) by a temporal attention layer that
/// mixes information across the K frame axis at fixed spatial locations.
/// Timestep and fused conditioning enter every block as channel biases.
class DenoiserNet {
public:
    DenoiserNet() = default;

    DenoiserNet(DenoiserConfig cfg, Rng init_rng) : cfg_(cfg) {
        cfg_.validate();
        conv_in_.init("denoiser.in", cfg_.latent_channels, cfg_.base_channels, 3, 1, 1, init_rng);
        blocks_.resize(static_cast<size_t>(cfg_.depth));
        for (int d = 0; d < cfg_.depth; ++d) {
            auto& b = blocks_[static_cast<size_t>(d)];
            const std::string p = "denoiser.block" + std::to_string(d);
            b.conv1.init(p + ".conv1", cfg_.base_channels, cfg_.base_channels, 3, 1, 1, init_rng);
            b.conv2.init(p + ".conv2", cfg_.base_channels, cfg_.base_channels, 3, 1, 1, init_rng);
            b.time_proj.init(p + ".time", cfg_.time_embed_dim, cfg_.base_channels, init_rng);
            b.cond_proj.init(p + ".cond", cfg_.cond_dim, cfg_.base_channels, init_rng);
            if (cfg_.temporal_enabled) {
                b.wq.init(p + ".t_q", cfg_.base_channels, cfg_.base_channels, init_rng);
                b.wk.init(p + ".t_k", cfg_.base_channels, cfg_.base_channels, init_rng);
                b.wv.init(p + ".t_v", cfg_.base_channels, cfg_.base_channels, init_rng);
                b.wo.init(p + ".t_o", cfg_.base_channels, cfg_.base_channels, init_rng);
            }
        }
        conv_out_.init("denoiser.out", cfg_.base_channels, cfg_.latent_channels, 3, 1, 1, init_rng);
    }

    const DenoiserConfig& config() const { return cfg_; }

    void collect(std::vector<Param*>& out) {
        conv_in_.collect(out);
        for (auto& b : blocks_) {
            b.conv1.collect(out);
            b.conv2.collect(out);
            b.time_proj.collect(out);
            b.cond_proj.collect(out);
            if (cfg_.temporal_enabled) {
                b.wq.collect(out);
                b.wk.collect(out);
                b.wv.collect(out);
                b.wo.collect(out);
            }
        }
        conv_out_.collect(out);
    }

    std::int64_t param_count() {
        std::vector<Param*> ps;
        collect(ps);
        std::int64_t n = 0;
        for (const Param* p : ps) n += p->value.size();
        return n;
    }

    /// z_t (K,C_lat,h,w), cond (cond_dim,) -> epsilon prediction, same shape.
    Var forward(Tape& tape, Var z_t, int t, Var cond) {
        const Tensor& z = tape.value(z_t);
        if (z.rank() != 4 || z.dim(1) != cfg_.latent_channels)
            throw std::invalid_argument("denoiser expects (K," +
                                        std::to_string(cfg_.latent_channels) + ",h,w), got " +
                                        shape_str(z.shape()));
        if (!cond.valid() || tape.value(cond).size() != cfg_.cond_dim)
            throw std::invalid_argument("conditioning width must equal cond_dim=" +
                                        std::to_string(cfg_.cond_dim));
        Var temb = tape.constant(sinusoidal_embedding(t, cfg_.time_embed_dim));
        Var h = conv_in_.forward(tape, z_t);
        for (auto& b : blocks_) {
            Var y = b.conv1.forward(tape, h);
            Var bias = tape.add(b.time_proj.forward(tape, temb), b.cond_proj.forward(tape, cond));
            y = tape.silu(tape.add_channel_bias(y, bias));
            y = b.conv2.forward(tape, y);
            h = tape.add(h, y);
            if (cfg_.temporal_enabled) h = temporal_attention(tape, h, b);
        }
        return conv_out_.forward(tape, h);
    }

    Tensor forward_plain(const Tensor& z_t, int t, const Tensor& cond) {
        Tape tape;
        return tape.value(forward(tape, tape.constant(z_t), t, tape.constant(cond)));
    }

private:
    struct Block {
        Conv2dLayer conv1, conv2;
        LinearLayer time_proj, cond_proj;
        LinearLayer wq, wk, wv, wo;
    };

    /// Attention over the K axis at each spatial site, with residual.
    Var temporal_attention(Tape& tape, Var h, Block& b) {
        const Tensor& t = tape.value(h);
        const int k = t.dim(0), c = t.dim(1), hh = t.dim(2), ww = t.dim(3);
        // (K,C,h,w) -> (h,w,K,C) -> (S,K,C) with S = h*w token batches
        Var tokens = tape.reshape(tape.permute(h, {2, 3, 0, 1}), Shape{hh * ww, k, c});
        Var q = tape.linear(tokens, tape.param(b.wq.w), tape.param(b.wq.b));
        Var key = tape.linear(tokens, tape.param(b.wk.w), tape.param(b.wk.b));
        Var val = tape.linear(tokens, tape.param(b.wv.w), tape.param(b.wv.b));
        Var scores = tape.scale(tape.bmm(q, tape.permute(key, {0, 2, 1})),
                                1.0 / std::sqrt(static_cast<double>(c)));
        Var attn = tape.softmax_lastdim(scores);
        Var mixed = tape.linear(tape.bmm(attn, val), tape.param(b.wo.w), tape.param(b.wo.b));
        Var out = tape.add(tokens, mixed);
        return tape.permute(tape.reshape(out, Shape{hh, ww, k, c}), {2, 3, 0, 1});
    }

    DenoiserConfig cfg_;
    Conv2dLayer conv_in_, conv_out_;
    std::vector<Block> blocks_;
};

}  // namespace tridiff
