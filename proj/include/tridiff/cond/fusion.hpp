#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/core/nn.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tape.hpp"

namespace tridiff {

enum class FusionKind { linear, attn_image_query, attn_triplet_query };

inline const char* fusion_kind_name(FusionKind k) {
    switch (k) {
        case FusionKind::linear: return "linear";
        case FusionKind::attn_image_query: return "att-i";
        case FusionKind::attn_triplet_query: return "att-t";
    }
    return "?";
}

inline FusionKind fusion_kind_from(const std::string& s) {
    if (s == "linear") return FusionKind::linear;
    if (s == "att-i") return FusionKind::attn_image_query;
    if (s == "att-t") return FusionKind::attn_triplet_query;
    throw std::invalid_argument("unknown fusion kind: " + s);
}

struct FusionResult {
    Var cond;     // (cond_dim,)
    Var weights;  // attention weights, invalid Var for linear fusion
};

/// Combines image tokens (m,d) and triplet tokens (3,d) into the single
/// conditioning vector the denoiser consumes.
///
/// linear: mean-pool both sides, concatenate to 2d, affine to cond_dim.
/// attention: scaled dot-product with queries from one side and keys/values
/// from the other, mean-pooled over queries, then an affine head.
class FusionModule {
public:
    FusionModule() = default;
    FusionModule(FusionKind kind, int token_dim, int cond_dim, Rng init_rng)
        : kind_(kind), token_dim_(token_dim) {
        if (kind == FusionKind::linear) {
            proj_.init("fusion.linear", 2 * token_dim, cond_dim, init_rng);
        } else {
            wq_.init("fusion.q", token_dim, token_dim, init_rng);
            wk_.init("fusion.k", token_dim, token_dim, init_rng);
            wv_.init("fusion.v", token_dim, token_dim, init_rng);
            proj_.init("fusion.out", token_dim, cond_dim, init_rng);
        }
    }

    FusionKind kind() const { return kind_; }
    int cond_dim() const { return proj_.out_dim(); }

    FusionResult fuse(Tape& tape, Var img_tokens, Var trip_tokens) {
        check_tokens(tape, img_tokens, "image");
        check_tokens(tape, trip_tokens, "triplet");
        if (kind_ == FusionKind::linear) {
            Var pooled =
                tape.concat_vec(tape.mean_axis0(img_tokens), tape.mean_axis0(trip_tokens));
            return {proj_.forward(tape, pooled), Var{}};
        }
        const bool image_query = kind_ == FusionKind::attn_image_query;
        Var q_src = image_query ? img_tokens : trip_tokens;
        Var kv_src = image_query ? trip_tokens : img_tokens;
        auto att = scaled_dot_attention(tape, wq_.forward(tape, q_src), wk_.forward(tape, kv_src),
                                        wv_.forward(tape, kv_src));
        return {proj_.forward(tape, tape.mean_axis0(att.out)), att.weights};
    }

    void collect(std::vector<Param*>& out) {
        if (kind_ != FusionKind::linear) {
            wq_.collect(out);
            wk_.collect(out);
            wv_.collect(out);
        }
        proj_.collect(out);
    }

private:
    void check_tokens(Tape& tape, Var tokens, const char* side) const {
        const Tensor& t = tape.value(tokens);
        if (t.rank() != 2 || t.dim(1) != token_dim_)
            throw std::invalid_argument(std::string(side) + " tokens must be (n," +
                                        std::to_string(token_dim_) + "), got " +
                                        shape_str(t.shape()));
        if (t.dim(0) == 0)
            throw std::invalid_argument(std::string("empty ") + side + " token set");
    }

    FusionKind kind_ = FusionKind::linear;
    int token_dim_ = 0;
    LinearLayer wq_, wk_, wv_, proj_;
};

}  // namespace tridiff
