#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tridiff/cond/stack.hpp"
#include "tridiff/model/denoiser.hpp"

namespace tridiff {

struct TrainConfig {
    int iterations = 10000;
    double learning_rate = 1e-5;
    int batch_size = 8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double grad_clip_norm = 1.0;  // stability guard for tiny models; 0 disables
    std::uint64_t seed = 0;
    ConditioningKind conditioning = ConditioningKind::learnable;
    FusionKind fusion = FusionKind::attn_triplet_query;

    // noise schedule
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    // model sizes
    int base_channels = 32;
    int depth = 3;
    int cond_dim = 32;
    int token_dim = 32;
    int time_embed_dim = 32;
    int frame_hidden = 16;
    bool temporal_enabled = true;

    int checkpoint_interval = 0;  // extra checkpoint every N iterations; 0 = final only

    void validate() const {
        if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
        if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
        if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (timesteps < 1) throw std::invalid_argument("timesteps must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"iterations", iterations},
                {"learning_rate", learning_rate},
                {"batch_size", batch_size},
                {"adam_beta1", adam_beta1},
                {"adam_beta2", adam_beta2},
                {"grad_clip_norm", grad_clip_norm},
                {"seed", seed},
                {"conditioning", conditioning_kind_name(conditioning)},
                {"fusion", fusion_kind_name(fusion)},
                {"timesteps", timesteps},
                {"beta_start", beta_start},
                {"beta_end", beta_end},
                {"base_channels", base_channels},
                {"depth", depth},
                {"cond_dim", cond_dim},
                {"token_dim", token_dim},
                {"time_embed_dim", time_embed_dim},
                {"frame_hidden", frame_hidden},
                {"temporal_enabled", temporal_enabled},
                {"checkpoint_interval", checkpoint_interval}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.iterations = j.value("iterations", c.iterations);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
        c.seed = j.value("seed", c.seed);
        if (j.contains("conditioning"))
            c.conditioning = conditioning_kind_from(j["conditioning"].get<std::string>());
        if (j.contains("fusion")) c.fusion = fusion_kind_from(j["fusion"].get<std::string>());
        c.timesteps = j.value("timesteps", c.timesteps);
        c.beta_start = j.value("beta_start", c.beta_start);
        c.beta_end = j.value("beta_end", c.beta_end);
        c.base_channels = j.value("base_channels", c.base_channels);
        c.depth = j.value("depth", c.depth);
        c.cond_dim = j.value("cond_dim", c.cond_dim);
        c.token_dim = j.value("token_dim", c.token_dim);
        c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
        c.frame_hidden = j.value("frame_hidden", c.frame_hidden);
        c.temporal_enabled = j.value("temporal_enabled", c.temporal_enabled);
        c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
        c.validate();
        return c;
    }
};

/// One ablation row. The unconditioned row carries no meaningful fusion; it
/// is normalized to linear internally and rendered as "-".
struct AblationRow {
    ConditioningKind conditioning = ConditioningKind::none;
    FusionKind fusion = FusionKind::linear;

    std::string fusion_label() const {
        return conditioning == ConditioningKind::none ? "-" : fusion_kind_name(fusion);
    }
    bool operator==(const AblationRow& o) const {
        if (conditioning != o.conditioning) return false;
        if (conditioning == ConditioningKind::none) return true;  // fusion irrelevant
        return fusion == o.fusion;
    }
};

struct AblationGrid {
    std::vector<AblationRow> rows;

    void validate() const {
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = i + 1; j < rows.size(); ++j)
                if (rows[i] == rows[j])
                    throw std::invalid_argument("duplicate ablation rows at " + std::to_string(i) +
                                                " and " + std::to_string(j));
    }

    /// The standard 7-row grid: unconditioned baseline, learnable-embedding
    /// conditioning with linear / image-query-attention fusion, and the text
    /// conditioning ladder (frozen linear, fine-tuned linear, fine-tuned
    /// with either attention direction).
    static AblationGrid full_grid() {
        AblationGrid g;
        g.rows = {
            {ConditioningKind::none, FusionKind::linear},
            {ConditioningKind::learnable, FusionKind::linear},
            {ConditioningKind::learnable, FusionKind::attn_image_query},
            {ConditioningKind::text, FusionKind::linear},
            {ConditioningKind::text_finetuned, FusionKind::linear},
            {ConditioningKind::text_finetuned, FusionKind::attn_image_query},
            {ConditioningKind::text_finetuned, FusionKind::attn_triplet_query},
        };
        g.validate();
        return g;
    }

    static AblationGrid by_name(const std::string& name) {
        // "table2" is the conventional name for the full grid in reports
        if (name == "full" || name == "table2") return full_grid();
        throw std::invalid_argument("unknown ablation grid: " + name);
    }
};

}  // namespace tridiff
