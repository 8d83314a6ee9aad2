#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tridiff/train/config.hpp"
#include "tridiff/train/evaluate.hpp"
#include "tridiff/train/trainer.hpp"

namespace tridiff {

struct AblationResult {
    AblationRow row;
    bool ok = false;
    std::string error;
    MetricsReport report;
};

/// Trains one model per grid row with identical seed, data and iteration
/// budget, then evaluates each on the held-out set. A failing row is marked
/// and the remaining rows still run.
inline std::vector<AblationResult> run_ablation(const AblationGrid& grid,
                                                const TrainConfig& base_config,
                                                const ClipStore& train_data,
                                                const ClipStore& test_data, VideoCodec& codec,
                                                const Lexicon& lexicon,
                                                TextEncoder* pretrained_text, int eval_steps,
                                                std::ostream* progress = nullptr) {
    grid.validate();
    std::vector<AblationResult> results;
    for (const AblationRow& row : grid.rows) {
        AblationResult res;
        res.row = row;
        try {
            TrainConfig cfg = base_config;
            cfg.conditioning = row.conditioning;
            cfg.fusion = row.fusion;
            if (progress)
                *progress << "[ablate] " << conditioning_kind_name(row.conditioning) << " / "
                          << row.fusion_label() << "\n";
            TrainedModel model = train(cfg, train_data, codec, lexicon, pretrained_text);
            res.report = evaluate(model, codec, test_data, eval_steps, cfg.seed).report;
            res.ok = true;
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
            if (progress) *progress << "[ablate] row failed: " << e.what() << "\n";
        }
        results.push_back(std::move(res));
    }
    return results;
}

inline std::string ablation_csv_header() {
    return "conditioning,fusion,fvd,psnr,lpips,ssim,status";
}

inline std::string ablation_csv_row(const AblationResult& r) {
    std::ostringstream os;
    os.precision(10);
    os << conditioning_kind_name(r.row.conditioning) << "," << r.row.fusion_label() << ",";
    if (r.ok)
        os << r.report.fvd << "," << r.report.psnr_db << "," << r.report.lpips << ","
           << r.report.ssim << ",ok";
    else
        os << "nan,nan,nan,nan,failed";
    return os.str();
}

inline nlohmann::json ablation_json(const std::vector<AblationResult>& results) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json j;
        j["conditioning"] = conditioning_kind_name(r.row.conditioning);
        j["fusion"] = r.row.fusion_label();
        j["status"] = r.ok ? "ok" : "failed";
        if (r.ok) {
            j["fvd"] = r.report.fvd;
            j["psnr"] = r.report.psnr_db;
            j["lpips"] = r.report.lpips;
            j["ssim"] = r.report.ssim;
            j["n_clips"] = r.report.n_clips;
        } else {
            j["error"] = r.error;
        }
        rows.push_back(std::move(j));
    }
    return rows;
}

/// Dual emission: <prefix>.csv (one row per grid entry) and <prefix>.json.
inline void write_ablation_report(const std::string& csv_path,
                                  const std::vector<AblationResult>& results) {
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot write " + csv_path);
    os << ablation_csv_header() << "\n";
    for (const auto& r : results) os << ablation_csv_row(r) << "\n";

    std::string json_path = csv_path;
    const auto dot = json_path.rfind(".csv");
    if (dot != std::string::npos)
        json_path = json_path.substr(0, dot) + ".json";
    else
        json_path += ".json";
    std::ofstream js(json_path);
    if (!js) throw std::runtime_error("cannot write " + json_path);
    js << ablation_json(results).dump(2) << "\n";
}

}  // namespace tridiff
