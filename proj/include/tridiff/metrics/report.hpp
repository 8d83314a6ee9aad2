#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tridiff {

struct MetricsReport {
    double fvd = 0.0;
    double psnr_db = 0.0;
    double lpips = 0.0;
    double ssim = 0.0;
    int n_clips = 0;

    bool all_finite() const {
        return std::isfinite(fvd) && std::isfinite(psnr_db) && std::isfinite(lpips) &&
               std::isfinite(ssim);
    }

    nlohmann::json to_json(const std::string& model) const {
        return {{"model", model}, {"fvd", fvd},   {"psnr", psnr_db},
                {"lpips", lpips}, {"ssim", ssim}, {"n_clips", n_clips}};
    }
};

inline std::string metrics_csv_header() { return "model,fvd,psnr,lpips,ssim,n_clips"; }

inline std::string metrics_csv_row(const std::string& model, const MetricsReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << model << "," << r.fvd << "," << r.psnr_db << "," << r.lpips << "," << r.ssim << ","
       << r.n_clips;
    return os.str();
}

/// Dual emission: <prefix>.json and <prefix>.csv.
inline void write_metrics_report(const std::string& prefix, const std::string& model,
                                 const MetricsReport& r) {
    {
        std::ofstream os(prefix + ".json");
        if (!os) throw std::runtime_error("cannot write " + prefix + ".json");
        os << r.to_json(model).dump(2) << "\n";
    }
    {
        std::ofstream os(prefix + ".csv");
        if (!os) throw std::runtime_error("cannot write " + prefix + ".csv");
        os << metrics_csv_header() << "\n" << metrics_csv_row(model, r) << "\n";
    }
}

}  // namespace tridiff
