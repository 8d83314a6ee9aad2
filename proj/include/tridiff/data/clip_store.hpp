#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tridiff/data/png_io.hpp"
#include "tridiff/data/preprocess.hpp"
#include "tridiff/data/synth.hpp"

namespace tridiff {

namespace detail {

inline std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string zero_pad(int n, int width) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%0*d", width, n);
    return buf;
}

inline nlohmann::json triplets_json(const FrameAnnotation& ann) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ann.triplets)
        arr.push_back({t.instrument_id, t.verb_id, t.target_id});
    return arr;
}

inline FrameAnnotation annotation_from_json(const nlohmann::json& triplets, int phase) {
    FrameAnnotation ann;
    ann.phase_id = phase;
    for (const auto& t : triplets)
        ann.triplets.push_back(ActionTriplet{t.at(0).get<int>(), t.at(1).get<int>(),
                                             t.at(2).get<int>()});
    return ann;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << "\n";
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    is >> j;
    return j;
}

}  // namespace detail

/// Content-addressed clip identity over quantized pixels and annotations;
/// used for the train/test disjointness check.
inline std::uint64_t clip_content_id(const Clip& clip) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int f = 0; f < clip.frame_count(); ++f) {
        const ImageU8 img = frame_to_u8(video_frame(clip.frames, f));
        h = detail::fnv1a(img.rgb.data(), img.rgb.size(), h);
    }
    nlohmann::json ann;
    for (const auto& a : clip.annotations) ann.push_back(detail::triplets_json(a));
    ann.push_back({clip.common_triplet.instrument_id, clip.common_triplet.verb_id,
                   clip.common_triplet.target_id});
    const std::string s = ann.dump();
    return detail::fnv1a(s.data(), s.size(), h);
}

// ---------------------------------------------------------------- raw store

/// Directory layout: <dir>/video_NNN/frame_NNNN.png + annotations.json,
/// plus <dir>/manifest.json carrying the generator spec and seed.
inline void save_raw_store(const std::string& dir, const std::vector<SynthOutput>& videos,
                           const SynthSpec& spec, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["videos"] = nlohmann::json::array();
    for (size_t v = 0; v < videos.size(); ++v) {
        const std::string name = "video_" + detail::zero_pad(static_cast<int>(v), 3);
        const fs::path vdir = fs::path(dir) / name;
        fs::create_directories(vdir);
        const RawVideo& video = videos[v].video;
        for (int f = 0; f < video.frame_count(); ++f)
            write_png_rgb8((vdir / ("frame_" + detail::zero_pad(f, 4) + ".png")).string(),
                           frame_to_u8(video_frame(video.frames, f)));
        nlohmann::json ann;
        ann["triplets"] = nlohmann::json::array();
        ann["phase"] = nlohmann::json::array();
        for (const auto& a : video.annotations) {
            ann["triplets"].push_back(detail::triplets_json(a));
            ann["phase"].push_back(a.phase_id);
        }
        ann["planted_cuts"] = videos[v].planted_cuts;
        detail::write_json(vdir / "annotations.json", ann);
        manifest["videos"].push_back(name);
    }
    manifest["spec"] = {{"num_segments", spec.num_segments},
                        {"segment_len", spec.segment_len},
                        {"height", spec.height},
                        {"width", spec.width},
                        {"include_cuts", spec.include_cuts},
                        {"include_black", spec.include_black},
                        {"include_static", spec.include_static}};
    manifest["seed"] = seed;
    detail::write_json(fs::path(dir) / "manifest.json", manifest);
}

struct RawStore {
    std::vector<RawVideo> videos;
    std::vector<std::vector<int>> planted_cuts;
    nlohmann::json manifest;
};

inline RawStore load_raw_store(const std::string& dir) {
    namespace fs = std::filesystem;
    RawStore store;
    store.manifest = detail::read_json(fs::path(dir) / "manifest.json");
    for (const auto& name : store.manifest.at("videos")) {
        const fs::path vdir = fs::path(dir) / name.get<std::string>();
        nlohmann::json ann = detail::read_json(vdir / "annotations.json");
        const auto& trip = ann.at("triplets");
        const auto& phase = ann.at("phase");
        const int n = static_cast<int>(trip.size());
        if (n < 1) throw std::runtime_error("empty video in raw store: " + vdir.string());

        RawVideo video;
        for (int f = 0; f < n; ++f) {
            const ImageU8 img =
                read_png_rgb8((vdir / ("frame_" + detail::zero_pad(f, 4) + ".png")).string());
            Tensor frame = frame_from_u8(img);
            if (f == 0)
                video.frames = Tensor(Shape{n, 3, img.height, img.width});
            const std::int64_t fs_sz = frame.size();
            for (std::int64_t i = 0; i < fs_sz; ++i) video.frames[f * fs_sz + i] = frame[i];
            video.annotations.push_back(
                detail::annotation_from_json(trip.at(static_cast<size_t>(f)),
                                             phase.at(static_cast<size_t>(f)).get<int>()));
        }
        video.validate();
        store.videos.push_back(std::move(video));
        store.planted_cuts.push_back(ann.value("planted_cuts", std::vector<int>{}));
    }
    return store;
}

// --------------------------------------------------------------- clip store

/// Directory layout: <dir>/clip_NNNN/frame_NN.png x K + annotation.json,
/// plus <dir>/manifest.json listing clip directories, content ids, and the
/// provenance of the store.
inline void save_clip_store(const std::string& dir, const std::vector<Clip>& clips,
                            const nlohmann::json& source, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["clips"] = nlohmann::json::array();
    manifest["ids"] = nlohmann::json::array();
    for (size_t c = 0; c < clips.size(); ++c) {
        const std::string name = "clip_" + detail::zero_pad(static_cast<int>(c), 4);
        const fs::path cdir = fs::path(dir) / name;
        fs::create_directories(cdir);
        const Clip& clip = clips[c];
        for (int f = 0; f < clip.frame_count(); ++f)
            write_png_rgb8((cdir / ("frame_" + detail::zero_pad(f, 2) + ".png")).string(),
                           frame_to_u8(video_frame(clip.frames, f)));
        nlohmann::json ann;
        ann["triplets"] = nlohmann::json::array();
        ann["phase"] = nlohmann::json::array();
        for (const auto& a : clip.annotations) {
            ann["triplets"].push_back(detail::triplets_json(a));
            ann["phase"].push_back(a.phase_id);
        }
        ann["common_triplet"] = {clip.common_triplet.instrument_id, clip.common_triplet.verb_id,
                                 clip.common_triplet.target_id};
        detail::write_json(cdir / "annotation.json", ann);
        manifest["clips"].push_back(name);
        char hex[20];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(clip_content_id(clip)));
        manifest["ids"].push_back(std::string(hex));
    }
    manifest["source"] = source;
    manifest["seed"] = seed;
    manifest["frame_count"] = clips.empty() ? kClipFrames : clips.front().frame_count();
    detail::write_json(fs::path(dir) / "manifest.json", manifest);
}

struct ClipStore {
    std::vector<Clip> clips;
    std::vector<std::string> ids;  // content ids, manifest order
    nlohmann::json manifest;
};

inline ClipStore load_clip_store(const std::string& dir) {
    namespace fs = std::filesystem;
    ClipStore store;
    store.manifest = detail::read_json(fs::path(dir) / "manifest.json");
    for (const auto& name : store.manifest.at("clips")) {
        const fs::path cdir = fs::path(dir) / name.get<std::string>();
        nlohmann::json ann = detail::read_json(cdir / "annotation.json");
        const auto& trip = ann.at("triplets");
        const auto& phase = ann.at("phase");
        const int k = static_cast<int>(trip.size());

        Clip clip;
        for (int f = 0; f < k; ++f) {
            const ImageU8 img =
                read_png_rgb8((cdir / ("frame_" + detail::zero_pad(f, 2) + ".png")).string());
            Tensor frame = frame_from_u8(img);
            if (f == 0) clip.frames = Tensor(Shape{k, 3, img.height, img.width});
            const std::int64_t fs_sz = frame.size();
            for (std::int64_t i = 0; i < fs_sz; ++i) clip.frames[f * fs_sz + i] = frame[i];
            clip.annotations.push_back(
                detail::annotation_from_json(trip.at(static_cast<size_t>(f)),
                                             phase.at(static_cast<size_t>(f)).get<int>()));
        }
        const auto& ct = ann.at("common_triplet");
        clip.common_triplet = ActionTriplet{ct.at(0).get<int>(), ct.at(1).get<int>(),
                                            ct.at(2).get<int>()};
        store.clips.push_back(std::move(clip));
    }
    store.ids = store.manifest.at("ids").get<std::vector<std::string>>();
    return store;
}

}  // namespace tridiff
