#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "tridiff/data/clip_store.hpp"
#include "tridiff/data/preprocess.hpp"
#include "tridiff/data/synth.hpp"

using namespace tridiff;

TEST_CASE("content_score: identity, black vs white, symmetry") {
    Tensor black(Shape{3, 4, 4});
    Tensor white(Shape{3, 4, 4}, 1.0);
    REQUIRE(content_score(black, black) == 0.0);
    REQUIRE(content_score(white, white) == 0.0);
    // only the value channel differs -> 1/3
    REQUIRE(content_score(black, white) == Catch::Approx(1.0 / 3.0));

    Rng rng(1);
    Tensor a = clamp01(Tensor::randn(Shape{3, 6, 6}, rng));
    Tensor b = clamp01(Tensor::randn(Shape{3, 6, 6}, rng));
    REQUIRE(content_score(a, b) == Catch::Approx(content_score(b, a)));
    REQUIRE(content_score(a, b) >= 0.0);
    REQUIRE(content_score(a, b) <= 1.0);
    REQUIRE_THROWS_AS(content_score(a, Tensor(Shape{3, 4, 4})), std::invalid_argument);
}

TEST_CASE("content_score hue wraparound is circular") {
    // hue 0.02 vs hue 0.98, same s/v: circular distance 0.04, not 0.96
    Tensor a(Shape{3, 1, 1}), b(Shape{3, 1, 1});
    auto set_hsv = [](Tensor& t, double h, double s, double v) {
        double r, g, bl;
        tridiff::detail::hsv_to_rgb(h, s, v, r, g, bl);
        t[0] = r;
        t[1] = g;
        t[2] = bl;
    };
    set_hsv(a, 0.02, 1.0, 1.0);
    set_hsv(b, 0.98, 1.0, 1.0);
    REQUIRE(content_score(a, b) < 0.05);
}

TEST_CASE("detect_scene_cuts: constant video, constructed cut, unreachable threshold") {
    Tensor constant(Shape{5, 3, 4, 4}, 0.4);
    REQUIRE(detect_scene_cuts(constant).empty());

    // hard cut at index 3: near-black -> near-white (value jump 0.9 -> score 0.30)
    Tensor video(Shape{6, 3, 4, 4}, 0.05);
    const std::int64_t fs = video.size() / 6;
    for (int f = 3; f < 6; ++f)
        for (std::int64_t i = 0; i < fs; ++i) video[f * fs + i] = 0.95;
    // oracle: the constructed scores straddle the threshold
    REQUIRE(content_score(video_frame(video, 2), video_frame(video, 3)) > 0.27);
    REQUIRE(content_score(video_frame(video, 1), video_frame(video, 2)) < 0.27);
    auto cuts = detect_scene_cuts(video);
    REQUIRE(cuts == std::vector<int>{3});

    REQUIRE(detect_scene_cuts(video, 1.0).empty());
}

TEST_CASE("synth_video is bitwise deterministic") {
    SynthSpec spec;
    spec.num_segments = 3;
    spec.segment_len = 8;
    auto a = synth_video(spec, 77);
    auto b = synth_video(spec, 77);
    REQUIRE(a.video.frames.vec() == b.video.frames.vec());
    REQUIRE(a.planted_cuts == b.planted_cuts);
    auto c = synth_video(spec, 78);
    REQUIRE(c.video.frames.vec() != a.video.frames.vec());
}

TEST_CASE("synth_video without cuts produces no detectable cuts") {
    SynthSpec spec;
    spec.num_segments = 1;
    spec.segment_len = 20;
    spec.include_cuts = false;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto out = synth_video(spec, seed);
        REQUIRE(detect_scene_cuts(out.video).empty());  // oracle check
        REQUIRE(out.planted_cuts.empty());
    }

    SynthSpec multi = spec;
    multi.num_segments = 3;
    for (std::uint64_t seed : {4ULL, 5ULL}) {
        auto out = synth_video(multi, seed);
        REQUIRE(detect_scene_cuts(out.video).empty());
    }
}

TEST_CASE("synth_video with black frames emits an all-black frame") {
    SynthSpec spec;
    spec.num_segments = 2;
    spec.segment_len = 7;
    spec.include_black = true;
    auto out = synth_video(spec, 9);
    bool has_black = false;
    const int n = out.video.frame_count();
    const std::int64_t fs = out.video.frames.size() / n;
    for (int f = 0; f < n && !has_black; ++f) {
        double mx = 0.0;
        for (std::int64_t i = 0; i < fs; ++i) mx = std::max(mx, out.video.frames[f * fs + i]);
        if (mx == 0.0) has_black = true;
    }
    REQUIRE(has_black);
}

TEST_CASE("planted cuts are detected with precision and recall 1.0") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL}) {
        SynthSpec spec;
        spec.num_segments = 4;
        spec.segment_len = 9;
        spec.include_cuts = true;
        spec.include_black = seed % 2 == 0;
        auto out = synth_video(spec, seed);
        auto detected = detect_scene_cuts(out.video, kDefaultCutThreshold);
        REQUIRE(detected == out.planted_cuts);
        // every planted cut clears the threshold with margin >= 0.1
        for (int cut : out.planted_cuts) {
            const double s = content_score(video_frame(out.video.frames, cut - 1),
                                           video_frame(out.video.frames, cut));
            REQUIRE(s >= kDefaultCutThreshold + 0.1);
        }
    }
}

TEST_CASE("synth rejects undersized specs") {
    SynthSpec bad;
    bad.segment_len = 5;
    REQUIRE_THROWS_AS(synth_video(bad, 1), std::invalid_argument);
    SynthSpec tiny;
    tiny.height = 8;
    REQUIRE_THROWS_AS(synth_video(tiny, 1), std::invalid_argument);
}

namespace {

RawVideo make_annotated_video(int n, const std::vector<std::vector<ActionTriplet>>& triplets) {
    RawVideo v;
    v.frames = Tensor(Shape{n, 3, 4, 4}, 0.5);
    for (int f = 0; f < n; ++f) {
        FrameAnnotation ann;
        ann.triplets = triplets[static_cast<size_t>(f)];
        v.annotations.push_back(ann);
    }
    return v;
}

}  // namespace

TEST_CASE("extract_clips: 14 shared-triplet frames give two clips") {
    const ActionTriplet t{1, 2, 3};
    std::vector<std::vector<ActionTriplet>> anns(14, {t});
    RawVideo video = make_annotated_video(14, anns);
    auto clips = extract_clips(video, {});
    REQUIRE(clips.size() == 2);
    for (const auto& c : clips) {
        REQUIRE(c.common_triplet == t);
        REQUIRE(c.frame_count() == 7);
        REQUIRE(c.satisfies_invariants());
    }
}

TEST_CASE("extract_clips: a disjoint frame drops the window") {
    const ActionTriplet t{1, 2, 3};
    std::vector<std::vector<ActionTriplet>> anns(7, {t});
    anns[3] = {ActionTriplet{4, 5, 6}};  // disjoint from the rest
    RawVideo video = make_annotated_video(7, anns);
    REQUIRE(extract_clips(video, {}).empty());
}

TEST_CASE("extract_clips: empty and undefined-only annotations drop the window") {
    const ActionTriplet t{1, 2, 3};
    std::vector<std::vector<ActionTriplet>> anns(7, {t});
    anns[5] = {};
    REQUIRE(extract_clips(make_annotated_video(7, anns), {}).empty());

    anns[5] = {ActionTriplet{1, kUndefinedId, 3}};  // undefined counts as empty
    REQUIRE(extract_clips(make_annotated_video(7, anns), {}).empty());
}

TEST_CASE("extract_clips: common triplet is the lexicographic minimum of the intersection") {
    const ActionTriplet hi{3, 1, 1}, lo{1, 9, 9};
    std::vector<std::vector<ActionTriplet>> anns(7, {hi, lo});
    auto clips = extract_clips(make_annotated_video(7, anns), {});
    REQUIRE(clips.size() == 1);
    REQUIRE(clips[0].common_triplet == lo);  // (1,9,9) < (3,1,1)
}

TEST_CASE("extract_clips: cuts partition scenes and windows restart at cuts") {
    const ActionTriplet t{2, 2, 2};
    std::vector<std::vector<ActionTriplet>> anns(20, {t});
    RawVideo video = make_annotated_video(20, anns);
    // cut at 10: scenes [0,10) and [10,20) -> 1 + 1 windows of 7
    auto clips = extract_clips(video, {10});
    REQUIRE(clips.size() == 2);
    REQUIRE_THROWS_AS(extract_clips(video, {7, 3}), std::invalid_argument);  // unsorted
}

namespace {

// Independent brute-force checker for the windowing rules.
struct OracleClip {
    int start = 0;
    ActionTriplet common;
};

std::vector<OracleClip> oracle_extract(const RawVideo& v, const std::vector<int>& cuts, int k) {
    std::vector<OracleClip> out;
    const int n = v.frame_count();
    std::vector<int> bounds{0};
    for (int c : cuts)
        if (c > 0 && c < n) bounds.push_back(c);
    bounds.push_back(n);
    const std::int64_t fs = v.frames.size() / n;
    for (size_t s = 0; s + 1 < bounds.size(); ++s) {
        for (int w0 = bounds[s]; w0 + k <= bounds[s + 1]; w0 += k) {
            bool ok = true;
            // candidate commons: every defined triplet of the first frame
            std::vector<ActionTriplet> commons;
            for (const auto& t : v.annotations[static_cast<size_t>(w0)].triplets)
                if (t.defined()) commons.push_back(t);
            for (int f = w0; f < w0 + k; ++f) {
                std::vector<ActionTriplet> defined;
                for (const auto& t : v.annotations[static_cast<size_t>(f)].triplets)
                    if (t.defined()) defined.push_back(t);
                if (defined.empty()) ok = false;
                std::vector<ActionTriplet> still;
                for (const auto& c : commons)
                    if (std::find(defined.begin(), defined.end(), c) != defined.end())
                        still.push_back(c);
                commons = still;
                double mx = 0.0;
                for (std::int64_t i = 0; i < fs; ++i)
                    mx = std::max(mx, v.frames[f * fs + i]);
                if (mx == 0.0) ok = false;
            }
            if (!ok || commons.empty()) continue;
            OracleClip oc;
            oc.start = w0;
            oc.common = *std::min_element(commons.begin(), commons.end());
            out.push_back(oc);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("extract_clips matches the brute-force oracle on fuzzed videos") {
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(1, 60));
        RawVideo v;
        v.frames = Tensor(Shape{n, 3, 4, 4});
        const std::int64_t fs = v.frames.size() / n;
        for (int f = 0; f < n; ++f) {
            const bool black = rng.uniform() < 0.08;
            for (std::int64_t i = 0; i < fs; ++i)
                v.frames[f * fs + i] = black ? 0.0 : 0.1 + 0.9 * rng.uniform();
            FrameAnnotation ann;
            const int n_trip = static_cast<int>(rng.uniform_int(0, 3));
            for (int t = 0; t < n_trip; ++t) {
                // small id pool to make shared triplets likely; sprinkle sentinels
                auto id = [&](int hi) {
                    return rng.uniform() < 0.1 ? kUndefinedId
                                               : static_cast<int>(rng.uniform_int(0, hi));
                };
                ann.triplets.push_back(ActionTriplet{id(2), id(2), id(2)});
            }
            ann.phase_id = static_cast<int>(rng.uniform_int(0, kNumPhases - 1));
            v.annotations.push_back(ann);
        }
        std::vector<int> cuts;
        for (int i = 1; i < n; ++i)
            if (rng.uniform() < 0.1) cuts.push_back(i);

        auto got = extract_clips(v, cuts);
        auto expected = oracle_extract(v, cuts, kClipFrames);
        REQUIRE(got.size() == expected.size());
        for (size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].common_triplet == expected[i].common);
            // frames must be the oracle's window
            const std::int64_t cfs = got[i].frames.size() / kClipFrames;
            for (int f = 0; f < kClipFrames; ++f)
                for (std::int64_t px = 0; px < cfs; ++px)
                    REQUIRE(got[i].frames[f * cfs + px] ==
                            v.frames[(expected[i].start + f) * cfs + px]);
            REQUIRE(got[i].satisfies_invariants());
        }
    }
}

TEST_CASE("filter_static removes black-frame and idle-only clips, keeps action clips") {
    const ActionTriplet act{1, 2, 3};
    const ActionTriplet idle{1, 9, 3};

    std::vector<std::vector<ActionTriplet>> anns(7, {act});
    auto clips = extract_clips(make_annotated_video(7, anns), {});
    REQUIRE(clips.size() == 1);

    Clip black_clip = clips[0];
    const std::int64_t fs = black_clip.frames.size() / 7;
    for (std::int64_t i = 0; i < fs; ++i) black_clip.frames[2 * fs + i] = 0.0;

    std::vector<std::vector<ActionTriplet>> idle_anns(7, {idle});
    auto idle_clips = extract_clips(make_annotated_video(7, idle_anns), {});
    REQUIRE(idle_clips.size() == 1);  // extraction keeps it; the filter drops it

    std::vector<Clip> all{clips[0], black_clip, idle_clips[0]};
    auto kept = filter_static(all);
    REQUIRE(kept.size() == 1);
    REQUIRE(kept[0].common_triplet == act);

    // idempotence
    auto again = filter_static(kept);
    REQUIRE(again.size() == kept.size());
}

TEST_CASE("full synth -> cuts -> extract -> filter pipeline yields valid clips") {
    SynthSpec spec;
    spec.num_segments = 3;
    spec.segment_len = 15;
    spec.include_cuts = true;
    spec.include_black = true;
    spec.include_static = true;
    auto out = synth_video(spec, 123);
    auto cuts = detect_scene_cuts(out.video);
    auto clips = filter_static(extract_clips(out.video, cuts));
    REQUIRE(!clips.empty());
    for (const auto& c : clips) {
        REQUIRE(c.satisfies_invariants());
        REQUIRE_FALSE(c.is_static());
    }
}

TEST_CASE("clip store round trip preserves pixels, annotations and ids") {
    SynthSpec spec;
    spec.num_segments = 2;
    spec.segment_len = 14;
    auto out = synth_video(spec, 55);
    auto clips = filter_static(extract_clips(out.video, detect_scene_cuts(out.video)));
    REQUIRE(!clips.empty());

    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "tridiff_clipstore_test";
    fs::remove_all(dir);
    save_clip_store(dir.string(), clips, {{"origin", "unit-test"}}, 55);
    auto store = load_clip_store(dir.string());
    REQUIRE(store.clips.size() == clips.size());
    REQUIRE(store.ids.size() == clips.size());

    for (size_t i = 0; i < clips.size(); ++i) {
        REQUIRE(store.clips[i].common_triplet == clips[i].common_triplet);
        // pixels survive 8-bit quantization round trip
        for (std::int64_t p = 0; p < clips[i].frames.size(); ++p)
            REQUIRE(std::fabs(store.clips[i].frames[p] - clips[i].frames[p]) <= 0.5 / 255.0 + 1e-12);
        // reloaded clip hashes to the manifest id
        char hex[20];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(clip_content_id(store.clips[i])));
        REQUIRE(store.ids[i] == hex);
    }
    fs::remove_all(dir);
}

TEST_CASE("raw store round trip") {
    SynthSpec spec;
    spec.num_segments = 2;
    spec.segment_len = 8;
    spec.include_black = true;
    std::vector<SynthOutput> videos{synth_video(spec, 1), synth_video(spec, 2)};

    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "tridiff_rawstore_test";
    fs::remove_all(dir);
    save_raw_store(dir.string(), videos, spec, 42);
    auto store = load_raw_store(dir.string());
    REQUIRE(store.videos.size() == 2);
    REQUIRE(store.planted_cuts[0] == videos[0].planted_cuts);
    REQUIRE(store.videos[0].frame_count() == videos[0].video.frame_count());
    REQUIRE(store.manifest["seed"] == 42);
    for (size_t f = 0; f < store.videos[1].annotations.size(); ++f) {
        REQUIRE(store.videos[1].annotations[f].triplets.size() ==
                videos[1].video.annotations[f].triplets.size());
        REQUIRE(store.videos[1].annotations[f].phase_id ==
                videos[1].video.annotations[f].phase_id);
    }
    fs::remove_all(dir);
}
