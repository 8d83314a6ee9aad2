#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "tridiff/cond/triplet.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

constexpr int kClipFrames = 7;
constexpr double kDefaultCutThreshold = 0.27;

/// Verbs that mean "nothing is happening"; clips consisting solely of these
/// are treated as static scenes.
inline const std::vector<int>& default_no_action_verbs() {
    static const std::vector<int> verbs = {9};  // "idle"
    return verbs;
}

struct RawVideo {
    Tensor frames;                             // (N,3,H,W) in [0,1]
    std::vector<FrameAnnotation> annotations;  // one per frame

    int frame_count() const { return frames.empty() ? 0 : frames.dim(0); }

    void validate() const {
        if (frames.rank() != 4 || frames.dim(1) != 3)
            throw std::invalid_argument("RawVideo frames must be (N,3,H,W)");
        if (frames.dim(0) < 1) throw std::invalid_argument("RawVideo needs at least one frame");
        if (annotations.size() != static_cast<size_t>(frames.dim(0)))
            throw std::invalid_argument("RawVideo: annotation count != frame count");
        for (const auto& a : annotations) a.validate();
    }
};

/// A training clip: fixed-length window with a triplet shared by all frames.
struct Clip {
    Tensor frames;                             // (K,3,H,W)
    std::vector<FrameAnnotation> annotations;  // K entries
    ActionTriplet common_triplet;

    int frame_count() const { return frames.empty() ? 0 : frames.dim(0); }
    int height() const { return frames.dim(2); }
    int width() const { return frames.dim(3); }

    /// Type invariants: common triplet shared by every frame, no empty
    /// defined-triplet list, no all-black frame.
    bool satisfies_invariants() const {
        if (frames.rank() != 4 || frames.dim(1) != 3) return false;
        if (annotations.size() != static_cast<size_t>(frames.dim(0))) return false;
        if (!common_triplet.defined()) return false;
        const std::int64_t fs = frames.size() / frames.dim(0);
        for (int f = 0; f < frames.dim(0); ++f) {
            const auto defined = annotations[static_cast<size_t>(f)].defined_triplets();
            if (defined.empty()) return false;
            if (std::find(defined.begin(), defined.end(), common_triplet) == defined.end())
                return false;
            double mx = 0.0;
            for (std::int64_t i = 0; i < fs; ++i) mx = std::max(mx, frames[f * fs + i]);
            if (mx == 0.0) return false;  // all-black frame
        }
        return true;
    }

    /// True when every frame's defined triplets are all no-action verbs.
    bool is_static(const std::vector<int>& no_action_verbs = default_no_action_verbs()) const {
        for (const auto& ann : annotations)
            for (const auto& t : ann.defined_triplets())
                if (std::find(no_action_verbs.begin(), no_action_verbs.end(), t.verb_id) ==
                    no_action_verbs.end())
                    return false;
        return true;
    }
};

namespace detail {
/// RGB in [0,1] -> (h,s,v), each in [0,1]; h is 0 for achromatic pixels.
inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    v = mx;
    const double delta = mx - mn;
    s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r)
        h = (g - b) / delta;
    else if (mx == g)
        h = 2.0 + (b - r) / delta;
    else
        h = 4.0 + (r - g) / delta;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
}

inline double hue_circular_dist(double a, double b) {
    const double d = std::fabs(a - b);
    return std::min(d, 1.0 - d);
}
}  // namespace detail

/// Frame-difference score in [0,1]: both frames are converted to HSV with
/// all channels in [0,1]; the score is the mean over pixels and channels of
/// the absolute difference, hue taken on the circle. Identical frames score
/// 0; black vs white scores 1/3 (all difference in the value channel).
inline double content_score(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "content_score");
    if (a.rank() != 3 || a.dim(0) != 3)
        throw std::invalid_argument("content_score expects (3,H,W) frames");
    const int hw = a.dim(1) * a.dim(2);
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) {
        double ha, sa, va, hb, sb, vb;
        detail::rgb_to_hsv(a[i], a[hw + i], a[2 * hw + i], ha, sa, va);
        detail::rgb_to_hsv(b[i], b[hw + i], b[2 * hw + i], hb, sb, vb);
        acc += detail::hue_circular_dist(ha, hb) + std::fabs(sa - sb) + std::fabs(va - vb);
    }
    return acc / (3.0 * hw);
}

/// Indices i where content jumps: score(frame[i-1], frame[i]) > threshold.
/// Index i marks the first frame of the new scene. Sorted ascending.
inline std::vector<int> detect_scene_cuts(const Tensor& frames,
                                          double threshold = kDefaultCutThreshold) {
    if (frames.rank() != 4 || frames.dim(1) != 3)
        throw std::invalid_argument("detect_scene_cuts expects (N,3,H,W)");
    std::vector<int> cuts;
    const int n = frames.dim(0);
    const int h = frames.dim(2), w = frames.dim(3);
    const std::int64_t fs = static_cast<std::int64_t>(3) * h * w;
    Tensor prev(Shape{3, h, w}), cur(Shape{3, h, w});
    for (int i = 1; i < n; ++i) {
        for (std::int64_t k = 0; k < fs; ++k) {
            prev[k] = frames[(i - 1) * fs + k];
            cur[k] = frames[i * fs + k];
        }
        if (content_score(prev, cur) > threshold) cuts.push_back(i);
    }
    return cuts;
}

inline std::vector<int> detect_scene_cuts(const RawVideo& video,
                                          double threshold = kDefaultCutThreshold) {
    return detect_scene_cuts(video.frames, threshold);
}

/// Partitions the video into cut-free scenes, tiles each scene into
/// consecutive non-overlapping `frame_count` windows, and keeps a window iff
///   (a) the frames share at least one fully-defined triplet (the
///       lexicographically smallest shared one becomes common_triplet),
///   (b) no frame has an empty defined-triplet list, and
///   (c) no frame is all black.
inline std::vector<Clip> extract_clips(const RawVideo& video, const std::vector<int>& cuts,
                                       int frame_count = kClipFrames) {
    video.validate();
    if (frame_count < 1) throw std::invalid_argument("frame_count must be >= 1");
    if (!std::is_sorted(cuts.begin(), cuts.end()))
        throw std::invalid_argument("cut indices must be sorted");

    const int n = video.frame_count();
    const std::int64_t fs = video.frames.size() / n;

    std::vector<int> boundaries{0};
    for (int c : cuts)
        if (c > 0 && c < n) boundaries.push_back(c);
    boundaries.push_back(n);

    std::vector<Clip> clips;
    for (size_t s = 0; s + 1 < boundaries.size(); ++s) {
        const int begin = boundaries[s], end = boundaries[s + 1];
        for (int w0 = begin; w0 + frame_count <= end; w0 += frame_count) {
            // (b) + gather per-frame defined triplet sets
            bool ok = true;
            std::set<ActionTriplet> shared;
            for (int f = w0; f < w0 + frame_count && ok; ++f) {
                const auto defined = video.annotations[static_cast<size_t>(f)].defined_triplets();
                if (defined.empty()) {
                    ok = false;
                    break;
                }
                std::set<ActionTriplet> cur(defined.begin(), defined.end());
                if (f == w0) {
                    shared = std::move(cur);
                } else {
                    std::set<ActionTriplet> inter;
                    std::set_intersection(shared.begin(), shared.end(), cur.begin(), cur.end(),
                                          std::inserter(inter, inter.begin()));
                    shared = std::move(inter);
                }
                if (shared.empty()) ok = false;
            }
            if (!ok) continue;  // (a) or (b) failed

            // (c) all-black check
            for (int f = w0; f < w0 + frame_count && ok; ++f) {
                double mx = 0.0;
                for (std::int64_t i = 0; i < fs; ++i)
                    mx = std::max(mx, video.frames[f * fs + i]);
                if (mx == 0.0) ok = false;
            }
            if (!ok) continue;

            Clip clip;
            clip.common_triplet = *shared.begin();  // lexicographic minimum
            clip.frames = Tensor(Shape{frame_count, 3, video.frames.dim(2), video.frames.dim(3)});
            for (int f = 0; f < frame_count; ++f) {
                for (std::int64_t i = 0; i < fs; ++i)
                    clip.frames[f * fs + i] = video.frames[(w0 + f) * fs + i];
                clip.annotations.push_back(video.annotations[static_cast<size_t>(w0 + f)]);
            }
            clips.push_back(std::move(clip));
        }
    }
    return clips;
}

/// Defense-in-depth re-validation plus static-scene removal: drops clips
/// violating the Clip invariants and clips whose every frame carries only
/// no-action verbs. Idempotent.
inline std::vector<Clip> filter_static(std::vector<Clip> clips,
                                       const std::vector<int>& no_action_verbs =
                                           default_no_action_verbs()) {
    std::vector<Clip> kept;
    for (auto& c : clips)
        if (c.satisfies_invariants() && !c.is_static(no_action_verbs))
            kept.push_back(std::move(c));
    return kept;
}

}  // namespace tridiff
