#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tridiff/cond/triplet.hpp"
#include "tridiff/core/rng.hpp"
#include "tridiff/core/tensor.hpp"
#include "tridiff/data/preprocess.hpp"

namespace tridiff {

struct SynthSpec {
    int num_segments = 4;
    int segment_len = 14;  // frames per segment, >= clip length
    int height = 32;
    int width = 32;
    bool include_cuts = true;    // hard background switch between segments
    bool include_black = false;  // blacked-out frames between segments
    bool include_static = false; // an idle-verb segment with no motion

    void validate() const {
        if (num_segments < 1) throw std::invalid_argument("need at least one segment");
        if (segment_len < kClipFrames)
            throw std::invalid_argument("segment_len must be >= " + std::to_string(kClipFrames));
        if (height < 16 || width < 16)
            throw std::invalid_argument("frame size below sprite size (min 16x16)");
    }
};

struct SynthOutput {
    RawVideo video;
    std::vector<int> planted_cuts;  // ground-truth discontinuity indices
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    const double m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

struct Hsv {
    double h, s, v;
};

// Alternating backgrounds chosen so that (a) any switch between the two
// scores far above the 0.27 cut threshold even with sprites on top, and
// (b) either one against an all-black frame still clears the threshold
// with margin (s + v >= 1.35 guarantees that).
inline Hsv background_palette(int idx) {
    static const Hsv palettes[2] = {{0.00, 0.95, 0.45}, {0.50, 0.40, 0.95}};
    return palettes[idx % 2];
}

struct Vec2 {
    double x = 0, y = 0;
};

class FrameCanvas {
public:
    FrameCanvas(Tensor& video, int frame, int h, int w)
        : video_(video), frame_(frame), h_(h), w_(w) {}

    void fill(const Hsv& c) {
        double r, g, b;
        hsv_to_rgb(c.h, c.s, c.v, r, g, b);
        for (int i = 0; i < h_; ++i)
            for (int j = 0; j < w_; ++j) set(i, j, r, g, b);
    }

    void disc(Vec2 center, double radius, const Hsv& c) {
        double r, g, b;
        hsv_to_rgb(c.h, c.s, c.v, r, g, b);
        const int i0 = std::max(0, static_cast<int>(center.y - radius));
        const int i1 = std::min(h_ - 1, static_cast<int>(center.y + radius));
        for (int i = i0; i <= i1; ++i)
            for (int j = std::max(0, static_cast<int>(center.x - radius));
                 j <= std::min(w_ - 1, static_cast<int>(center.x + radius)); ++j) {
                const double dy = i - center.y, dx = j - center.x;
                if (dy * dy + dx * dx <= radius * radius) set(i, j, r, g, b);
            }
    }

    /// 7x7 instrument stamp; the shape is the instrument's identity.
    void stamp(Vec2 center, int shape_id, const Hsv& c) {
        double r, g, b;
        hsv_to_rgb(c.h, c.s, c.v, r, g, b);
        const int ci = static_cast<int>(std::lround(center.y));
        const int cj = static_cast<int>(std::lround(center.x));
        for (int di = -3; di <= 3; ++di)
            for (int dj = -3; dj <= 3; ++dj) {
                bool on = false;
                switch (shape_id % 6) {
                    case 0: on = std::abs(di) <= 1; break;                          // horizontal bar
                    case 1: on = std::abs(dj) <= 1; break;                          // vertical bar
                    case 2: on = std::abs(di) <= 1 || std::abs(dj) <= 1; break;     // cross
                    case 3: on = std::abs(di) <= 2 && std::abs(dj) <= 2; break;     // square
                    case 4: on = std::abs(di) + std::abs(dj) <= 3; break;           // diamond
                    default: on = di >= 1 || dj <= -1; break;                       // corner wedge
                }
                if (!on) continue;
                const int i = ci + di, j = cj + dj;
                if (i >= 0 && i < h_ && j >= 0 && j < w_) set(i, j, r, g, b);
            }
    }

private:
    void set(int i, int j, double r, double g, double b) {
        const std::int64_t hw = static_cast<std::int64_t>(h_) * w_;
        const std::int64_t base = static_cast<std::int64_t>(frame_) * 3 * hw;
        video_[base + static_cast<std::int64_t>(i) * w_ + j] = r;
        video_[base + hw + static_cast<std::int64_t>(i) * w_ + j] = g;
        video_[base + 2 * hw + static_cast<std::int64_t>(i) * w_ + j] = b;
    }

    Tensor& video_;
    int frame_, h_, w_;
};

inline Vec2 clamp_pos(Vec2 p, int h, int w, double margin = 4.0) {
    return {std::clamp(p.x, margin, w - 1 - margin), std::clamp(p.y, margin, h - 1 - margin)};
}

/// Instrument trajectory for one segment; the verb picks the motion law.
inline Vec2 instrument_position(int verb, int f, int len, Vec2 start, Vec2 goal) {
    const double u = len > 1 ? static_cast<double>(f) / (len - 1) : 0.0;
    const Vec2 d{goal.x - start.x, goal.y - start.y};
    switch (verb) {
        case 0:  // approach: close most of the gap
            return {start.x + 0.75 * u * d.x, start.y + 0.75 * u * d.y};
        case 1: {  // oscillate around the midpoint
            const double amp = 3.0 * std::sin(2.0 * M_PI * f / 4.0);
            return {start.x + 0.5 * d.x - amp * d.y * 0.1, start.y + 0.5 * d.y + amp};
        }
        case 2:  // retract: back away from the goal
            return {goal.x + 0.75 * u * (start.x - goal.x), goal.y + 0.75 * u * (start.y - goal.y)};
        case 3: {  // circle the goal
            const double th = 2.0 * M_PI * f / len;
            return {goal.x + 8.0 * std::cos(th), goal.y + 8.0 * std::sin(th)};
        }
        case 4: {  // sweep horizontally
            const double tri = 1.0 - std::fabs(2.0 * u - 1.0);
            return {start.x + (goal.x - start.x) * tri * 1.3, start.y};
        }
        case 5:  // lift straight up
            return {start.x, start.y - 1.5 * f};
        case 6: {  // press: approach quickly, then hold
            const double cu = std::min(1.0, 2.0 * u);
            return {start.x + 0.85 * cu * d.x, start.y + 0.85 * cu * d.y};
        }
        case 7:  // drag: move sideways in lockstep with the target
            return {goal.x + 1.2 * f - 3.0, goal.y + 0.6 * f - 3.0};
        case 8:  // release: slow back-off
            return {goal.x + 0.4 * u * (start.x - goal.x), goal.y + 0.4 * u * (start.y - goal.y)};
        default:  // idle
            return start;
    }
}

}  // namespace detail

/// Renders a procedure video of moving instrument sprites acting on colored
/// target blobs. Each segment carries a fixed action triplet whose verb
/// selects the motion pattern deterministically; per-frame annotations
/// mirror that triplet (plus occasional extra or undefined entries).
/// Bitwise deterministic for a fixed (spec, seed).
inline SynthOutput synth_video(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const Rng base(seed);

    const int black_len = 2;
    const bool blacks = spec.include_black && spec.num_segments > 1;
    const int n_black_runs = blacks ? spec.num_segments - 1 : 0;
    const int total =
        spec.num_segments * spec.segment_len + n_black_runs * black_len;

    SynthOutput out;
    out.video.frames = Tensor(Shape{total, 3, spec.height, spec.width});
    out.video.annotations.resize(static_cast<size_t>(total));

    // target blob anchor grid (5 x 3)
    auto target_anchor = [&](int target_id) {
        const int col = target_id % 5, row = (target_id / 5) % 3;
        return detail::Vec2{6.0 + col * (spec.width - 12.0) / 4.0,
                            6.0 + row * (spec.height - 12.0) / 4.0};
    };

    int frame = 0;
    detail::Vec2 carry_pos{};  // instrument continuity when cuts are disabled
    bool have_carry = false;
    for (int seg = 0; seg < spec.num_segments; ++seg) {
        Rng rng = base.derive(static_cast<std::uint64_t>(seg));

        // black run between segments
        if (blacks && seg > 0) {
            out.planted_cuts.push_back(frame);  // into black
            for (int f = 0; f < black_len; ++f) {
                out.video.annotations[static_cast<size_t>(frame)].phase_id = seg % kNumPhases;
                ++frame;  // frames already zero-initialized
            }
            out.planted_cuts.push_back(frame);  // out of black
        } else if (seg > 0 && spec.include_cuts) {
            out.planted_cuts.push_back(frame);
        }

        ActionTriplet primary;
        primary.instrument_id = static_cast<int>(rng.uniform_int(0, kNumInstruments - 1));
        primary.verb_id = static_cast<int>(rng.uniform_int(0, kNumVerbs - 2));  // exclude idle
        primary.target_id = static_cast<int>(rng.uniform_int(0, kNumTargets - 1));
        const bool static_seg = spec.include_static && seg == std::min(1, spec.num_segments - 1);
        if (static_seg) primary.verb_id = default_no_action_verbs().front();

        const bool extra_triplet = rng.uniform() < 0.3;
        ActionTriplet secondary{static_cast<int>(rng.uniform_int(0, kNumInstruments - 1)),
                                static_cast<int>(rng.uniform_int(0, kNumVerbs - 1)),
                                static_cast<int>(rng.uniform_int(0, kNumTargets - 1))};
        const bool undefined_noise = rng.uniform() < 0.15;
        const int undefined_frame =
            static_cast<int>(rng.uniform_int(0, spec.segment_len - 1));

        const int palette_idx = spec.include_cuts ? seg : 0;
        const detail::Hsv bg = detail::background_palette(palette_idx);
        const detail::Hsv target_color{primary.target_id / 15.0, 0.75, 0.70};
        const detail::Hsv instrument_color{primary.instrument_id / 6.0, 0.55, 0.10};

        const detail::Vec2 goal = target_anchor(primary.target_id);
        detail::Vec2 start{
            static_cast<double>(rng.uniform_int(5, spec.width - 6)),
            static_cast<double>(rng.uniform_int(5, spec.height - 6))};
        if (!spec.include_cuts && have_carry) start = carry_pos;

        for (int f = 0; f < spec.segment_len; ++f, ++frame) {
            detail::FrameCanvas canvas(out.video.frames, frame, spec.height, spec.width);
            canvas.fill(bg);

            detail::Vec2 blob = goal;
            if (primary.verb_id == 7) {  // drag moves the target too
                blob.x += 1.2 * f;
                blob.y += 0.6 * f;
            }
            blob = detail::clamp_pos(blob, spec.height, spec.width);
            canvas.disc(blob, 4.0, target_color);

            detail::Vec2 pos = detail::instrument_position(primary.verb_id, f, spec.segment_len,
                                                           start, blob);
            pos = detail::clamp_pos(pos, spec.height, spec.width);
            if (!static_seg || f == 0) carry_pos = pos;
            canvas.stamp(pos, primary.instrument_id, instrument_color);

            auto& ann = out.video.annotations[static_cast<size_t>(frame)];
            ann.phase_id = seg % kNumPhases;
            ann.triplets.push_back(primary);
            if (extra_triplet) ann.triplets.push_back(secondary);
            if (undefined_noise && f == undefined_frame && ann.triplets.size() < 3)
                ann.triplets.push_back(ActionTriplet{primary.instrument_id, kUndefinedId,
                                                     primary.target_id});
        }
        have_carry = true;
    }

    // Generator self-check: every planted boundary must clear the detection
    // threshold with margin, and no within-segment step may come close.
    const double margin_lo = kDefaultCutThreshold + 0.1;
    std::set<int> planted(out.planted_cuts.begin(), out.planted_cuts.end());
    const int h = spec.height, w = spec.width;
    const std::int64_t fs = static_cast<std::int64_t>(3) * h * w;
    Tensor prev(Shape{3, h, w}), cur(Shape{3, h, w});
    for (int i = 1; i < total; ++i) {
        for (std::int64_t k = 0; k < fs; ++k) {
            prev[k] = out.video.frames[(i - 1) * fs + k];
            cur[k] = out.video.frames[i * fs + k];
        }
        const double score = content_score(prev, cur);
        if (planted.count(i)) {
            if (score < margin_lo)
                throw std::logic_error("planted cut at " + std::to_string(i) +
                                       " scored only " + std::to_string(score));
        } else if (score > kDefaultCutThreshold - 0.02) {
            throw std::logic_error("spurious near-cut motion at frame " + std::to_string(i) +
                                   " (score " + std::to_string(score) + ")");
        }
    }
    return out;
}

}  // namespace tridiff
