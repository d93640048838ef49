#pragma once

// Compiles tours into wall-clock animations.
//
// Each keyframe gap becomes one Segment. The time track of a segment walks
// `frame_path` frame-steps: directly from the start frame to the end frame
// when loops == 0 (backwards if the end frame is earlier), or forward with
// wraparound for loops > 0, in which case the walk is
// loops * frame_count + ((delta mod frame_count) + frame_count) mod frame_count
// steps and the playhead pauses for 0.5 s every time it arrives at the last
// or the first frame. Space (cx, cy) moves linearly with the active-time
// fraction u, scale moves at a constant zoom rate, and the frame position
// advances linearly along the path.

#include "studio/error.hpp"
#include "studio/pyramid.hpp"
#include "studio/tour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace studio {

inline constexpr double dwell_seconds = 0.5;
inline constexpr double fly_to_seconds = 2.0;

struct DwellEvent {
    double offset_seconds = 0.0; // active time at which the playhead arrives
    double hold_seconds = dwell_seconds;

    friend bool operator==(const DwellEvent&, const DwellEvent&) = default;
};

struct SegmentTiming {
    double active_seconds = 0.0;
    double frame_path = 0.0; // signed frame-steps, loops included
    std::vector<DwellEvent> dwell_events;

    [[nodiscard]] double hold_seconds() const {
        double sum = 0.0;
        for (const auto& d : dwell_events) sum += d.hold_seconds;
        return sum;
    }
    [[nodiscard]] double total_seconds() const { return active_seconds + hold_seconds(); }

    /// Playback rate relative to the dataset fps; nullopt for jumps and
    /// for segments that do not move in time.
    [[nodiscard]] std::optional<double> implied_speed(double fps) const {
        if (active_seconds <= 0.0 || frame_path == 0.0) return std::nullopt;
        return std::abs(frame_path) / (fps * active_seconds);
    }
};

enum class MotionKind { full_motion, time_only, space_only, hold, jump };

inline std::string_view to_string(MotionKind k) {
    switch (k) {
    case MotionKind::full_motion: return "full_motion";
    case MotionKind::time_only: return "time_only";
    case MotionKind::space_only: return "space_only";
    case MotionKind::hold: return "hold";
    case MotionKind::jump: return "jump";
    }
    return "unknown";
}

struct Segment {
    View start_view;
    View end_view;
    Transition transition;
    MotionKind motion = MotionKind::full_motion;
    double active_seconds = 0.0;
    std::vector<DwellEvent> dwell_events;
    double frame_path = 0.0;
    double t_start = 0.0;
    bool wraps = false;  // loops > 0: frame position wraps modulo frame_count
    int frame_count = 0; // 0 = unbounded (no clamping)

    [[nodiscard]] double hold_seconds() const {
        double sum = 0.0;
        for (const auto& d : dwell_events) sum += d.hold_seconds;
        return sum;
    }
    [[nodiscard]] double duration() const { return active_seconds + hold_seconds(); }
    [[nodiscard]] double t_end() const { return t_start + duration(); }
};

struct Timeline {
    std::string dataset;
    int frame_count = 0;
    double fps = 0.0;
    View start_view; // returned for segment-free timelines
    std::vector<Segment> segments;
    double total_seconds = 0.0;
};

/// Timing of one gap. `start_frame` positions the playhead so dwell offsets
/// can be located on the wraparound walk.
inline SegmentTiming segment_duration(const Transition& t, double frame_delta, double fps, int frame_count,
                                      double start_frame = 0.0) {
    if (!(fps > 0.0) || !std::isfinite(fps)) fail(Errc::invalid_argument, "fps must be positive");
    if (auto why = transition_problem(t); !why.empty()) fail(Errc::invalid_transition, why);
    if (frame_count < 1) fail(Errc::invalid_argument, "frame_count must be >= 1");
    if (!std::isfinite(frame_delta) || std::abs(frame_delta) > frame_count - 1)
        fail(Errc::invalid_argument, "frame delta exceeds the timelapse length");
    if (t.loops > 0 && frame_count < 2)
        fail(Errc::invalid_transition, "looping requires at least two frames");

    const double n = frame_count;
    SegmentTiming out;
    if (t.loops == 0) {
        out.frame_path = frame_delta;
    } else {
        out.frame_path = t.loops * n + std::fmod(std::fmod(frame_delta, n) + n, n);
    }

    if (t.kind == TransitionKind::speed) {
        if (out.frame_path == 0.0) fail(Errc::invalid_transition, "speed transition requires differing times");
        out.active_seconds = std::abs(out.frame_path) / (fps * t.value);
    } else {
        out.active_seconds = t.value;
    }

    if (t.loops > 0 && out.active_seconds > 0.0) {
        // Arrival steps s in (0, path] where start_frame + s hits frame n-1 or 0 (mod n).
        std::vector<double> steps;
        for (double target : {n - 1.0, 0.0}) {
            double base = std::fmod(std::fmod(target - start_frame, n) + n, n);
            if (base <= 0.0) base += n;
            for (double s = base; s <= out.frame_path; s += n) steps.push_back(s);
        }
        std::sort(steps.begin(), steps.end());
        for (double s : steps) out.dwell_events.push_back({out.active_seconds * s / out.frame_path, dwell_seconds});
    }
    return out;
}

namespace detail {

inline bool same_space(const View& a, const View& b) { return a.cx == b.cx && a.cy == b.cy && a.scale == b.scale; }

inline double lerp(double a, double b, double u) { return a + (b - a) * u; }

} // namespace detail

/// Which of the five camera motions a keyframe pair performs. Time counts as
/// moving when the frames differ or the gap loops through the timelapse.
inline MotionKind classify_motion(const View& from, const View& to, const Transition& t) {
    if (t.kind == TransitionKind::duration && t.value == 0.0) return MotionKind::jump;
    const bool space_moves = !detail::same_space(from, to);
    const bool time_moves = from.frame != to.frame || t.loops > 0;
    if (!space_moves && !time_moves) return MotionKind::hold;
    if (!space_moves) return MotionKind::time_only;
    if (!time_moves) return MotionKind::space_only;
    return MotionKind::full_motion;
}

inline MotionKind classify_motion(const Keyframe& from, const Keyframe& to, const Transition& t) {
    return classify_motion(from.view, to.view, t);
}

namespace detail {

inline Segment make_segment(const View& from, const View& to, const Transition& t, double fps, int frame_count) {
    Segment seg;
    seg.start_view = from;
    seg.end_view = to;
    seg.transition = t;
    seg.motion = classify_motion(from, to, t);
    seg.wraps = t.loops > 0;
    seg.frame_count = frame_count;
    if (frame_count > 0) {
        auto timing = segment_duration(t, to.frame - from.frame, fps, frame_count, from.frame);
        seg.active_seconds = timing.active_seconds;
        seg.frame_path = timing.frame_path;
        seg.dwell_events = std::move(timing.dwell_events);
    } else {
        // Unbounded time track (fly-to): direct traversal, fixed duration only.
        seg.active_seconds = t.value;
        seg.frame_path = to.frame - from.frame;
    }
    return seg;
}

inline void lay_out(Timeline& tl) {
    double t = 0.0;
    for (auto& seg : tl.segments) {
        seg.t_start = t;
        t += seg.duration();
    }
    tl.total_seconds = t;
}

} // namespace detail

inline Timeline compile_tour(const Tour& tour, const DatasetManifest& m) {
    if (tour.kind != TourKind::tour) fail(Errc::invalid_argument, "only tours compile to timelines");
    if (tour.keyframes.empty()) fail(Errc::invalid_argument, "tour has no keyframes");
    if (tour.transitions.size() != tour.keyframes.size() - 1)
        fail(Errc::invalid_argument, "tour needs exactly one transition per keyframe gap");
    if (tour.dataset != m.name) fail(Errc::invalid_argument, "tour targets dataset '" + tour.dataset + "'");
    for (std::size_t i = 0; i < tour.keyframes.size(); ++i)
        if (auto why = view_problem(tour.keyframes[i].view, m); !why.empty())
            fail(Errc::invalid_argument, "keyframe " + std::to_string(i) + ": " + why);

    Timeline tl;
    tl.dataset = tour.dataset;
    tl.frame_count = m.frame_count;
    tl.fps = m.fps;
    tl.start_view = tour.keyframes.front().view;
    for (std::size_t gap = 0; gap < tour.transitions.size(); ++gap) {
        try {
            tl.segments.push_back(detail::make_segment(tour.keyframes[gap].view, tour.keyframes[gap + 1].view,
                                                       tour.transitions[gap], m.fps, m.frame_count));
        } catch (const Error& e) {
            fail(e.code(), "gap " + std::to_string(gap) + ": " + e.detail());
        }
    }
    detail::lay_out(tl);
    return tl;
}

/// Fixed-length animated move from the current camera to a slide.
inline Timeline fly_to(const View& current, const Keyframe& target) {
    Timeline tl;
    tl.start_view = current;
    tl.segments.push_back(
        detail::make_segment(current, target.view, Transition{TransitionKind::duration, fly_to_seconds, 0}, 0.0, 0));
    detail::lay_out(tl);
    return tl;
}

/// View of one segment after `local` seconds (dwell holds included).
inline View sample_segment(const Segment& seg, double local) {
    if (seg.active_seconds <= 0.0 && seg.dwell_events.empty()) return seg.end_view;

    double active = local;
    for (const auto& d : seg.dwell_events) {
        if (active <= d.offset_seconds) break;
        if (active <= d.offset_seconds + d.hold_seconds) {
            active = d.offset_seconds; // frozen
            break;
        }
        active -= d.hold_seconds;
    }
    if (active <= 0.0) return seg.start_view;
    if (active >= seg.active_seconds) return seg.end_view;

    const double u = active / seg.active_seconds;
    const View& a = seg.start_view;
    const View& b = seg.end_view;
    View v;
    v.cx = detail::lerp(a.cx, b.cx, u);
    v.cy = detail::lerp(a.cy, b.cy, u);
    v.scale = a.scale == b.scale ? a.scale : a.scale * std::pow(b.scale / a.scale, u);
    double frame = a.frame + u * seg.frame_path;
    if (seg.wraps && seg.frame_count > 0) frame = std::fmod(frame, static_cast<double>(seg.frame_count));
    if (seg.frame_count > 0) frame = std::clamp(frame, 0.0, static_cast<double>(seg.frame_count - 1));
    v.frame = frame;
    return v;
}

/// Camera state at `wall_time`. At a join between segments the later
/// segment's start view wins, so zero-length (jump) segments show their
/// destination.
inline View sample(const Timeline& tl, double wall_time) {
    if (!(wall_time >= 0.0 && wall_time <= tl.total_seconds))
        fail(Errc::invalid_argument, "wall time outside [0, " + format_number(tl.total_seconds) + "]");
    if (tl.segments.empty()) return tl.start_view;
    auto it = std::upper_bound(tl.segments.begin(), tl.segments.end(), wall_time,
                               [](double t, const Segment& s) { return t < s.t_start; });
    const Segment& seg = *std::prev(it);
    return sample_segment(seg, wall_time - seg.t_start);
}

/// Wall time at which each keyframe is reached (one entry per keyframe).
inline std::vector<double> keyframe_times(const Timeline& tl) {
    std::vector<double> out;
    for (const auto& s : tl.segments) out.push_back(s.t_start);
    out.push_back(tl.total_seconds);
    return out;
}

inline std::string timeline_report(const Timeline& tl) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "dataset %s: %zu segment(s), total %.3f s\n", tl.dataset.c_str(),
                  tl.segments.size(), tl.total_seconds);
    os << line;
    for (std::size_t i = 0; i < tl.segments.size(); ++i) {
        const auto& s = tl.segments[i];
        std::snprintf(line, sizeof(line),
                      "  gap %zu: %-11s start %.3f s  active %.3f s  frame_path %s  dwells %zu (%.3f s)\n", i,
                      std::string(to_string(s.motion)).c_str(), s.t_start, s.active_seconds,
                      format_number(s.frame_path).c_str(), s.dwell_events.size(), s.hold_seconds());
        os << line;
    }
    std::snprintf(line, sizeof(line), "total duration %.3f s\n", tl.total_seconds);
    os << line;
    return os.str();
}

} // namespace studio
