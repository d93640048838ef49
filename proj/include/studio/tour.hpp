#pragma once

#include "studio/error.hpp"
#include "studio/pyramid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace studio {

/// Complete camera state: centre in native pixels, zoom as screen pixels per
/// native pixel, and time as a (possibly fractional) frame position.
struct View {
    double cx = 0.0;
    double cy = 0.0;
    double scale = 1.0;
    double frame = 0.0;

    friend bool operator==(const View&, const View&) = default;
};

struct Keyframe {
    std::string id;
    View view;
    std::string description;

    friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

enum class TransitionKind { speed, duration };

/// A gap between two consecutive keyframes. For `speed`, value is the
/// playback rate relative to the dataset fps (1.0 = 100%); for `duration`, the
/// wall-clock length in seconds (0 = jump cut).
struct Transition {
    TransitionKind kind = TransitionKind::speed;
    double value = 1.0;
    int loops = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

inline constexpr Transition default_transition{TransitionKind::speed, 1.0, 0};

enum class TourKind { tour, slideshow };

struct Tour {
    std::string dataset;
    TourKind kind = TourKind::tour;
    std::vector<Keyframe> keyframes;
    std::vector<Transition> transitions;

    friend bool operator==(const Tour&, const Tour&) = default;
};

inline std::string_view to_string(TransitionKind k) { return k == TransitionKind::speed ? "speed" : "duration"; }
inline std::string_view to_string(TourKind k) { return k == TourKind::tour ? "tour" : "slideshow"; }

inline std::string transition_problem(const Transition& t) {
    if (!std::isfinite(t.value)) return "value must be finite";
    if (t.kind == TransitionKind::speed && !(t.value > 0.0)) return "speed value must be > 0";
    if (t.kind == TransitionKind::duration && !(t.value >= 0.0)) return "duration value must be >= 0";
    if (t.loops < 0) return "loops must be >= 0";
    return {};
}

/// Empty string when the view is usable against `m`, else the reason.
inline std::string view_problem(const View& v, const DatasetManifest& m) {
    if (!std::isfinite(v.cx) || !std::isfinite(v.cy)) return "centre must be finite";
    if (!std::isfinite(v.scale) || !(v.scale > 0.0)) return "scale must be > 0";
    if (!std::isfinite(v.frame) || v.frame < 0.0 || v.frame > m.frame_count - 1)
        return "frame must lie in [0, " + std::to_string(m.frame_count - 1) + "]";
    return {};
}

inline void require_valid_view(const View& v, const DatasetManifest& m) {
    if (auto why = view_problem(v, m); !why.empty()) fail(Errc::invalid_argument, "invalid view: " + why);
}

/// Well-formed UTF-8 (no overlongs, surrogates or code points past U+10FFFF).
inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        unsigned cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        static constexpr unsigned min_cp[] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < min_cp[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

inline Tour make_tour(std::string dataset, TourKind kind = TourKind::tour) { return Tour{std::move(dataset), kind, {}, {}}; }

namespace detail {

inline std::size_t index_of(const Tour& t, const std::string& id) {
    auto it = std::find_if(t.keyframes.begin(), t.keyframes.end(), [&](const Keyframe& k) { return k.id == id; });
    if (it == t.keyframes.end()) fail(Errc::not_found, "no keyframe with id '" + id + "'");
    return static_cast<std::size_t>(it - t.keyframes.begin());
}

// Ids are decimal counters; the next one is one past the largest in use.
inline std::string fresh_id(const Tour& t) {
    unsigned long long next = 1;
    for (const auto& k : t.keyframes) {
        unsigned long long n = 0;
        auto [p, ec] = std::from_chars(k.id.data(), k.id.data() + k.id.size(), n);
        if (ec == std::errc{} && p == k.id.data() + k.id.size()) next = std::max(next, n + 1);
    }
    return std::to_string(next);
}

inline void check_manifest(const Tour& t, const DatasetManifest& m) {
    if (t.dataset != m.name)
        fail(Errc::invalid_argument, "tour targets dataset '" + t.dataset + "' but manifest is '" + m.name + "'");
}

} // namespace detail

/// Inserts a keyframe at `at` (append when absent). A tour gains a default
/// 100%-speed transition for the newly created gap.
inline Tour add_keyframe(const Tour& tour, const View& view, const DatasetManifest& m,
                         std::optional<std::size_t> at = std::nullopt) {
    detail::check_manifest(tour, m);
    require_valid_view(view, m);
    const std::size_t n = tour.keyframes.size();
    const std::size_t pos = at.value_or(n);
    if (pos > n) fail(Errc::invalid_argument, "insert index " + std::to_string(pos) + " out of range");

    Tour out = tour;
    out.keyframes.insert(out.keyframes.begin() + static_cast<std::ptrdiff_t>(pos), Keyframe{detail::fresh_id(tour), view, {}});
    if (out.kind == TourKind::tour && n >= 1)
        out.transitions.insert(out.transitions.begin() + static_cast<std::ptrdiff_t>(std::min(pos, n - 1)),
                               default_transition);
    return out;
}

/// Removes a keyframe. Its two flanking transitions collapse to the earlier
/// one; an end keyframe takes its single adjacent transition with it.
inline Tour delete_keyframe(const Tour& tour, const std::string& id) {
    const std::size_t i = detail::index_of(tour, id);
    const std::size_t n = tour.keyframes.size();
    Tour out = tour;
    out.keyframes.erase(out.keyframes.begin() + static_cast<std::ptrdiff_t>(i));
    if (out.kind == TourKind::tour && n >= 2) {
        const std::size_t drop = (i == n - 1) ? n - 2 : i;
        out.transitions.erase(out.transitions.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    return out;
}

/// Reorders keyframes only; transitions stay attached to gap positions.
inline Tour move_keyframe(const Tour& tour, const std::string& id, std::size_t to) {
    const std::size_t from = detail::index_of(tour, id);
    if (to >= tour.keyframes.size()) fail(Errc::invalid_argument, "move target " + std::to_string(to) + " out of range");
    Tour out = tour;
    auto& ks = out.keyframes;
    if (from < to)
        std::rotate(ks.begin() + static_cast<std::ptrdiff_t>(from), ks.begin() + static_cast<std::ptrdiff_t>(from) + 1,
                    ks.begin() + static_cast<std::ptrdiff_t>(to) + 1);
    else if (to < from)
        std::rotate(ks.begin() + static_cast<std::ptrdiff_t>(to), ks.begin() + static_cast<std::ptrdiff_t>(from),
                    ks.begin() + static_cast<std::ptrdiff_t>(from) + 1);
    return out;
}

/// Inserts a copy right after the original. The gap between original and
/// copy gets the default transition; the original's outgoing transition now
/// leaves from the copy.
inline Tour duplicate_keyframe(const Tour& tour, const std::string& id) {
    const std::size_t i = detail::index_of(tour, id);
    Tour out = tour;
    Keyframe copy = tour.keyframes[i];
    copy.id = detail::fresh_id(tour);
    out.keyframes.insert(out.keyframes.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::move(copy));
    if (out.kind == TourKind::tour)
        out.transitions.insert(out.transitions.begin() + static_cast<std::ptrdiff_t>(i), default_transition);
    return out;
}

inline Tour update_keyframe_view(const Tour& tour, const std::string& id, const View& view, const DatasetManifest& m) {
    const std::size_t i = detail::index_of(tour, id);
    detail::check_manifest(tour, m);
    require_valid_view(view, m);
    Tour out = tour;
    out.keyframes[i].view = view;
    return out;
}

inline Tour set_description(const Tour& tour, const std::string& id, std::string text) {
    const std::size_t i = detail::index_of(tour, id);
    if (!is_valid_utf8(text)) fail(Errc::invalid_argument, "description must be valid UTF-8");
    Tour out = tour;
    out.keyframes[i].description = std::move(text);
    return out;
}

inline Tour set_transition(const Tour& tour, std::size_t gap, const Transition& t) {
    if (tour.kind == TourKind::slideshow) fail(Errc::invalid_state, "slideshows carry no transitions");
    if (gap >= tour.transitions.size()) fail(Errc::not_found, "no gap " + std::to_string(gap));
    if (auto why = transition_problem(t); !why.empty()) fail(Errc::invalid_argument, "invalid transition: " + why);
    Tour out = tour;
    out.transitions[gap] = t;
    return out;
}

/// Keyframes become slides; every transition is dropped.
inline Tour to_slideshow(const Tour& tour) {
    Tour out = tour;
    out.kind = TourKind::slideshow;
    out.transitions.clear();
    return out;
}

/// Slides become a tour with default transitions in every gap.
inline Tour to_tour(const Tour& slideshow) {
    Tour out = slideshow;
    if (out.kind == TourKind::tour) return out;
    out.kind = TourKind::tour;
    out.transitions.assign(out.keyframes.empty() ? 0 : out.keyframes.size() - 1, default_transition);
    return out;
}

/// Structural check shared by decoding and persistence. Throws
/// validation-error naming the offending field.
inline void validate_tour(const Tour& t, const DatasetManifest* m = nullptr) {
    if (!is_valid_dataset_name(t.dataset)) fail(Errc::validation_error, "dataset: not a valid dataset name");
    const std::size_t expected =
        t.kind == TourKind::slideshow ? 0 : (t.keyframes.empty() ? 0 : t.keyframes.size() - 1);
    if (t.transitions.size() != expected)
        fail(Errc::validation_error, "transitions: expected " + std::to_string(expected) + " entries, got " +
                                         std::to_string(t.transitions.size()));
    for (std::size_t i = 0; i < t.keyframes.size(); ++i) {
        const auto& k = t.keyframes[i];
        const std::string field = "keyframes[" + std::to_string(i) + "]";
        if (k.id.empty()) fail(Errc::validation_error, field + ".id: must not be empty");
        if (!is_valid_utf8(k.id)) fail(Errc::validation_error, field + ".id: must be valid UTF-8");
        if (!is_valid_utf8(k.description)) fail(Errc::validation_error, field + ".desc: must be valid UTF-8");
        for (std::size_t j = 0; j < i; ++j)
            if (t.keyframes[j].id == k.id) fail(Errc::validation_error, field + ".id: duplicate id '" + k.id + "'");
        if (!std::isfinite(k.view.cx)) fail(Errc::validation_error, field + ".cx: must be finite");
        if (!std::isfinite(k.view.cy)) fail(Errc::validation_error, field + ".cy: must be finite");
        if (!std::isfinite(k.view.scale) || !(k.view.scale > 0.0))
            fail(Errc::validation_error, field + ".scale: must be > 0");
        if (!std::isfinite(k.view.frame) || k.view.frame < 0.0)
            fail(Errc::validation_error, field + ".frame: must be >= 0");
        if (m && k.view.frame > m->frame_count - 1)
            fail(Errc::validation_error, field + ".frame: exceeds last frame " + std::to_string(m->frame_count - 1));
    }
    for (std::size_t i = 0; i < t.transitions.size(); ++i)
        if (auto why = transition_problem(t.transitions[i]); !why.empty())
            fail(Errc::validation_error, "transitions[" + std::to_string(i) + "]: " + why);
    if (m && m->name != t.dataset)
        fail(Errc::validation_error, "dataset: tour references '" + t.dataset + "', manifest is '" + m->name + "'");
}

} // namespace studio
