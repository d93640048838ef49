#pragma once

// Share-link codec.
//
// Tour fragment:  tour=<base64url, no padding, of the canonical document>
// View fragment:  v=<cx>,<cy>,<scale>&t=<frame>
//
// Document (version 1), keys sorted:
//   {"dataset":..,"keyframes":[{"cx","cy","desc","frame","id","scale"}],
//    "kind":"tour"|"slideshow","transitions":[{"kind","loops","value"}],"version":1}

#include "studio/canonical_json.hpp"
#include "studio/error.hpp"
#include "studio/pyramid.hpp"
#include "studio/tour.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace studio {

inline constexpr int tour_document_version = 1;
inline constexpr std::string_view tour_fragment_prefix = "tour=";

namespace base64url {

inline constexpr std::string_view alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

inline std::string encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() * 4 + 2) / 3);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) |
                                (static_cast<std::uint8_t>(bytes[i + 1]) << 8) | static_cast<std::uint8_t>(bytes[i + 2]);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
    } else if (rest == 2) {
        const std::uint32_t v = (static_cast<std::uint8_t>(bytes[i]) << 16) | (static_cast<std::uint8_t>(bytes[i + 1]) << 8);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
    }
    return out;
}

/// Strict decode: no padding, no whitespace, unused trailing bits must be zero.
inline std::string decode(std::string_view text) {
    static constexpr auto table = [] {
        std::array<int, 256> t{};
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(alphabet[static_cast<std::size_t>(i)])] = i;
        return t;
    }();
    if (text.size() % 4 == 1) fail(Errc::decode_error, "base64url length is impossible (truncated?)");
    std::string out;
    out.reserve(text.size() * 3 / 4);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        const int v = table[static_cast<unsigned char>(c)];
        if (v < 0) fail(Errc::decode_error, "invalid base64url character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xFF));
        }
    }
    if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) fail(Errc::decode_error, "non-canonical base64url tail");
    return out;
}

} // namespace base64url

inline Json tour_to_json(const Tour& t) {
    Json keyframes = Json::array();
    for (const auto& k : t.keyframes)
        keyframes.push_back({{"id", k.id},
                             {"cx", k.view.cx},
                             {"cy", k.view.cy},
                             {"scale", k.view.scale},
                             {"frame", k.view.frame},
                             {"desc", k.description}});
    Json transitions = Json::array();
    for (const auto& tr : t.transitions)
        transitions.push_back({{"kind", std::string(to_string(tr.kind))}, {"value", tr.value}, {"loops", tr.loops}});
    return {{"version", tour_document_version},
            {"dataset", t.dataset},
            {"kind", std::string(to_string(t.kind))},
            {"keyframes", std::move(keyframes)},
            {"transitions", std::move(transitions)}};
}

inline std::string canonical_tour_document(const Tour& t) { return canonical_dump(tour_to_json(t)); }

namespace detail {

inline const Json& field(const Json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(Errc::validation_error, path + key + ": missing");
    return *it;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> known, const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || key == k;
        if (!ok) fail(Errc::validation_error, path + key + ": unknown field");
    }
}

inline double number_field(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number()) fail(Errc::validation_error, path + key + ": must be a number");
    return v.get<double>();
}

inline std::string string_field(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_string()) fail(Errc::validation_error, path + key + ": must be a string");
    return v.get<std::string>();
}

inline long long integer_field(const Json& obj, const std::string& key, const std::string& path) {
    const auto& v = field(obj, key, path);
    if (!v.is_number_integer()) fail(Errc::validation_error, path + key + ": must be an integer");
    return v.get<long long>();
}

} // namespace detail

/// Parses and validates a tour document. Version is checked first so
/// documents from a future schema report unsupported-version.
inline Tour tour_from_json(const Json& doc, const DatasetManifest* manifest = nullptr) {
    using namespace detail;
    if (!doc.is_object()) fail(Errc::validation_error, "document: must be an object");
    if (!doc.contains("version")) fail(Errc::validation_error, "version: missing");
    if (!doc["version"].is_number_integer()) fail(Errc::validation_error, "version: must be an integer");
    if (doc["version"].get<long long>() != tour_document_version)
        fail(Errc::unsupported_version, "document version " + doc["version"].dump() + " is not supported");
    reject_unknown(doc, {"version", "dataset", "kind", "keyframes", "transitions"}, "");

    Tour t;
    t.dataset = string_field(doc, "dataset", "");
    const auto kind = string_field(doc, "kind", "");
    if (kind == "tour")
        t.kind = TourKind::tour;
    else if (kind == "slideshow")
        t.kind = TourKind::slideshow;
    else
        fail(Errc::validation_error, "kind: must be \"tour\" or \"slideshow\"");

    const auto& keyframes = field(doc, "keyframes", "");
    if (!keyframes.is_array()) fail(Errc::validation_error, "keyframes: must be an array");
    for (std::size_t i = 0; i < keyframes.size(); ++i) {
        const std::string path = "keyframes[" + std::to_string(i) + "].";
        const auto& k = keyframes[i];
        if (!k.is_object()) fail(Errc::validation_error, path.substr(0, path.size() - 1) + ": must be an object");
        reject_unknown(k, {"id", "cx", "cy", "scale", "frame", "desc"}, path);
        Keyframe kf;
        kf.id = string_field(k, "id", path);
        kf.view = View{number_field(k, "cx", path), number_field(k, "cy", path), number_field(k, "scale", path),
                       number_field(k, "frame", path)};
        kf.description = string_field(k, "desc", path);
        t.keyframes.push_back(std::move(kf));
    }

    const auto& transitions = field(doc, "transitions", "");
    if (!transitions.is_array()) fail(Errc::validation_error, "transitions: must be an array");
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const std::string path = "transitions[" + std::to_string(i) + "].";
        const auto& tr = transitions[i];
        if (!tr.is_object()) fail(Errc::validation_error, path.substr(0, path.size() - 1) + ": must be an object");
        reject_unknown(tr, {"kind", "value", "loops"}, path);
        Transition x;
        const auto tk = string_field(tr, "kind", path);
        if (tk == "speed")
            x.kind = TransitionKind::speed;
        else if (tk == "duration")
            x.kind = TransitionKind::duration;
        else
            fail(Errc::validation_error, path + "kind: must be \"speed\" or \"duration\"");
        x.value = number_field(tr, "value", path);
        const auto loops = integer_field(tr, "loops", path);
        if (loops < 0 || loops > 1'000'000) fail(Errc::validation_error, path + "loops: out of range");
        x.loops = static_cast<int>(loops);
        t.transitions.push_back(x);
    }

    validate_tour(t, manifest);
    return t;
}

inline Tour parse_tour_document(std::string_view text, const DatasetManifest* manifest = nullptr) {
    Json doc = Json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) fail(Errc::decode_error, "tour document is not valid JSON");
    return tour_from_json(doc, manifest);
}

struct ShareLink {
    std::string fragment;

    friend bool operator==(const ShareLink&, const ShareLink&) = default;
};

inline ShareLink encode_tour(const Tour& t) {
    return {std::string(tour_fragment_prefix) + base64url::encode(canonical_tour_document(t))};
}

inline Tour decode_tour(std::string_view fragment, const DatasetManifest* manifest = nullptr) {
    if (!fragment.empty() && fragment.front() == '#') fragment.remove_prefix(1);
    if (!fragment.starts_with(tour_fragment_prefix)) fail(Errc::decode_error, "fragment does not start with 'tour='");
    fragment.remove_prefix(tour_fragment_prefix.size());
    return parse_tour_document(base64url::decode(fragment), manifest);
}

inline std::string encode_view(const View& v) {
    return "v=" + format_number(v.cx) + "," + format_number(v.cy) + "," + format_number(v.scale) +
           "&t=" + format_number(v.frame);
}

namespace detail {

inline double parse_real(std::string_view s) {
    double v = 0.0;
    if (s.empty() || s.front() == '+') fail(Errc::decode_error, "malformed number '" + std::string(s) + "'");
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        fail(Errc::decode_error, "malformed number '" + std::string(s) + "'");
    return v;
}

} // namespace detail

inline View decode_view(std::string_view fragment, const DatasetManifest* manifest = nullptr) {
    if (!fragment.empty() && fragment.front() == '#') fragment.remove_prefix(1);
    if (!fragment.starts_with("v=")) fail(Errc::decode_error, "view fragment must start with 'v='");
    fragment.remove_prefix(2);
    const auto amp = fragment.find("&t=");
    if (amp == std::string_view::npos) fail(Errc::decode_error, "view fragment lacks '&t='");
    const auto space = fragment.substr(0, amp);
    const auto time = fragment.substr(amp + 3);

    std::vector<std::string_view> parts;
    for (std::size_t start = 0;;) {
        const auto comma = space.find(',', start);
        parts.push_back(space.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 3) fail(Errc::decode_error, "view needs exactly cx,cy,scale");
    View v{detail::parse_real(parts[0]), detail::parse_real(parts[1]), detail::parse_real(parts[2]),
           detail::parse_real(time)};
    if (!(v.scale > 0.0)) fail(Errc::validation_error, "scale: must be > 0");
    if (v.frame < 0.0) fail(Errc::validation_error, "frame: must be >= 0");
    if (manifest)
        if (auto why = view_problem(v, *manifest); !why.empty()) fail(Errc::validation_error, why);
    return v;
}

} // namespace studio
