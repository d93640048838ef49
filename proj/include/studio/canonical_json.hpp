#pragma once

// Canonical document writer: keys sorted bytewise at every level, no
// insignificant whitespace, numbers in shortest round-trip form laid out the
// way ECMAScript's Number.prototype.toString does (so a browser's
// JSON.stringify over sorted keys yields the same bytes).

#include "studio/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <system_error>

namespace studio {

using Json = nlohmann::json;

/// Shortest decimal that parses back to exactly `value`. Integral values
/// print without a fraction ("1", not "1.0"); very large or small magnitudes
/// switch to exponent form ("1e+21", "1e-7").
inline std::string format_number(double value) {
    if (!std::isfinite(value)) fail(Errc::invalid_argument, "non-finite number cannot be serialized");
    if (value == 0.0) return "0";

    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
    if (res.ec != std::errc{}) fail(Errc::invalid_argument, "number formatting failed");
    std::string_view sci(buf, static_cast<std::size_t>(res.ptr - buf));

    std::string out;
    if (sci.front() == '-') {
        out.push_back('-');
        sci.remove_prefix(1);
    }
    const auto e_pos = sci.find('e');
    std::string digits;
    for (char c : sci.substr(0, e_pos))
        if (c != '.') digits.push_back(c);
    const int exp10 = std::atoi(std::string(sci.substr(e_pos + 1)).c_str());

    const int k = static_cast<int>(digits.size());
    const int n = exp10 + 1; // value = 0.digits * 10^n
    if (k <= n && n <= 21) {
        out += digits;
        out.append(static_cast<std::size_t>(n - k), '0');
    } else if (0 < n && n <= 21) {
        out += digits.substr(0, static_cast<std::size_t>(n));
        out.push_back('.');
        out += digits.substr(static_cast<std::size_t>(n));
    } else if (-6 < n && n <= 0) {
        out += "0.";
        out.append(static_cast<std::size_t>(-n), '0');
        out += digits;
    } else {
        out.push_back(digits.front());
        if (k > 1) {
            out.push_back('.');
            out += digits.substr(1);
        }
        out.push_back('e');
        out.push_back(n - 1 >= 0 ? '+' : '-');
        out += std::to_string(std::abs(n - 1));
    }
    return out;
}

namespace detail {

inline void append_escaped(std::string& out, std::string_view s) {
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20) {
                char esc[8];
                std::snprintf(esc, sizeof(esc), "\\u%04x", c);
                out += esc;
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    }
    out.push_back('"');
}

inline void append_canonical(std::string& out, const Json& j) {
    switch (j.type()) {
    case Json::value_t::null: out += "null"; break;
    case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case Json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
    case Json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
    case Json::value_t::number_float: out += format_number(j.get<double>()); break;
    case Json::value_t::string: append_escaped(out, j.get_ref<const std::string&>()); break;
    case Json::value_t::array: {
        out.push_back('[');
        bool first = true;
        for (const auto& item : j) {
            if (!first) out.push_back(',');
            first = false;
            append_canonical(out, item);
        }
        out.push_back(']');
        break;
    }
    case Json::value_t::object: {
        // nlohmann's default object_t is a std::map, already in bytewise key order.
        out.push_back('{');
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) out.push_back(',');
            first = false;
            append_escaped(out, key);
            out.push_back(':');
            append_canonical(out, value);
        }
        out.push_back('}');
        break;
    }
    default: fail(Errc::invalid_argument, "unsupported value in canonical document");
    }
}

} // namespace detail

inline std::string canonical_dump(const Json& j) {
    std::string out;
    detail::append_canonical(out, j);
    return out;
}

} // namespace studio
