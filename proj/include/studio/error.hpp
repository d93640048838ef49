#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace studio {

enum class Errc {
    invalid_argument,
    not_found,
    invalid_state,
    io_error,
    ingest_error,
    render_error,
    invalid_transition,
    decode_error,
    validation_error,
    unsupported_version,
    startup_error,
};

constexpr std::string_view errc_name(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::not_found: return "not-found";
    case Errc::invalid_state: return "invalid-state";
    case Errc::io_error: return "io-error";
    case Errc::ingest_error: return "ingest-error";
    case Errc::render_error: return "render-error";
    case Errc::invalid_transition: return "invalid-transition";
    case Errc::decode_error: return "decode-error";
    case Errc::validation_error: return "validation-error";
    case Errc::unsupported_version: return "unsupported-version";
    case Errc::startup_error: return "startup-error";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the Errc kinds so that
/// the service and CLI can map it to a status code without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

} // namespace studio
