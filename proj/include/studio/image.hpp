#pragma once

#include "studio/error.hpp"

#include <png.h>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace studio {

/// 8-bit interleaved RGB raster, row-major, no padding.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {}

    [[nodiscard]] std::size_t offset(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    }
    [[nodiscard]] std::uint8_t at(int x, int y, int channel) const noexcept { return pixels[offset(x, y) + channel]; }
    std::uint8_t& at(int x, int y, int channel) noexcept { return pixels[offset(x, y) + channel]; }

    friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::io_error, "cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(Errc::io_error, "short write to " + path.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) fail(Errc::io_error, "cannot rename into " + path.string() + ": " + ec.message());
}

} // namespace detail

inline Image decode_png(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>") {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(Errc::io_error, "cannot decode " + name + ": " + msg);
    }
    png.format = PNG_FORMAT_RGB;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(Errc::io_error, "cannot decode " + name + ": " + msg);
    }
    return img;
}

inline Image read_png(const std::filesystem::path& path) {
    auto bytes = detail::read_file_bytes(path);
    return decode_png(bytes, path.string());
}

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.pixels.data(), 0, nullptr))
        fail(Errc::io_error, std::string("png sizing failed: ") + png.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.pixels.data(), 0, nullptr))
        fail(Errc::io_error, std::string("png encode failed: ") + png.message);
    out.resize(size);
    return out;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
    auto bytes = encode_png(img);
    detail::write_file_atomic(path, bytes);
}

} // namespace studio
