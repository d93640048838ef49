#pragma once

#include "studio/canonical_json.hpp"
#include "studio/error.hpp"
#include "studio/image.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace studio {

namespace fs = std::filesystem;

inline constexpr int default_tile_size = 256;

/// Geometry and timing of one ingested timelapse. Level 0 is the coarsest
/// (whole image inside one tile); level `levels - 1` is native resolution.
struct DatasetManifest {
    std::string name;
    int width = 0;
    int height = 0;
    int tile_size = default_tile_size;
    int levels = 1;
    int frame_count = 0;
    double fps = 0.0;
    std::optional<std::vector<std::string>> frame_labels;
    std::string tile_format = "png";

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;

    /// Native pixels covered by one pixel of `level`.
    [[nodiscard]] int downsample_factor(int level) const { return 1 << (levels - 1 - level); }
    [[nodiscard]] int level_width(int level) const { return ceil_div(width, downsample_factor(level)); }
    [[nodiscard]] int level_height(int level) const { return ceil_div(height, downsample_factor(level)); }
    [[nodiscard]] int tiles_x(int level) const { return ceil_div(level_width(level), tile_size); }
    [[nodiscard]] int tiles_y(int level) const { return ceil_div(level_height(level), tile_size); }

    static int ceil_div(int a, int b) { return (a + b - 1) / b; }
};

struct TileAddress {
    int frame = 0;
    int level = 0;
    int col = 0;
    int row = 0;

    friend bool operator==(const TileAddress&, const TileAddress&) = default;
};

inline std::string to_string(const TileAddress& a) {
    return "(frame " + std::to_string(a.frame) + ", level " + std::to_string(a.level) + ", col " +
           std::to_string(a.col) + ", row " + std::to_string(a.row) + ")";
}

struct Tile {
    TileAddress address;
    Image pixels; // always tile_size x tile_size
};

/// max(1, ceil(log2(max(width, height) / tile_size)) + 1), computed in integers.
inline int compute_level_count(int width, int height, int tile_size) {
    if (width < 1 || height < 1 || tile_size < 1)
        fail(Errc::invalid_argument, "width, height and tile_size must be >= 1");
    const long long extent = std::max(width, height);
    int k = 0;
    while (static_cast<long long>(tile_size) << k < extent) ++k;
    return k + 1;
}

inline bool is_valid_dataset_name(std::string_view name) {
    if (name.empty() || name.size() > 128 || name.front() == '.') return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

inline void validate_manifest(const DatasetManifest& m) {
    if (!is_valid_dataset_name(m.name)) fail(Errc::validation_error, "manifest.name is not a valid identifier");
    if (m.width < 1 || m.height < 1 || m.tile_size < 1 || m.frame_count < 1)
        fail(Errc::validation_error, "manifest dimensions and frame_count must be >= 1");
    if (!(m.fps > 0.0) || !std::isfinite(m.fps)) fail(Errc::validation_error, "manifest.fps must be positive");
    if (m.levels != compute_level_count(m.width, m.height, m.tile_size))
        fail(Errc::validation_error, "manifest.levels inconsistent with geometry");
    if (m.frame_labels && static_cast<int>(m.frame_labels->size()) != m.frame_count)
        fail(Errc::validation_error, "manifest.frame_labels length must equal frame_count");
    if (m.tile_format != "png") fail(Errc::validation_error, "manifest.tile_format must be \"png\"");
}

inline Json manifest_to_json(const DatasetManifest& m) {
    Json j = {{"name", m.name},           {"width", m.width},   {"height", m.height},
              {"tile_size", m.tile_size}, {"levels", m.levels}, {"frame_count", m.frame_count},
              {"fps", m.fps},             {"tile_format", m.tile_format}};
    if (m.frame_labels) j["frame_labels"] = *m.frame_labels;
    return j;
}

inline DatasetManifest manifest_from_json(const Json& j) {
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.tile_size = j.at("tile_size").get<int>();
        m.levels = j.at("levels").get<int>();
        m.frame_count = j.at("frame_count").get<int>();
        m.fps = j.at("fps").get<double>();
        m.tile_format = j.at("tile_format").get<std::string>();
        if (j.contains("frame_labels")) m.frame_labels = j.at("frame_labels").get<std::vector<std::string>>();
    } catch (const Json::exception& e) {
        fail(Errc::validation_error, std::string("malformed manifest: ") + e.what());
    }
    validate_manifest(m);
    return m;
}

// ---------------------------------------------------------------------------
// Downsampling

/// Halves an image with a 2x2 box filter. Parent size is ceil(child / 2); at
/// odd edges only the in-bounds children are averaged. Rounds half up.
inline Image downsample_half(const Image& src) {
    Image dst((src.width + 1) / 2, (src.height + 1) / 2);
    for (int y = 0; y < dst.height; ++y) {
        const int y0 = 2 * y;
        const int y1 = std::min(y0 + 1, src.height - 1);
        for (int x = 0; x < dst.width; ++x) {
            const int x0 = 2 * x;
            const int x1 = std::min(x0 + 1, src.width - 1);
            const int n = (x1 - x0 + 1) * (y1 - y0 + 1);
            for (int c = 0; c < 3; ++c) {
                int sum = src.at(x0, y0, c);
                if (x1 != x0) sum += src.at(x1, y0, c);
                if (y1 != y0) sum += src.at(x0, y1, c);
                if (x1 != x0 && y1 != y0) sum += src.at(x1, y1, c);
                dst.at(x, y, c) = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
            }
        }
    }
    return dst;
}

/// Copies a tile_size square starting at (x0, y0); out-of-image area is black.
inline Image crop_padded(const Image& src, int x0, int y0, int tile_size) {
    Image tile(tile_size, tile_size);
    const int w = std::min(tile_size, src.width - x0);
    const int h = std::min(tile_size, src.height - y0);
    for (int y = 0; y < h; ++y) {
        const auto* from = src.pixels.data() + src.offset(x0, y0 + y);
        std::copy(from, from + static_cast<std::ptrdiff_t>(w) * 3, tile.pixels.data() + tile.offset(0, y));
    }
    return tile;
}

// ---------------------------------------------------------------------------
// On-disk dataset

inline fs::path dataset_dir(const fs::path& data_dir, const std::string& name) { return data_dir / name; }
inline fs::path manifest_path(const fs::path& data_dir, const std::string& name) {
    return dataset_dir(data_dir, name) / "manifest.json";
}
inline fs::path tile_path(const fs::path& data_dir, const std::string& name, const TileAddress& a) {
    return dataset_dir(data_dir, name) / "tiles" / std::to_string(a.frame) / std::to_string(a.level) /
           (std::to_string(a.col) + "_" + std::to_string(a.row) + ".png");
}

inline void write_manifest(const fs::path& data_dir, const DatasetManifest& m) {
    const std::string doc = canonical_dump(manifest_to_json(m));
    detail::write_file_atomic(manifest_path(data_dir, m.name),
                              {reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()});
}

inline DatasetManifest read_manifest(const fs::path& data_dir, const std::string& name) {
    if (!is_valid_dataset_name(name)) fail(Errc::not_found, "unknown dataset '" + name + "'");
    const auto path = manifest_path(data_dir, name);
    if (!fs::exists(path)) fail(Errc::not_found, "unknown dataset '" + name + "'");
    auto bytes = detail::read_file_bytes(path);
    Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) fail(Errc::io_error, "manifest for '" + name + "' is not valid JSON");
    auto m = manifest_from_json(j);
    if (m.name != name) fail(Errc::validation_error, "manifest name does not match directory '" + name + "'");
    return m;
}

/// Lists every dataset under data_dir that carries a readable manifest, by name.
inline std::vector<DatasetManifest> list_datasets(const fs::path& data_dir) {
    std::vector<DatasetManifest> out;
    std::error_code ec;
    if (!fs::is_directory(data_dir, ec)) return out;
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(data_dir, ec)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && is_valid_dataset_name(name) && fs::exists(entry.path() / "manifest.json"))
            names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        try {
            out.push_back(read_manifest(data_dir, name));
        } catch (const Error&) {
            // half-written or foreign directories are not datasets
        }
    }
    return out;
}

inline bool address_in_range(const DatasetManifest& m, const TileAddress& a) {
    if (a.frame < 0 || a.frame >= m.frame_count || a.level < 0 || a.level >= m.levels) return false;
    return a.col >= 0 && a.row >= 0 && a.col < m.tiles_x(a.level) && a.row < m.tiles_y(a.level);
}

/// Reads one tile. Out-of-range addresses are not-found; missing, unreadable
/// or wrongly sized files are io-errors.
inline Tile load_tile(const fs::path& data_dir, const DatasetManifest& m, const TileAddress& a) {
    if (!address_in_range(m, a)) fail(Errc::not_found, "tile " + to_string(a) + " outside dataset '" + m.name + "'");
    const auto path = tile_path(data_dir, m.name, a);
    std::vector<std::uint8_t> bytes;
    try {
        bytes = detail::read_file_bytes(path);
    } catch (const Error&) {
        fail(Errc::io_error, "tile " + to_string(a) + " missing at " + path.string());
    }
    Image img = decode_png(bytes, path.string());
    if (img.width != m.tile_size || img.height != m.tile_size)
        fail(Errc::io_error, "tile " + to_string(a) + " has wrong dimensions");
    return {a, std::move(img)};
}

/// Thread-safe least-recently-used cache of decoded tiles for one dataset.
class TileCache {
public:
    static constexpr std::size_t default_capacity = 512;

    TileCache(fs::path data_dir, DatasetManifest manifest, std::size_t capacity = default_capacity)
        : data_dir_(std::move(data_dir)), manifest_(std::move(manifest)), capacity_(std::max<std::size_t>(1, capacity)) {}

    [[nodiscard]] const DatasetManifest& manifest() const noexcept { return manifest_; }
    [[nodiscard]] const fs::path& data_dir() const noexcept { return data_dir_; }

    std::shared_ptr<const Image> get(const TileAddress& a) {
        const auto key = pack(a);
        {
            std::lock_guard lock(mutex_);
            if (auto it = index_.find(key); it != index_.end()) {
                order_.splice(order_.begin(), order_, it->second);
                ++hits_;
                return it->second->second;
            }
        }
        // Decode outside the lock; a racing duplicate decode is harmless since tiles are immutable.
        auto img = std::make_shared<const Image>(load_tile(data_dir_, manifest_, a).pixels);
        std::lock_guard lock(mutex_);
        ++misses_;
        if (auto it = index_.find(key); it != index_.end()) return it->second->second;
        order_.emplace_front(key, img);
        index_.emplace(key, order_.begin());
        while (order_.size() > capacity_) {
            index_.erase(order_.back().first);
            order_.pop_back();
        }
        return img;
    }

    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return order_.size();
    }
    [[nodiscard]] std::size_t misses() const {
        std::lock_guard lock(mutex_);
        return misses_;
    }

private:
    static std::uint64_t pack(const TileAddress& a) {
        return (static_cast<std::uint64_t>(a.frame) << 40) | (static_cast<std::uint64_t>(a.level) << 34) |
               (static_cast<std::uint64_t>(a.col) << 17) | static_cast<std::uint64_t>(a.row);
    }

    fs::path data_dir_;
    DatasetManifest manifest_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::list<std::pair<std::uint64_t, std::shared_ptr<const Image>>> order_;
    std::unordered_map<std::uint64_t, decltype(order_)::iterator> index_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

// ---------------------------------------------------------------------------
// Ingestion

struct IngestOptions {
    fs::path input_dir;
    fs::path data_dir;
    std::string name;
    int tile_size = default_tile_size;
    double fps = 10.0;
    std::optional<std::vector<std::string>> frame_labels;
    unsigned threads = 0; // 0 = hardware concurrency
};

namespace detail {

inline bool has_png_extension(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

inline std::pair<int, int> png_dimensions(const fs::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
        std::string msg = png.message;
        png_image_free(&png);
        fail(Errc::ingest_error, "unreadable image " + path.filename().string() + ": " + msg);
    }
    std::pair<int, int> dims{static_cast<int>(png.width), static_cast<int>(png.height)};
    png_image_free(&png);
    return dims;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception by index order is rethrown after all workers stop.
template <class Body>
void parallel_for(int count, unsigned threads, Body&& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(count, 1)));
    std::atomic<int> next{0};
    std::atomic<bool> stop{false};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    auto worker = [&] {
        for (int i; !stop && (i = next.fetch_add(1)) < count;) {
            try {
                body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
                stop = true;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

/// Tiles every PNG in input_dir (lexicographic filename order = frame order)
/// into <data_dir>/<name>/ and writes the manifest last.
inline DatasetManifest ingest_frames(const IngestOptions& opt) {
    if (!is_valid_dataset_name(opt.name)) fail(Errc::invalid_argument, "invalid dataset name '" + opt.name + "'");
    if (opt.tile_size < 1) fail(Errc::invalid_argument, "tile_size must be >= 1");
    if (!(opt.fps > 0.0) || !std::isfinite(opt.fps)) fail(Errc::invalid_argument, "fps must be positive");

    std::error_code ec;
    if (!fs::is_directory(opt.input_dir, ec))
        fail(Errc::ingest_error, "input directory " + opt.input_dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opt.input_dir))
        if (entry.is_regular_file() && detail::has_png_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (files.empty()) fail(Errc::ingest_error, "no .png frames in " + opt.input_dir.string());

    const auto [width, height] = detail::png_dimensions(files.front());
    for (const auto& f : files) {
        const auto dims = detail::png_dimensions(f);
        if (dims.first != width || dims.second != height)
            fail(Errc::ingest_error, "frame " + f.filename().string() + " is " + std::to_string(dims.first) + "x" +
                                         std::to_string(dims.second) + ", expected " + std::to_string(width) + "x" +
                                         std::to_string(height));
    }

    DatasetManifest m;
    m.name = opt.name;
    m.width = width;
    m.height = height;
    m.tile_size = opt.tile_size;
    m.levels = compute_level_count(width, height, opt.tile_size);
    m.frame_count = static_cast<int>(files.size());
    m.fps = opt.fps;
    m.frame_labels = opt.frame_labels;
    if (m.frame_labels && static_cast<int>(m.frame_labels->size()) != m.frame_count)
        fail(Errc::invalid_argument, "frame label count " + std::to_string(m.frame_labels->size()) +
                                         " does not match frame count " + std::to_string(m.frame_count));

    if (fs::exists(manifest_path(opt.data_dir, m.name)))
        fail(Errc::ingest_error, "dataset '" + m.name + "' already exists");
    fs::create_directories(dataset_dir(opt.data_dir, m.name));

    detail::parallel_for(m.frame_count, opt.threads, [&](int frame) {
        const auto& file = files[static_cast<std::size_t>(frame)];
        Image level_img;
        try {
            level_img = read_png(file);
        } catch (const Error& e) {
            fail(Errc::ingest_error, "unreadable image " + file.filename().string() + ": " + e.detail());
        }
        for (int level = m.levels - 1; level >= 0; --level) {
            if (level != m.levels - 1) level_img = downsample_half(level_img);
            for (int row = 0; row < m.tiles_y(level); ++row)
                for (int col = 0; col < m.tiles_x(level); ++col)
                    write_png(tile_path(opt.data_dir, m.name, {frame, level, col, row}),
                              crop_padded(level_img, col * m.tile_size, row * m.tile_size, m.tile_size));
        }
    });

    write_manifest(opt.data_dir, m);
    return m;
}

// ---------------------------------------------------------------------------
// Synthetic fixture

/// Fixture colour at native pixel (x, y) of `frame`, with
/// tri(v) = v mod 512 < 256 ? v mod 512 : 511 - v mod 512:
///   R = tri(x + 8 * frame), G = tri(y + 16 * frame), B = tri(16 * frame).
/// The ramps move in multiples of 8 pixels per frame, so 2x2 box pyramids up
/// to three halvings deep reproduce direct block averages exactly.
inline std::array<std::uint8_t, 3> fixture_pixel(int x, int y, int frame) {
    auto tri = [](long long v) {
        const long long m = ((v % 512) + 512) % 512;
        return static_cast<std::uint8_t>(m < 256 ? m : 511 - m);
    };
    const long long f = frame;
    return {tri(x + 8 * f), tri(y + 16 * f), tri(16 * f)};
}

inline Image fixture_frame(int width, int height, int frame) {
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto px = fixture_pixel(x, y, frame);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = px[static_cast<std::size_t>(c)];
        }
    return img;
}

inline std::string fixture_filename(int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.png", frame);
    return buf;
}

/// Writes `frames` deterministic PNGs named frame_00000.png... into output.
inline fs::path generate_fixture(int width, int height, int frames, const fs::path& output) {
    if (width < 1 || height < 1 || frames < 1) fail(Errc::invalid_argument, "fixture dimensions must be >= 1");
    std::error_code ec;
    fs::create_directories(output, ec);
    if (ec || !fs::is_directory(output)) fail(Errc::io_error, "cannot create " + output.string());
    detail::parallel_for(frames, 0, [&](int f) { write_png(output / fixture_filename(f), fixture_frame(width, height, f)); });
    return output;
}

} // namespace studio
