#pragma once

// Shared helpers and independent oracles for the test suites. Nothing here
// calls the code paths it is used to check.

#include "studio/studio.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace studio::testing {

namespace fs = std::filesystem;

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("studio_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    fs::path path_;
};

inline std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const fs::path& p) {
    auto b = file_bytes(p);
    return {b.begin(), b.end()};
}

/// Fixture frames written and ingested into <dir>/data/<name>.
inline DatasetManifest make_dataset(const fs::path& dir, const std::string& name, int width, int height, int frames,
                                    int tile_size, double fps) {
    const auto frames_dir = dir / ("frames_" + name);
    generate_fixture(width, height, frames, frames_dir);
    IngestOptions opt;
    opt.input_dir = frames_dir;
    opt.data_dir = dir / "data";
    opt.name = name;
    opt.tile_size = tile_size;
    opt.fps = fps;
    return ingest_frames(opt);
}

/// Mosaic of one pyramid level, reassembled from its tiles and cropped.
inline Image level_mosaic(const fs::path& data_dir, const DatasetManifest& m, int frame, int level) {
    Image out(m.level_width(level), m.level_height(level));
    for (int row = 0; row < m.tiles_y(level); ++row)
        for (int col = 0; col < m.tiles_x(level); ++col) {
            const auto tile = load_tile(data_dir, m, {frame, level, col, row}).pixels;
            for (int y = 0; y < m.tile_size; ++y)
                for (int x = 0; x < m.tile_size; ++x) {
                    const int gx = col * m.tile_size + x;
                    const int gy = row * m.tile_size + y;
                    if (gx < out.width && gy < out.height)
                        for (int c = 0; c < 3; ++c) out.at(gx, gy, c) = tile.at(x, y, c);
                }
        }
    return out;
}

/// Oracle: direct whole-image box downsample by `factor`, averaging every
/// in-bounds native pixel of each factor x factor block, rounded half up.
inline Image box_downsample_direct(const Image& src, int factor) {
    Image out((src.width + factor - 1) / factor, (src.height + factor - 1) / factor);
    for (int by = 0; by < out.height; ++by)
        for (int bx = 0; bx < out.width; ++bx) {
            long long sum[3] = {0, 0, 0};
            long long n = 0;
            for (int y = by * factor; y < std::min(src.height, (by + 1) * factor); ++y)
                for (int x = bx * factor; x < std::min(src.width, (bx + 1) * factor); ++x) {
                    for (int c = 0; c < 3; ++c) sum[c] += src.at(x, y, c);
                    ++n;
                }
            for (int c = 0; c < 3; ++c) out.at(bx, by, c) = static_cast<std::uint8_t>((2 * sum[c] + n) / (2 * n));
        }
    return out;
}

/// Oracle: the same halving scheme carried out in exact real arithmetic
/// (no intermediate rounding), rounded once at the end.
inline Image halving_unrounded(const Image& src, int halvings) {
    int w = src.width, h = src.height;
    std::vector<double> cur(src.pixels.begin(), src.pixels.end());
    for (int k = 0; k < halvings; ++k) {
        const int nw = (w + 1) / 2, nh = (h + 1) / 2;
        std::vector<double> next(static_cast<std::size_t>(nw) * nh * 3);
        for (int y = 0; y < nh; ++y)
            for (int x = 0; x < nw; ++x)
                for (int c = 0; c < 3; ++c) {
                    double s = 0;
                    int n = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int sx = 2 * x + dx, sy = 2 * y + dy;
                            if (sx < w && sy < h) {
                                s += cur[(static_cast<std::size_t>(sy) * w + sx) * 3 + c];
                                ++n;
                            }
                        }
                    next[(static_cast<std::size_t>(y) * nw + x) * 3 + c] = s / n;
                }
        cur.swap(next);
        w = nw;
        h = nh;
    }
    Image out(w, h);
    for (std::size_t i = 0; i < cur.size(); ++i) out.pixels[i] = static_cast<std::uint8_t>(std::floor(cur[i] + 0.5));
    return out;
}

inline int max_abs_diff(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) return 1 << 20;
    int worst = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, std::abs(a.pixels[i] - b.pixels[i]));
    return worst;
}

/// Oracle: walks the playhead one frame at a time through a looping gap and
/// records the step index of every arrival at the last or first frame.
inline std::vector<long long> walk_dwell_steps(int start_frame, int end_frame, int loops, int frame_count) {
    const long long forward = ((end_frame - start_frame) % frame_count + frame_count) % frame_count;
    const long long steps = static_cast<long long>(loops) * frame_count + forward;
    std::vector<long long> arrivals;
    int pos = start_frame;
    for (long long s = 1; s <= steps; ++s) {
        pos = (pos + 1) % frame_count;
        if (pos == frame_count - 1 || pos == 0) arrivals.push_back(s);
    }
    return arrivals;
}

inline bool close_rel(double a, double b, double rel = 1e-9) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool views_close(const View& a, const View& b, double rel = 1e-9) {
    return close_rel(a.cx, b.cx, rel) && close_rel(a.cy, b.cy, rel) && close_rel(a.scale, b.scale, rel) &&
           close_rel(a.frame, b.frame, rel);
}

inline DatasetManifest synthetic_manifest(int frame_count = 60, double fps = 10.0, int width = 1024, int height = 1024,
                                          int tile = 128) {
    DatasetManifest m;
    m.name = "synthetic";
    m.width = width;
    m.height = height;
    m.tile_size = tile;
    m.levels = compute_level_count(width, height, tile);
    m.frame_count = frame_count;
    m.fps = fps;
    return m;
}

/// Random keyframe pair covering all five motions with equal weight.
struct PairCase {
    View a, b;
    Transition t;
    MotionKind expected;
};

inline PairCase random_pair(std::mt19937_64& rng, const DatasetManifest& m) {
    std::uniform_real_distribution<double> pos(0.0, m.width);
    std::uniform_real_distribution<double> logscale(-4.0, 2.0);
    std::uniform_int_distribution<int> frame(0, m.frame_count - 1);
    std::uniform_int_distribution<int> pick(0, 4);
    std::uniform_real_distribution<double> dur(0.1, 10.0);
    std::uniform_real_distribution<double> spd(0.1, 4.0);
    std::uniform_int_distribution<int> loops(0, 2);

    auto random_view = [&] { return View{pos(rng), pos(rng), std::exp2(logscale(rng)), double(frame(rng))}; };
    auto other_frame = [&](double f) {
        int g;
        do g = frame(rng);
        while (g == f);
        return double(g);
    };

    PairCase c;
    c.a = random_view();
    switch (pick(rng)) {
    case 0: // full motion
        c.b = random_view();
        c.b.frame = other_frame(c.a.frame);
        c.t = rng() % 2 ? Transition{TransitionKind::speed, spd(rng), loops(rng)}
                        : Transition{TransitionKind::duration, dur(rng), loops(rng)};
        c.expected = MotionKind::full_motion;
        break;
    case 1: // time only
        c.b = c.a;
        c.b.frame = other_frame(c.a.frame);
        c.t = rng() % 2 ? Transition{TransitionKind::speed, spd(rng), loops(rng)}
                        : Transition{TransitionKind::duration, dur(rng), loops(rng)};
        c.expected = MotionKind::time_only;
        break;
    case 2: // space only
        c.b = random_view();
        c.b.frame = c.a.frame;
        c.t = Transition{TransitionKind::duration, dur(rng), 0};
        c.expected = MotionKind::space_only;
        break;
    case 3: // hold
        c.b = c.a;
        c.t = Transition{TransitionKind::duration, dur(rng), 0};
        c.expected = MotionKind::hold;
        break;
    default: // jump
        c.b = random_view();
        c.t = Transition{TransitionKind::duration, 0.0, loops(rng)};
        c.expected = MotionKind::jump;
        break;
    }
    return c;
}

inline Tour pair_tour(const DatasetManifest& m, const PairCase& c) {
    Tour t = make_tour(m.name);
    t.keyframes = {{"1", c.a, ""}, {"2", c.b, ""}};
    t.transitions = {c.t};
    return t;
}

/// Random valid tour (or slideshow) for codec round trips.
inline Tour random_tour(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(0, 8);
    std::uniform_real_distribution<double> pos(-5000.0, 50000.0);
    std::uniform_real_distribution<double> logscale(-10.0, 6.0);
    std::uniform_int_distribution<int> frame(0, 500);
    std::uniform_real_distribution<double> val(0.0, 100.0);
    static const std::vector<std::string> words = {"", "Coastline", "Las Vegas \"grows\"", "caf\xC3\xA9",
                                                   "line\nbreak\ttab", "\xF0\x9F\x8C\x8D earth", "a\\b/c",
                                                   "\x01\x1f control"};
    Tour t = make_tour(rng() % 3 == 0 ? "ds-" + std::to_string(rng() % 100) : "earth",
                       rng() % 4 == 0 ? TourKind::slideshow : TourKind::tour);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        View v{pos(rng), pos(rng), std::exp2(logscale(rng)),
               rng() % 5 == 0 ? frame(rng) + val(rng) / 100.0 : double(frame(rng))};
        t.keyframes.push_back({std::to_string(i * 3 + 1), v, words[rng() % words.size()]});
    }
    if (t.kind == TourKind::tour)
        for (int i = 0; i + 1 < n; ++i) {
            const bool speed = rng() % 2;
            t.transitions.push_back({speed ? TransitionKind::speed : TransitionKind::duration,
                                     speed ? 0.01 + val(rng) : (rng() % 4 == 0 ? 0.0 : val(rng)),
                                     static_cast<int>(rng() % 4)});
        }
    return t;
}

} // namespace studio::testing
