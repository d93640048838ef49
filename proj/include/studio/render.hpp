#pragma once

#include "studio/error.hpp"
#include "studio/image.hpp"
#include "studio/pyramid.hpp"
#include "studio/timeline.hpp"
#include "studio/tour.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace studio {

struct Viewport {
    int width = 1280;
    int height = 720;

    friend bool operator==(const Viewport&, const Viewport&) = default;
};

inline constexpr double default_output_fps = 30.0;

/// Pyramid level whose minification factor scale * 2^(levels-1-level) lies in
/// (0.5, 1], clamped to the available levels.
inline int select_level(double scale, int levels) {
    if (!(scale > 0.0) || !std::isfinite(scale)) fail(Errc::invalid_argument, "scale must be positive");
    // k = floor(log2(1 / scale)), adjusted so that scale * 2^k is in (0.5, 1]
    int k = static_cast<int>(std::floor(std::log2(1.0 / scale)));
    while (std::ldexp(scale, k) > 1.0) --k;
    while (std::ldexp(scale, k) <= 0.5) ++k;
    return std::clamp(levels - 1 - k, 0, levels - 1);
}

/// Percentage of native detail visible at `scale`; drops below 100 only
/// when the viewer magnifies past native pixels.
inline double quality_indicator(double scale) {
    if (!(scale > 0.0)) fail(Errc::invalid_argument, "scale must be positive");
    return std::min(100.0, 100.0 / scale);
}

/// Nearest frame, ties toward the later frame, clamped to the dataset.
inline int frame_index(double frame, int frame_count) {
    const auto f = static_cast<int>(std::floor(frame + 0.5));
    return std::clamp(f, 0, frame_count - 1);
}

/// Rasterizes `view`. Output pixel centre (px + 0.5, py + 0.5) maps to the
/// dataset point (cx + (px + 0.5 - width / 2) / scale, same for y), where
/// native pixel i spans [i, i + 1). Spatial sampling is bilinear on one
/// pyramid level; anything outside the dataset is black.
inline Image render_view(TileCache& tiles, const View& view, const Viewport& vp,
                         std::optional<int> forced_level = std::nullopt) {
    const auto& m = tiles.manifest();
    require_valid_view(view, m);
    if (vp.width < 1 || vp.height < 1) fail(Errc::invalid_argument, "viewport must be at least 1x1");
    const int level = forced_level.value_or(select_level(view.scale, m.levels));
    if (level < 0 || level >= m.levels) fail(Errc::invalid_argument, "level out of range");
    const int frame = frame_index(view.frame, m.frame_count);
    const double factor = m.downsample_factor(level);
    const int lw = m.level_width(level);
    const int lh = m.level_height(level);
    const int ts = m.tile_size;

    std::vector<std::shared_ptr<const Image>> row_cache(static_cast<std::size_t>(m.tiles_x(level) * m.tiles_y(level)));
    auto texel = [&](int lx, int ly, int c) -> int {
        const int col = lx / ts;
        const int row = ly / ts;
        auto& slot = row_cache[static_cast<std::size_t>(row * m.tiles_x(level) + col)];
        if (!slot) {
            const TileAddress a{frame, level, col, row};
            try {
                slot = tiles.get(a);
            } catch (const Error& e) {
                fail(Errc::render_error, "tile " + to_string(a) + " unavailable: " + e.detail());
            }
        }
        return slot->at(lx - col * ts, ly - row * ts, c);
    };

    Image out(vp.width, vp.height);
    const double half_w = vp.width / 2.0;
    const double half_h = vp.height / 2.0;
    for (int py = 0; py < vp.height; ++py) {
        const double dy = view.cy + (py + 0.5 - half_h) / view.scale;
        if (dy < 0.0 || dy >= m.height) continue;
        const double ly = dy / factor - 0.5;
        const int y0 = static_cast<int>(std::floor(ly));
        const double ty = ly - y0;
        const int ya = std::clamp(y0, 0, lh - 1);
        const int yb = std::clamp(y0 + 1, 0, lh - 1);
        for (int px = 0; px < vp.width; ++px) {
            const double dx = view.cx + (px + 0.5 - half_w) / view.scale;
            if (dx < 0.0 || dx >= m.width) continue;
            const double lx = dx / factor - 0.5;
            const int x0 = static_cast<int>(std::floor(lx));
            const double tx = lx - x0;
            const int xa = std::clamp(x0, 0, lw - 1);
            const int xb = std::clamp(x0 + 1, 0, lw - 1);
            for (int c = 0; c < 3; ++c) {
                const double top = texel(xa, ya, c) * (1.0 - tx) + (tx > 0.0 ? texel(xb, ya, c) * tx : 0.0);
                const double bot =
                    ty > 0.0 ? texel(xa, yb, c) * (1.0 - tx) + (tx > 0.0 ? texel(xb, yb, c) * tx : 0.0) : 0.0;
                const double v = top * (1.0 - ty) + bot * ty;
                out.at(px, py, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

struct RenderJob {
    std::string dataset;
    Timeline timeline;
    Viewport viewport;
    double output_fps = default_output_fps;
    fs::path output_dir;
    unsigned threads = 0;
};

inline int render_frame_count(double total_seconds, double output_fps) {
    // Guard floor() against totals like 4.9999999 that are 5 s up to rounding.
    return static_cast<int>(std::floor(total_seconds * output_fps + 1e-9)) + 1;
}

inline std::string render_frame_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.png", k);
    return buf;
}

/// Renders frames at wall times k / output_fps into job.output_dir and writes
/// render_manifest.json. `on_frame` (optional) is called once per finished
/// frame, from worker threads.
template <class Progress = void (*)(int)>
std::vector<fs::path> render_tour(TileCache& tiles, const RenderJob& job, Progress&& on_frame = [](int) {}) {
    if (!(job.output_fps > 0.0)) fail(Errc::invalid_argument, "output_fps must be positive");
    std::error_code ec;
    fs::create_directories(job.output_dir, ec);
    if (ec || !fs::is_directory(job.output_dir)) fail(Errc::io_error, "cannot create " + job.output_dir.string());

    const int count = render_frame_count(job.timeline.total_seconds, job.output_fps);
    std::vector<fs::path> files(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) files[static_cast<std::size_t>(k)] = job.output_dir / render_frame_name(k);

    detail::parallel_for(count, job.threads, [&](int k) {
        const double t = std::min(k / job.output_fps, job.timeline.total_seconds);
        write_png(files[static_cast<std::size_t>(k)], render_view(tiles, sample(job.timeline, t), job.viewport));
        on_frame(k);
    });

    const Json manifest = {{"dataset", job.dataset},
                           {"frame_count", count},
                           {"output_fps", job.output_fps},
                           {"viewport", {{"width", job.viewport.width}, {"height", job.viewport.height}}}};
    const auto doc = canonical_dump(manifest);
    detail::write_file_atomic(job.output_dir / "render_manifest.json",
                              {reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()});
    return files;
}

} // namespace studio
