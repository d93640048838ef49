// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances are fixed here, next to the checks that use them.

#include "test_support.hpp"
#include "studio/service.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>

using namespace studio;
using namespace studio::testing;

namespace {

constexpr double time_tolerance = 1e-9;     // seconds and view components
constexpr int pyramid_tolerance_npot = 1;   // per channel, non-power-of-two sizes
constexpr int half_scale_tolerance = 1;     // per channel, scale 0.5 render vs box oracle
constexpr int random_pairs = 1000;
constexpr int random_tours = 1000;

const fs::path golden_dir = STUDIO_GOLDEN_DIR;

/// Thrown by `check` with a description of the first violated expectation.
struct Violation {
    std::string what;
};

void check(bool ok, const std::string& what) {
    if (!ok) throw Violation{what};
}

void check_near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(17);
    s << what << ": got " << got << ", want " << want;
    check(std::abs(got - want) <= tol, s.str());
}

// --------------------------------------------------------------------------

void transition_arithmetic() {
    const auto speed = segment_duration({TransitionKind::speed, 1.0, 0}, 50, 10.0, 60);
    check_near(speed.active_seconds, 5.0, time_tolerance, "speed 1.0 over 50 frames");

    const auto dur = segment_duration({TransitionKind::duration, 4.0, 0}, 20, 10.0, 60);
    check_near(dur.active_seconds, 4.0, time_tolerance, "duration 4.0");
    check(dur.implied_speed(10.0).has_value(), "duration 4.0 has an implied speed");
    check_near(*dur.implied_speed(10.0), 0.5, time_tolerance, "implied speed");

    const auto jump = segment_duration({TransitionKind::duration, 0.0, 0}, 20, 10.0, 60);
    check(jump.total_seconds() == 0.0, "duration 0 takes no time");
    check(classify_motion(View{0, 0, 1, 0}, View{5, 5, 1, 20}, {TransitionKind::duration, 0.0, 0}) == MotionKind::jump,
          "duration 0 classifies as jump");
}

void loop_and_dwell() {
    const auto s = segment_duration({TransitionKind::speed, 1.0, 2}, 0, 10.0, 30, 0.0);
    check_near(s.active_seconds, 6.0, time_tolerance, "active seconds");
    check(s.dwell_events.size() == 4, "four dwells, got " + std::to_string(s.dwell_events.size()));
    check_near(s.total_seconds(), 8.0, time_tolerance, "total seconds");

    const auto walk = walk_dwell_steps(0, 0, 2, 30);
    check(walk.size() == s.dwell_events.size(), "dwell count matches the playhead walker");
    for (std::size_t i = 0; i < walk.size(); ++i) {
        check_near(s.dwell_events[i].offset_seconds, walk[i] / 10.0, time_tolerance, "dwell " + std::to_string(i));
        check(s.dwell_events[i].hold_seconds == 0.5, "dwell hold is 0.5 s");
    }

    // the same figure through the compiled timeline
    auto m = synthetic_manifest(30, 10.0);
    Tour t = make_tour(m.name);
    t.keyframes = {{"1", {100, 100, 1, 0}, ""}, {"2", {100, 100, 1, 0}, ""}};
    t.transitions = {{TransitionKind::speed, 1.0, 2}};
    check_near(compile_tour(t, m).total_seconds, 8.0, time_tolerance, "compiled total");
}

void five_motion_suite() {
    const auto m = synthetic_manifest(60, 10.0);
    std::mt19937_64 rng(20240611);
    int seen[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < random_pairs; ++i) {
        const auto c = random_pair(rng, m);
        const std::string tag = "pair " + std::to_string(i) + " (" + std::string(to_string(c.expected)) + ")";
        check(classify_motion(c.a, c.b, c.t) == c.expected, tag + ": classifier");
        ++seen[static_cast<int>(c.expected)];
        const auto tl = compile_tour(pair_tour(m, c), m);
        const View first = sample(tl, 0.0), last = sample(tl, tl.total_seconds);
        check(views_close(first, c.expected == MotionKind::jump ? c.b : c.a, time_tolerance), tag + ": start boundary");
        check(views_close(last, c.b, time_tolerance), tag + ": end boundary");
        for (int k = 0; k <= 32; ++k) {
            const View v = sample(tl, std::min(tl.total_seconds, tl.total_seconds * k / 32.0));
            switch (c.expected) {
            case MotionKind::time_only:
                check(v.cx == c.a.cx && v.cy == c.a.cy && v.scale == c.a.scale, tag + ": space moved");
                break;
            case MotionKind::space_only: check(v.frame == c.a.frame, tag + ": time moved"); break;
            case MotionKind::hold: check(v == c.a, tag + ": hold moved"); break;
            case MotionKind::jump: check(v == c.b, tag + ": jump showed an intermediate view"); break;
            case MotionKind::full_motion: break;
            }
        }
    }
    for (int k = 0; k < 5; ++k) check(seen[k] > 0, "every motion kind was exercised");
}

void pyramid_oracle() {
    TempDir dir;
    // power of two: exact
    const auto m = make_dataset(dir.path(), "fixture", 1024, 1024, 60, 128, 10.0);
    check(m.levels == 4, "1024 / 128 fixture has 4 levels");
    for (int frame = 0; frame < m.frame_count; ++frame) {
        const Image native = fixture_frame(m.width, m.height, frame);
        for (int level = 0; level < m.levels; ++level) {
            const Image mosaic = level_mosaic(dir / "data", m, frame, level);
            const Image oracle = box_downsample_direct(native, 1 << (m.levels - 1 - level));
            check(mosaic.pixels == oracle.pixels,
                  "frame " + std::to_string(frame) + " level " + std::to_string(level) + " differs from box oracle");
        }
    }
    // other sizes: within one step per channel
    const auto odd = make_dataset(dir.path(), "odd", 333, 171, 3, 32, 10.0);
    for (int frame = 0; frame < odd.frame_count; ++frame) {
        const Image native = fixture_frame(odd.width, odd.height, frame);
        for (int level = 0; level < odd.levels; ++level) {
            const int k = odd.levels - 1 - level, f = 1 << k;
            const Image mosaic = level_mosaic(dir / "data", odd, frame, level);
            const Image direct = box_downsample_direct(native, f);
            const Image unrounded = halving_unrounded(native, k);
            for (int y = 0; y < mosaic.height; ++y)
                for (int x = 0; x < mosaic.width; ++x)
                    for (int c = 0; c < 3; ++c) {
                        const bool complete = x < odd.width / f && y < odd.height / f;
                        const int want = complete ? direct.at(x, y, c) : unrounded.at(x, y, c);
                        check(std::abs(mosaic.at(x, y, c) - want) <= pyramid_tolerance_npot,
                              "333x171 level " + std::to_string(level) + " at " + std::to_string(x) + "," +
                                  std::to_string(y));
                    }
        }
    }
}

void render_oracle() {
    TempDir dir;
    const auto m = make_dataset(dir.path(), "render", 1024, 1024, 60, 128, 10.0);
    TileCache cache(dir / "data", m);

    const Image src = fixture_frame(1024, 1024, 17);
    const Image crop = render_view(cache, {500, 400, 1.0, 17}, {320, 240});
    for (int y = 0; y < 240; ++y)
        for (int x = 0; x < 320; ++x)
            for (int c = 0; c < 3; ++c)
                check(crop.at(x, y, c) == src.at(340 + x, 280 + y, c), "scale 1 render is not the source crop");

    const Image box = box_downsample_direct(src, 2);
    const Image half = render_view(cache, {512, 512, 0.5, 17}, {512, 512});
    check(max_abs_diff(half, box) <= half_scale_tolerance,
          "scale 0.5 render differs by " + std::to_string(max_abs_diff(half, box)));

    Tour t = make_tour("render");
    t.keyframes = {{"1", {200, 300, 0.25, 0}, ""}, {"2", {800, 700, 1.5, 45}, ""}};
    t.transitions = {{TransitionKind::duration, 5.0, 0}};
    const Timeline tl = compile_tour(t, m);
    TileCache other(dir / "data", m, 16);
    const auto a = render_tour(cache, RenderJob{"render", tl, {160, 120}, 30.0, dir / "a", 1});
    const auto b = render_tour(other, RenderJob{"render", tl, {160, 120}, 30.0, dir / "b", 0});
    check(a.size() == 151, "5 s at 30 fps gave " + std::to_string(a.size()) + " frames");
    check(b.size() == a.size(), "second render frame count");
    for (std::size_t i = 0; i < a.size(); ++i)
        check(file_bytes(a[i]) == file_bytes(b[i]), "frame " + std::to_string(i) + " differs between renders");
}

void codec() {
    std::mt19937_64 rng(77001);
    for (int i = 0; i < random_tours; ++i) {
        const Tour t = random_tour(rng);
        const auto link = encode_tour(t);
        check(decode_tour(link.fragment) == t, "tour " + std::to_string(i) + " did not round-trip");
        check(encode_tour(decode_tour(link.fragment)) == link, "tour " + std::to_string(i) + " re-encoded differently");
    }

    Tour sample = make_tour("earth");
    sample.keyframes = {
        {"1", {512.0, 512.0, 0.25, 0.0}, "Overview \xE2\x80\x94 \"Las Vegas\"\n1984"},
        {"2", {1234.5678, 0.1, 1e-7, 59.0}, "Tab\there, bell\x07, caf\xC3\xA9 \xF0\x9F\x8C\x8D"},
    };
    sample.transitions = {{TransitionKind::duration, 12.75, 3}};
    check(canonical_tour_document(sample) == read_text(golden_dir / "sample_tour.canonical"),
          "canonical bytes differ from the golden file");
    check(encode_tour(sample).fragment == read_text(golden_dir / "sample_tour.fragment"),
          "fragment differs from the golden file");
}

void service() {
    using namespace std::chrono_literals;
    TempDir dir;
    const auto m = make_dataset(dir.path(), "live", 96, 64, 10, 32, 10.0);
    Studio studio(StudioOptions{dir / "data", dir / "no-ui", 2});
    const int port = studio.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);

    auto expect = [&](const httplib::Result& r, int status, const std::string& what) -> Json {
        check(static_cast<bool>(r), what + ": no response");
        check(r->status == status, what + ": status " + std::to_string(r->status) + " body " + r->body);
        return r->body.empty() ? Json() : Json::parse(r->body);
    };

    const Json datasets = expect(client.Get("/api/datasets"), 200, "list datasets");
    check(datasets.size() == 1 && datasets[0]["name"] == "live", "dataset listing");
    expect(client.Get("/api/datasets/live/manifest"), 200, "manifest");

    for (int level = 0; level < m.levels; ++level) {
        const TileAddress a{7, level, 0, 0};
        const auto r = client.Get("/tiles/live/7/" + std::to_string(level) + "/0_0.png");
        check(r && r->status == 200, "tile GET " + to_string(a));
        const auto disk = file_bytes(tile_path(dir / "data", "live", a));
        check(std::vector<std::uint8_t>(r->body.begin(), r->body.end()) == disk, "tile bytes differ from disk");
    }
    expect(client.Get("/tiles/live/10/0/0_0.png"), 404, "out-of-range tile");

    Tour t = make_tour("live");
    t.keyframes = {{"1", {48, 32, 1, 0}, "a"}, {"2", {20, 20, 2, 9}, "b"}};
    t.transitions = {{TransitionKind::duration, 5.0, 0}};
    const Json created = expect(client.Post("/api/tours", canonical_tour_document(t), "application/json"), 201, "create");
    const std::string id = created["tour_id"];
    check(tour_from_json(expect(client.Get("/api/tours/" + id), 200, "read")["tour"]) == t, "read back");
    Tour edited = t;
    edited.keyframes[0].description = "changed";
    expect(client.Post("/api/tours/" + id, canonical_tour_document(edited), "application/json"), 200, "update");
    check(tour_from_json(expect(client.Get("/api/tours/" + id), 200, "read")["tour"]) == edited, "update visible");

    const Json job = expect(client.Post("/api/render", Json{{"tour_id", id}, {"width", 32}, {"height", 24}}.dump(),
                                        "application/json"),
                            202, "submit render");
    const std::string job_id = job["job_id"];
    Json status;
    for (int i = 0; i < 3000; ++i) {
        status = expect(client.Get("/api/jobs/" + job_id), 200, "poll job");
        if (status["status"] == "done" || status["status"] == "failed") break;
        std::this_thread::sleep_for(10ms);
    }
    check(status["status"] == "done", "job finished: " + status.dump());
    check(status["progress"]["done"] == 151 && status["frames"].size() == 151, "job rendered 151 frames");
    check(expect(client.Get("/api/jobs/" + job_id), 200, "poll again") == status, "finished job is stable");

    expect(client.Delete("/api/tours/" + id), 204, "delete");
    expect(client.Get("/api/tours/" + id), 404, "read after delete");
    studio.stop();
}

} // namespace

int main() {
    const std::pair<const char*, std::function<void()>> criteria[] = {
        {"transition arithmetic", transition_arithmetic},
        {"loop and dwell timing", loop_and_dwell},
        {"five-motion property suite", five_motion_suite},
        {"pyramid oracle", pyramid_oracle},
        {"render oracle", render_oracle},
        {"share codec", codec},
        {"service lifecycle", service},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string problem;
        try {
            run();
        } catch (const Violation& v) {
            problem = v.what;
        } catch (const std::exception& e) {
            problem = std::string("unexpected error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (problem.empty())
            std::printf("PASS  %-28s (%.2f s)\n", name, secs);
        else {
            std::printf("FAIL  %-28s %s\n", name, problem.c_str());
            ++failed;
        }
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
