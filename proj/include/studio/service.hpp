#pragma once

// HTTP front door: datasets, tile passthrough, saved tours and render jobs.
//
//   GET    /api/datasets                       list of manifests
//   GET    /api/datasets/{name}/manifest
//   GET    /tiles/{name}/{frame}/{level}/{col}_{row}.png
//   GET    /api/tours                          list of tour records
//   POST   /api/tours                          create (body: tour document or {"fragment": "tour=..."})
//   GET    /api/tours/{id}
//   POST   /api/tours/{id}                     replace the stored tour
//   DELETE /api/tours/{id}
//   POST   /api/compile                        tour document -> timeline summary
//   POST   /api/render {tour_id, width, height, output_fps} -> job record
//   GET    /api/jobs/{id}
//   GET    /                                   editor bundle, when one is installed

#include "studio/codec.hpp"
#include "studio/error.hpp"
#include "studio/pyramid.hpp"
#include "studio/render.hpp"
#include "studio/timeline.hpp"
#include "studio/tour.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace studio {

inline int http_status(Errc code) {
    switch (code) {
    case Errc::not_found: return 404;
    case Errc::validation_error:
    case Errc::unsupported_version:
    case Errc::invalid_transition: return 422;
    case Errc::invalid_argument:
    case Errc::decode_error: return 400;
    case Errc::invalid_state: return 409;
    default: return 500;
    }
}

inline std::string utc_timestamp() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto secs = system_clock::to_time_t(now);
    const auto millis = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(millis));
    return buf;
}

inline std::string random_id(char prefix) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%c%016llx", prefix, static_cast<unsigned long long>(rng()));
    return buf;
}

// ---------------------------------------------------------------------------
// Tours

struct TourRecord {
    std::string tour_id;
    Tour tour;
    std::string created_at;
    std::string updated_at;

    friend bool operator==(const TourRecord&, const TourRecord&) = default;
};

inline Json tour_record_to_json(const TourRecord& r) {
    return {{"tour_id", r.tour_id},
            {"tour", tour_to_json(r.tour)},
            {"fragment", encode_tour(r.tour).fragment},
            {"created_at", r.created_at},
            {"updated_at", r.updated_at}};
}

/// Saved tours under <data_dir>/tours/<tour_id>.json. Writes go through one
/// mutex; readers take an immutable snapshot of the index.
class TourStore {
public:
    using Snapshot = std::shared_ptr<const std::map<std::string, TourRecord>>;

    explicit TourStore(fs::path data_dir) : data_dir_(std::move(data_dir)), snapshot_(load()) {}

    [[nodiscard]] Snapshot snapshot() const {
        std::lock_guard lock(snapshot_mutex_);
        return snapshot_;
    }

    [[nodiscard]] std::vector<TourRecord> list() const {
        std::vector<TourRecord> out;
        for (const auto& [id, rec] : *snapshot()) out.push_back(rec);
        return out;
    }

    [[nodiscard]] TourRecord get(const std::string& id) const {
        auto snap = snapshot();
        auto it = snap->find(id);
        if (it == snap->end()) fail(Errc::not_found, "no tour '" + id + "'");
        return it->second;
    }

    /// Creates (id absent) or replaces a tour after validating it against the
    /// dataset it names.
    TourRecord save(const Tour& tour, std::optional<std::string> id = std::nullopt) {
        DatasetManifest m;
        try {
            m = read_manifest(data_dir_, tour.dataset);
        } catch (const Error& e) {
            fail(Errc::validation_error, "dataset: " + e.detail());
        }
        validate_tour(tour, &m);
        for (std::size_t i = 0; i < tour.keyframes.size(); ++i)
            if (auto why = view_problem(tour.keyframes[i].view, m); !why.empty())
                fail(Errc::validation_error, "keyframes[" + std::to_string(i) + "]: " + why);

        std::lock_guard writer(write_mutex_);
        auto current = snapshot();
        TourRecord rec;
        const auto now = utc_timestamp();
        if (id) {
            auto it = current->find(*id);
            if (it == current->end()) fail(Errc::not_found, "no tour '" + *id + "'");
            rec = it->second;
            rec.tour = tour;
            rec.updated_at = now;
        } else {
            do {
                rec.tour_id = random_id('t');
            } while (current->count(rec.tour_id));
            rec.tour = tour;
            rec.created_at = now;
            rec.updated_at = now;
        }
        const auto doc = canonical_dump(tour_record_to_json(rec));
        detail::write_file_atomic(path_for(rec.tour_id), {reinterpret_cast<const std::uint8_t*>(doc.data()), doc.size()});
        auto next = std::make_shared<std::map<std::string, TourRecord>>(*current);
        (*next)[rec.tour_id] = rec;
        publish(std::move(next));
        return rec;
    }

    void remove(const std::string& id) {
        std::lock_guard writer(write_mutex_);
        auto current = snapshot();
        if (!current->count(id)) fail(Errc::not_found, "no tour '" + id + "'");
        std::error_code ec;
        fs::remove(path_for(id), ec);
        if (ec) fail(Errc::io_error, "cannot delete tour '" + id + "': " + ec.message());
        auto next = std::make_shared<std::map<std::string, TourRecord>>(*current);
        next->erase(id);
        publish(std::move(next));
    }

private:
    [[nodiscard]] fs::path dir() const { return data_dir_ / "tours"; }
    [[nodiscard]] fs::path path_for(const std::string& id) const { return dir() / (id + ".json"); }

    void publish(Snapshot next) {
        std::lock_guard lock(snapshot_mutex_);
        snapshot_ = std::move(next);
    }

    Snapshot load() const {
        auto map = std::make_shared<std::map<std::string, TourRecord>>();
        std::error_code ec;
        if (!fs::is_directory(dir(), ec)) return map;
        for (const auto& entry : fs::directory_iterator(dir(), ec)) {
            if (entry.path().extension() != ".json") continue;
            try {
                auto bytes = detail::read_file_bytes(entry.path());
                Json j = Json::parse(bytes.begin(), bytes.end());
                TourRecord rec;
                rec.tour_id = j.at("tour_id").get<std::string>();
                rec.created_at = j.at("created_at").get<std::string>();
                rec.updated_at = j.at("updated_at").get<std::string>();
                rec.tour = tour_from_json(j.at("tour"));
                if (rec.tour_id + ".json" == entry.path().filename().string()) (*map)[rec.tour_id] = std::move(rec);
            } catch (const std::exception&) {
                // skip unreadable records rather than refusing to start
            }
        }
        return map;
    }

    fs::path data_dir_;
    std::mutex write_mutex_;
    mutable std::mutex snapshot_mutex_;
    Snapshot snapshot_;
};

// ---------------------------------------------------------------------------
// Render jobs

enum class JobStatus { queued, running, done, failed };

inline std::string_view to_string(JobStatus s) {
    switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
    }
    return "unknown";
}

struct JobRecord {
    std::string job_id;
    std::string tour_id;
    JobStatus status = JobStatus::queued;
    int frames_done = 0;
    int frames_total = 0;
    std::string output; // directory, set when done
    std::vector<std::string> frames;
    std::string error;

    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

inline Json job_record_to_json(const JobRecord& r) {
    Json j = {{"job_id", r.job_id},
              {"tour_id", r.tour_id},
              {"status", std::string(to_string(r.status))},
              {"progress", {{"done", r.frames_done}, {"total", r.frames_total}}},
              {"frames", r.frames}};
    j["output"] = r.output.empty() ? Json(nullptr) : Json(r.output);
    j["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
    return j;
}

struct RenderRequest {
    std::string tour_id;
    Viewport viewport;
    double output_fps = default_output_fps;
};

class Studio;

/// Bounded pool running render jobs. Records only move forward:
/// queued -> running -> done | failed.
class JobQueue {
public:
    using Runner = std::function<void(const std::string& job_id)>;

    explicit JobQueue(unsigned workers = 0) {
        if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
        for (unsigned i = 0; i < workers; ++i)
            pool_.emplace_back([this](std::stop_token st) { work(st); });
    }

    ~JobQueue() { shutdown(); }

    /// Stops the workers after their current job; queued jobs stay queued.
    void shutdown() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& t : pool_) t.request_stop();
        pool_.clear();
    }

    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    JobRecord submit(const std::string& tour_id, Runner run) {
        std::lock_guard lock(mutex_);
        JobRecord rec;
        do {
            rec.job_id = random_id('j');
        } while (jobs_.count(rec.job_id));
        rec.tour_id = tour_id;
        jobs_[rec.job_id] = rec;
        pending_.emplace_back(rec.job_id, std::move(run));
        cv_.notify_one();
        return rec;
    }

    [[nodiscard]] JobRecord get(const std::string& id) const {
        std::lock_guard lock(mutex_);
        auto it = jobs_.find(id);
        if (it == jobs_.end()) fail(Errc::not_found, "no job '" + id + "'");
        return it->second;
    }

    template <class F>
    void update(const std::string& id, F&& mutate) {
        std::lock_guard lock(mutex_);
        auto& rec = jobs_.at(id);
        if (rec.status == JobStatus::done || rec.status == JobStatus::failed) return;
        mutate(rec);
    }

private:
    void work(std::stop_token) {
        for (;;) {
            std::pair<std::string, Runner> next;
            {
                std::unique_lock lock(mutex_);
                cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
                if (stopping_ || pending_.empty()) return;
                next = std::move(pending_.front());
                pending_.pop_front();
                jobs_.at(next.first).status = JobStatus::running;
            }
            try {
                next.second(next.first);
            } catch (const std::exception& e) {
                update(next.first, [&](JobRecord& r) {
                    r.status = JobStatus::failed;
                    r.error = e.what();
                });
            }
        }
    }

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool stopping_ = false;
    std::map<std::string, JobRecord> jobs_;
    std::deque<std::pair<std::string, Runner>> pending_;
    std::vector<std::jthread> pool_;
};

// ---------------------------------------------------------------------------
// Service

struct StudioOptions {
    fs::path data_dir;
    fs::path ui_dir; // static editor bundle; empty = <data_dir>/ui
    unsigned render_workers = 0;
    std::size_t tile_cache_capacity = TileCache::default_capacity;
};

class Studio {
public:
    explicit Studio(StudioOptions opt)
        : opt_(std::move(opt)), tours_(opt_.data_dir), jobs_(opt_.render_workers) {
        if (opt_.ui_dir.empty()) opt_.ui_dir = opt_.data_dir / "ui";
        routes();
    }

    ~Studio() {
        stop();
        jobs_.shutdown();
    }

    Studio(const Studio&) = delete;
    Studio& operator=(const Studio&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free
    /// port; the bound port is returned.
    int start(const std::string& host, int port) {
        int bound = port;
        if (port == 0) {
            bound = server_.bind_to_any_port(host);
            if (bound < 0) fail(Errc::startup_error, "cannot bind " + host);
        } else if (!server_.bind_to_port(host, port)) {
            fail(Errc::startup_error, "port " + std::to_string(port) + " unavailable");
        }
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return bound;
    }

    /// Blocks serving on the calling thread.
    void run(const std::string& host, int port) {
        if (!server_.bind_to_port(host, port)) fail(Errc::startup_error, "port " + std::to_string(port) + " unavailable");
        server_.listen_after_bind();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    TourStore& tours() { return tours_; }
    JobQueue& jobs() { return jobs_; }

    JobRecord submit_render(const RenderRequest& req) {
        const auto rec = tours_.get(req.tour_id);
        if (req.viewport.width < 1 || req.viewport.height < 1 || req.viewport.width > 8192 || req.viewport.height > 8192)
            fail(Errc::invalid_argument, "viewport must be between 1x1 and 8192x8192");
        if (!(req.output_fps > 0.0) || req.output_fps > 240.0) fail(Errc::invalid_argument, "output_fps must be in (0, 240]");
        return jobs_.submit(req.tour_id, [this, tour = rec.tour, req](const std::string& job_id) {
            run_render(job_id, tour, req);
        });
    }

private:
    std::shared_ptr<TileCache> cache_for(const std::string& dataset) {
        std::lock_guard lock(cache_mutex_);
        auto it = caches_.find(dataset);
        if (it != caches_.end()) return it->second;
        auto cache = std::make_shared<TileCache>(opt_.data_dir, read_manifest(opt_.data_dir, dataset),
                                                 opt_.tile_cache_capacity);
        caches_.emplace(dataset, cache);
        return cache;
    }

    void run_render(const std::string& job_id, const Tour& tour, const RenderRequest& req) {
        auto cache = cache_for(tour.dataset);
        RenderJob job;
        job.dataset = tour.dataset;
        job.timeline = compile_tour(tour, cache->manifest());
        job.viewport = req.viewport;
        job.output_fps = req.output_fps;
        job.output_dir = opt_.data_dir / "renders" / job_id;
        job.threads = 1;
        const int total = render_frame_count(job.timeline.total_seconds, job.output_fps);
        jobs_.update(job_id, [&](JobRecord& r) { r.frames_total = total; });
        auto files = render_tour(*cache, job, [&](int) { jobs_.update(job_id, [](JobRecord& r) { ++r.frames_done; }); });
        jobs_.update(job_id, [&](JobRecord& r) {
            r.status = JobStatus::done;
            r.output = job.output_dir.string();
            r.frames.clear();
            for (const auto& f : files) r.frames.push_back(f.filename().string());
        });
    }

    static void send_json(httplib::Response& res, const Json& body, int status = 200) {
        res.status = status;
        res.set_content(canonical_dump(body), "application/json");
    }

    static void send_error(httplib::Response& res, Errc code, const std::string& message) {
        send_json(res, {{"error", {{"code", std::string(errc_name(code))}, {"message", message}}}}, http_status(code));
    }

    template <class F>
    static httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.detail());
            } catch (const std::exception& e) {
                send_error(res, Errc::io_error, e.what());
            }
        };
    }

    static Json parse_body(const httplib::Request& req) {
        Json j = Json::parse(req.body, nullptr, false);
        if (j.is_discarded()) fail(Errc::decode_error, "request body is not valid JSON");
        return j;
    }

    static Tour tour_from_body(const httplib::Request& req) {
        const Json j = parse_body(req);
        if (j.is_object() && j.contains("fragment") && !j.contains("version")) {
            if (!j["fragment"].is_string()) fail(Errc::validation_error, "fragment: must be a string");
            return decode_tour(j["fragment"].get<std::string>());
        }
        return tour_from_json(j);
    }

    void routes() {
        server_.Get("/api/datasets", guarded([this](const httplib::Request&, httplib::Response& res) {
                        Json arr = Json::array();
                        for (const auto& m : list_datasets(opt_.data_dir)) arr.push_back(manifest_to_json(m));
                        send_json(res, arr);
                    }));

        server_.Get(R"(/api/datasets/([^/]+)/manifest)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, manifest_to_json(read_manifest(opt_.data_dir, req.matches[1].str())));
                    }));

        server_.Get(R"(/tiles/([^/]+)/(\d{1,9})/(\d{1,9})/(\d{1,9})_(\d{1,9})\.png)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto name = req.matches[1].str();
                        const auto m = cache_for(name)->manifest();
                        const TileAddress a{std::stoi(req.matches[2].str()), std::stoi(req.matches[3].str()),
                                            std::stoi(req.matches[4].str()), std::stoi(req.matches[5].str())};
                        if (!address_in_range(m, a)) fail(Errc::not_found, "tile " + to_string(a) + " out of range");
                        const auto bytes = detail::read_file_bytes(tile_path(opt_.data_dir, name, a));
                        res.set_header("Cache-Control", "public, max-age=31536000, immutable");
                        res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                    }));

        server_.Get("/api/tours", guarded([this](const httplib::Request&, httplib::Response& res) {
                        Json arr = Json::array();
                        for (const auto& r : tours_.list()) arr.push_back(tour_record_to_json(r));
                        send_json(res, arr);
                    }));

        server_.Post("/api/tours", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         send_json(res, tour_record_to_json(tours_.save(tour_from_body(req))), 201);
                     }));

        server_.Get(R"(/api/tours/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, tour_record_to_json(tours_.get(req.matches[1].str())));
                    }));

        server_.Post(R"(/api/tours/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         const auto id = req.matches[1].str();
                         (void)tours_.get(id);
                         send_json(res, tour_record_to_json(tours_.save(tour_from_body(req), id)));
                     }));

        server_.Delete(R"(/api/tours/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                           tours_.remove(req.matches[1].str());
                           res.status = 204;
                       }));

        server_.Post("/api/compile", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         const Tour tour = tour_from_body(req);
                         const auto tl = compile_tour(tour, read_manifest(opt_.data_dir, tour.dataset));
                         Json segs = Json::array();
                         for (const auto& s : tl.segments) {
                             Json dwells = Json::array();
                             for (const auto& d : s.dwell_events)
                                 dwells.push_back({{"offset_seconds", d.offset_seconds}, {"hold_seconds", d.hold_seconds}});
                             segs.push_back({{"motion", std::string(to_string(s.motion))},
                                             {"t_start", s.t_start},
                                             {"active_seconds", s.active_seconds},
                                             {"frame_path", s.frame_path},
                                             {"dwell_events", dwells}});
                         }
                         send_json(res, {{"dataset", tl.dataset}, {"total_seconds", tl.total_seconds}, {"segments", segs}});
                     }));

        server_.Post("/api/render", guarded([this](const httplib::Request& req, httplib::Response& res) {
                         const Json j = parse_body(req);
                         if (!j.is_object() || !j.contains("tour_id") || !j["tour_id"].is_string())
                             fail(Errc::validation_error, "tour_id: missing");
                         RenderRequest r;
                         r.tour_id = j["tour_id"].get<std::string>();
                         auto num = [&](const char* key, double fallback) {
                             if (!j.contains(key)) return fallback;
                             if (!j[key].is_number()) fail(Errc::validation_error, std::string(key) + ": must be a number");
                             return j[key].get<double>();
                         };
                         r.viewport.width = static_cast<int>(num("width", 1280));
                         r.viewport.height = static_cast<int>(num("height", 720));
                         r.output_fps = num("output_fps", default_output_fps);
                         send_json(res, job_record_to_json(submit_render(r)), 202);
                     }));

        server_.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        send_json(res, job_record_to_json(jobs_.get(req.matches[1].str())));
                    }));

        server_.Get("/", guarded([this](const httplib::Request&, httplib::Response& res) {
                        const auto index = opt_.ui_dir / "index.html";
                        if (!fs::exists(index)) fail(Errc::not_found, "no editor bundle installed");
                        const auto bytes = detail::read_file_bytes(index);
                        res.set_content(std::string(bytes.begin(), bytes.end()), "text/html");
                    }));
        if (fs::is_directory(opt_.ui_dir)) server_.set_mount_point("/ui", opt_.ui_dir.string());
    }

    StudioOptions opt_;
    TourStore tours_;
    JobQueue jobs_;
    std::mutex cache_mutex_;
    std::map<std::string, std::shared_ptr<TileCache>> caches_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace studio
