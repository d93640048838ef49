// studio: command-line front door for fixtures, ingestion, tour compilation,
// rendering, the HTTP service and the share-link codec.

#include "studio/service.hpp"
#include "studio/studio.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace {

using namespace studio;

std::string default_data_dir() {
    if (const char* env = std::getenv("STUDIO_DATA_DIR"); env && *env) return env;
    return "data";
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// "-" reads stdin, an existing path reads the file, anything else is literal text.
std::string read_input(const std::string& arg) {
    if (arg == "-") return trim({std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()});
    std::error_code ec;
    if (fs::is_regular_file(arg, ec)) {
        auto bytes = detail::read_file_bytes(arg);
        return trim({bytes.begin(), bytes.end()});
    }
    return trim(arg);
}

bool looks_like_fragment(const std::string& text, std::string_view prefix) {
    return text.starts_with(prefix) || (text.starts_with('#') && std::string_view(text).substr(1).starts_with(prefix));
}

Tour load_tour(const std::string& arg) {
    const auto text = read_input(arg);
    if (looks_like_fragment(text, tour_fragment_prefix)) return decode_tour(text);
    return parse_tour_document(text);
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Timelapse storytelling studio"};
    app.require_subcommand(1);

    std::string data_dir = default_data_dir();

    auto* fixture = app.add_subcommand("fixture", "Write a deterministic synthetic timelapse");
    int fx_width = 1024, fx_height = 1024, fx_frames = 60;
    std::string fx_output;
    fixture->add_option("--width", fx_width, "Frame width")->capture_default_str();
    fixture->add_option("--height", fx_height, "Frame height")->capture_default_str();
    fixture->add_option("--frames", fx_frames, "Number of frames")->capture_default_str();
    fixture->add_option("--output,-o", fx_output, "Output directory")->required();

    auto* ingest = app.add_subcommand("ingest", "Build a tile pyramid from a directory of PNG frames");
    IngestOptions ing;
    std::string ing_input, ing_labels;
    ingest->add_option("--input,-i", ing_input, "Directory of frames")->required();
    ingest->add_option("--name,-n", ing.name, "Dataset name")->required();
    ingest->add_option("--data-dir", data_dir, "Data directory")->capture_default_str();
    ingest->add_option("--tile-size", ing.tile_size, "Tile edge in pixels")->capture_default_str();
    ingest->add_option("--fps", ing.fps, "Native frames per second")->capture_default_str();
    ingest->add_option("--labels", ing_labels, "File with one display timestamp per frame");
    ingest->add_option("--threads", ing.threads, "Worker threads (0 = all cores)");

    auto* compile = app.add_subcommand("compile", "Compile a tour and print its timeline");
    std::string tour_arg;
    bool compile_json = false;
    compile->add_option("tour", tour_arg, "Tour document, fragment, file, or - for stdin")->required();
    compile->add_option("--data-dir", data_dir, "Data directory")->capture_default_str();
    compile->add_flag("--json", compile_json, "Print keyframe times as JSON");

    auto* render = app.add_subcommand("render", "Render a tour to a PNG frame sequence");
    Viewport vp;
    double output_fps = default_output_fps;
    std::string render_output;
    unsigned render_threads = 0;
    render->add_option("tour", tour_arg, "Tour document, fragment, file, or - for stdin")->required();
    render->add_option("--data-dir", data_dir, "Data directory")->capture_default_str();
    render->add_option("--width", vp.width, "Output width")->capture_default_str();
    render->add_option("--height", vp.height, "Output height")->capture_default_str();
    render->add_option("--output-fps", output_fps, "Output frames per second")->capture_default_str();
    render->add_option("--output,-o", render_output, "Output directory")->required();
    render->add_option("--threads", render_threads, "Worker threads (0 = all cores)");

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    int port = 8080;
    std::string host = "0.0.0.0", ui_dir;
    serve->add_option("--data-dir", data_dir, "Data directory")->capture_default_str();
    serve->add_option("--port", port, "Listen port")->capture_default_str();
    serve->add_option("--host", host, "Listen address")->capture_default_str();
    serve->add_option("--ui-dir", ui_dir, "Editor bundle directory");

    auto* encode = app.add_subcommand("encode", "Encode a tour document (or a view) as a share fragment");
    std::string encode_arg, view_arg;
    encode->add_option("tour", encode_arg, "Tour document, file, or - for stdin");
    encode->add_option("--view", view_arg, "cx,cy,scale,frame");

    auto* decode = app.add_subcommand("decode", "Decode a share fragment to its canonical document");
    std::string decode_arg;
    decode->add_option("fragment", decode_arg, "Fragment, file, or - for stdin")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "studio: usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*fixture) {
            generate_fixture(fx_width, fx_height, fx_frames, fx_output);
            std::cout << "wrote " << fx_frames << " frames to " << fx_output << "\n";
        } else if (*ingest) {
            ing.input_dir = ing_input;
            ing.data_dir = data_dir;
            if (!ing_labels.empty()) ing.frame_labels = read_lines(ing_labels);
            const auto m = ingest_frames(ing);
            std::cout << canonical_dump(manifest_to_json(m)) << "\n";
        } else if (*compile) {
            const Tour tour = load_tour(tour_arg);
            const auto tl = compile_tour(tour, read_manifest(data_dir, tour.dataset));
            if (compile_json) {
                Json out = {{"total_seconds", tl.total_seconds}, {"keyframe_times", keyframe_times(tl)}};
                std::cout << canonical_dump(out) << "\n";
            } else {
                std::cout << timeline_report(tl);
            }
        } else if (*render) {
            const Tour tour = load_tour(tour_arg);
            TileCache cache(data_dir, read_manifest(data_dir, tour.dataset));
            RenderJob job{tour.dataset, compile_tour(tour, cache.manifest()), vp, output_fps, render_output, render_threads};
            const auto files = render_tour(cache, job);
            std::cout << "rendered " << files.size() << " frames to " << render_output << "\n";
        } else if (*serve) {
            StudioOptions opt;
            opt.data_dir = data_dir;
            opt.ui_dir = ui_dir;
            Studio studio(opt);
            std::cerr << "studio: serving " << data_dir << " on " << host << ":" << port << "\n";
            studio.run(host, port);
        } else if (*encode) {
            if (!view_arg.empty()) {
                std::vector<double> xs;
                std::stringstream ss(view_arg);
                for (std::string part; std::getline(ss, part, ',');) xs.push_back(detail::parse_real(trim(part)));
                if (xs.size() != 4) fail(Errc::invalid_argument, "--view expects cx,cy,scale,frame");
                std::cout << encode_view(View{xs[0], xs[1], xs[2], xs[3]}) << "\n";
            } else {
                if (encode_arg.empty()) fail(Errc::invalid_argument, "encode needs a tour document or --view");
                std::cout << encode_tour(parse_tour_document(read_input(encode_arg))).fragment << "\n";
            }
        } else if (*decode) {
            const auto text = read_input(decode_arg);
            if (looks_like_fragment(text, "v=")) {
                const View v = decode_view(text);
                std::cout << canonical_dump({{"cx", v.cx}, {"cy", v.cy}, {"scale", v.scale}, {"frame", v.frame}}) << "\n";
            } else {
                std::cout << canonical_tour_document(decode_tour(text)) << "\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << "studio: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "studio: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
