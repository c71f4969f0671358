#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evdeblur/def.hpp"
#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/io.hpp"
#include "evdeblur/metrics.hpp"
#include "evdeblur/parallel.hpp"
#include "evdeblur/recon.hpp"
#include "evdeblur/simulator.hpp"
#include "evdeblur/warp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evdeblur;

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_atomic(const fs::path& path, const std::string& data) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw std::runtime_error(path.string() + ": write failed");
    }
    fs::rename(tmp, path);
}

void note_written(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

void write_manifest(const fs::path& dir, const json& j) {
    fs::path p = dir / "run.json";
    write_text_atomic(p, j.dump(2) + "\n");
    note_written(p);
}

Vec2 parse_velocity(const std::string& s) {
    size_t comma = s.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= s.size())
        throw std::runtime_error("velocity must be 'vx,vy', got '" + s + "'");
    Vec2 v;
    auto rx = std::from_chars(s.data(), s.data() + comma, v.x);
    auto ry = std::from_chars(s.data() + comma + 1, s.data() + s.size(), v.y);
    if (rx.ec != std::errc() || rx.ptr != s.data() + comma || ry.ec != std::errc() ||
        ry.ptr != s.data() + s.size())
        throw std::runtime_error("velocity must be 'vx,vy', got '" + s + "'");
    return v;
}

// Streams written by `simulate` are already on the [1, T] clock; anything
// else is remapped onto it.
EventStream load_normalized_events(const fs::path& path, int frame_count) {
    EventStream ev = read_events(path);
    if (ev.t_begin == 1.0 && ev.t_end == static_cast<double>(frame_count)) return ev;
    return normalize_time(ev, frame_count);
}

long frame_index(const fs::path& p) {
    std::string stem = p.stem().string();
    size_t end = stem.size();
    size_t start = end;
    while (start > 0 && std::isdigit(static_cast<unsigned char>(stem[start - 1]))) --start;
    if (start == end) return -1;
    long v = -1;
    std::from_chars(stem.data() + start, stem.data() + end, v);
    return v;
}

std::map<long, fs::path> indexed_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a directory");
    std::map<long, fs::path> out;
    for (const auto& ent : fs::directory_iterator(dir)) {
        if (!ent.is_regular_file() || ent.path().extension() != ".imf1") continue;
        long idx = frame_index(ent.path());
        if (idx < 0) continue;
        if (!out.emplace(idx, ent.path()).second)
            throw std::runtime_error(dir.string() + ": duplicate frame index " +
                                     std::to_string(idx));
    }
    if (out.empty()) throw std::runtime_error(dir.string() + ": no indexed .imf1 frames");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-assisted motion deblurring toolkit"};
    app.require_subcommand(1);

    unsigned threads = 0;
    int exit_code = 0;

    auto add_threads = [&threads](CLI::App* cmd) {
        cmd->add_option("--threads", threads, "Worker threads, 0 means hardware count")
            ->capture_default_str();
    };

    // simulate
    std::string sim_pattern;
    int sim_size = 0;
    int sim_frames = 0;
    std::string sim_velocity = "1,0";
    double sim_tau = 0.1;
    std::string sim_out = "out";
    double sim_eps = 1e-3;
    int sim_substeps = 16;
    unsigned sim_seed = 0;

    CLI::App* sim = app.add_subcommand(
        "simulate", "Render an analytic moving scene, its blur and its event stream");
    sim->add_option("pattern", sim_pattern, "translating_bars | rotating_dot | ramp")->required();
    sim->add_option("size", sim_size, "Square sensor side, pixels")
        ->required()
        ->check(CLI::Range(16, 4096));
    sim->add_option("frames", sim_frames, "Sharp frames across the exposure, at least 2")
        ->required()
        ->check(CLI::Range(2, 100000));
    sim->add_option("velocity", sim_velocity, "Per-step motion 'vx,vy', pattern-specific units")
        ->capture_default_str();
    sim->add_option("tau", sim_tau, "Contrast threshold, log-intensity units")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sim->add_option("out_dir", sim_out, "Output directory")->capture_default_str();
    sim->add_option("--eps", sim_eps, "Intensity floor before taking logs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sim->add_option("--substeps", sim_substeps, "Interpolation segments per frame gap")
        ->capture_default_str()
        ->check(CLI::Range(1, 4096));
    sim->add_option("--seed", sim_seed, "Echoed into run.json; the patterns are analytic")
        ->capture_default_str();
    add_threads(sim);

    sim->callback([&] {
        set_max_threads(threads);
        SimConfig cfg;
        cfg.tau = sim_tau;
        cfg.eps = sim_eps;
        cfg.substeps = sim_substeps;
        Vec2 vel = parse_velocity(sim_velocity);
        Fixture fix = make_fixture(parse_fixture_pattern(sim_pattern), sim_size, sim_size,
                                   sim_frames, vel, cfg);

        fs::path dir(sim_out);
        fs::create_directories(dir);
        for (int t = 1; t <= sim_frames; ++t) {
            fs::path p = dir / ("frame_" + std::to_string(t) + ".imf1");
            write_image(p, fix.frames.frame(t));
            note_written(p);
        }
        fs::path blur_path = dir / "blur.imf1";
        write_image(blur_path, fix.blur);
        note_written(blur_path);
        fs::path events_path = dir / "events.evt1";
        write_events(events_path, fix.events);
        note_written(events_path);
        for (int i = 1; i < sim_frames; ++i) {
            fs::path p = dir / ("flow_" + std::to_string(i) + ".flo1");
            write_flow(p, fix.flows[static_cast<size_t>(i) - 1]);
            note_written(p);
        }
        write_manifest(dir, json{{"subcommand", "simulate"},
                                 {"pattern", sim_pattern},
                                 {"size", sim_size},
                                 {"frames", sim_frames},
                                 {"velocity", sim_velocity},
                                 {"vx", vel.x},
                                 {"vy", vel.y},
                                 {"tau", sim_tau},
                                 {"eps", sim_eps},
                                 {"substeps", sim_substeps},
                                 {"seed", sim_seed},
                                 {"threads", threads}});
    });

    // deblur
    std::string deb_blur;
    std::string deb_events;
    std::string deb_tau_arg;
    std::vector<double> deb_grid;
    int deb_frames = 0;
    std::string deb_out = "out";

    CLI::App* deb = app.add_subcommand(
        "deblur", "Recover the sharp frame sequence from a blurred capture and its events");
    deb->add_option("blur", deb_blur, "Blurred capture, IMF1 or PGM")->required();
    deb->add_option("events", deb_events, "Event stream, EVT1")->required();
    deb->add_option("tau", deb_tau_arg,
                    "Contrast threshold in log-intensity units, or 'auto' with --estimate-tau")
        ->required();
    deb->add_option("frames", deb_frames, "Frames to reconstruct, at least 2")
        ->required()
        ->check(CLI::Range(2, 100000));
    deb->add_option("out_dir", deb_out, "Output directory")->capture_default_str();
    deb->add_option("--estimate-tau", deb_grid,
                    "Comma-separated candidate thresholds, picked from via tau 'auto'")
        ->delimiter(',');
    add_threads(deb);

    deb->callback([&] {
        set_max_threads(threads);
        Image blur = read_image(deb_blur);
        EventStream ev = load_normalized_events(deb_events, deb_frames);

        double tau = 0.0;
        bool estimated = deb_tau_arg == "auto";
        if (estimated) {
            if (deb_grid.empty())
                throw std::runtime_error("tau 'auto' needs --estimate-tau candidates");
            tau = estimate_tau(blur, ev, deb_frames, deb_grid);
            std::cout << "estimated tau " << fmt(tau) << "\n";
        } else {
            if (!deb_grid.empty())
                throw std::runtime_error(
                    "pass either a numeric tau or --estimate-tau with tau 'auto', not both");
            auto res = std::from_chars(deb_tau_arg.data(),
                                       deb_tau_arg.data() + deb_tau_arg.size(), tau);
            if (res.ec != std::errc() || res.ptr != deb_tau_arg.data() + deb_tau_arg.size() ||
                !(tau > 0.0))
                throw std::runtime_error("tau must be a positive number or 'auto', got '" +
                                         deb_tau_arg + "'");
        }
        FrameSequence rec = sequential_deblur(blur, ev, tau, deb_frames);

        fs::path dir(deb_out);
        fs::create_directories(dir);
        for (int t = 1; t <= deb_frames; ++t) {
            fs::path p = dir / ("recon_" + std::to_string(t) + ".imf1");
            write_image(p, rec.frame(t));
            note_written(p);
        }
        json manifest{{"subcommand", "deblur"},
                      {"blur", deb_blur},
                      {"events", deb_events},
                      {"tau", tau},
                      {"frames", deb_frames},
                      {"threads", threads}};
        if (estimated) manifest["estimated_from"] = deb_grid;
        write_manifest(dir, manifest);
    });

    // guidance
    std::string gui_events;
    std::string gui_flow;
    std::string gui_out = "out";
    std::string gui_params;
    int gui_frames = 0;
    int gui_interval = 1;
    int gui_chunks = 8;
    int gui_k = 2;
    double gui_lambda = 1.0;
    double gui_sigma = 1.0;
    int gui_L = 20;

    CLI::App* gui = app.add_subcommand(
        "guidance", "Compute the directional-filter boundary guidance map for one interval");
    gui->add_option("events", gui_events, "Event stream, EVT1")->required();
    gui->add_option("flow", gui_flow, "Motion field at the interval start, FLO1")->required();
    gui->add_option("out_dir", gui_out, "Output directory")->capture_default_str();
    gui->add_option("--frames", gui_frames,
                    "Frame count of the exposure; 0 infers it from the event clock")
        ->capture_default_str()
        ->check(CLI::Range(0, 100000));
    gui->add_option("--interval", gui_interval, "Unit interval to filter, 1-based")
        ->capture_default_str()
        ->check(CLI::Range(1, 100000));
    gui->add_option("--chunks", gui_chunks, "Event chunks per interval")
        ->capture_default_str()
        ->check(CLI::Range(1, 1024));
    gui->add_option("--k", gui_k, "Taps run -k..k")->capture_default_str()->check(CLI::Range(1, 16));
    gui->add_option("--lambda", gui_lambda, "Stride per tap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gui->add_option("--sigma", gui_sigma, "Velocity resampler bandwidth")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    gui->add_option("--L", gui_L, "Resampling window side, pixels")
        ->capture_default_str()
        ->check(CLI::Range(1, 4096));
    gui->add_option("--params", gui_params, "DEF1 parameter file; overrides the flag defaults");
    add_threads(gui);

    gui->callback([&] {
        set_max_threads(threads);
        EventStream raw = read_events(gui_events);
        int frames = gui_frames;
        if (frames == 0) {
            double span = raw.t_end;
            if (raw.t_begin == 1.0 && span >= 2.0 && span == static_cast<double>(static_cast<int>(span)))
                frames = static_cast<int>(span);
            else
                throw std::runtime_error(gui_events +
                                         ": cannot infer the frame count; pass --frames");
        }
        if (gui_interval + 1 > frames)
            throw std::runtime_error("interval " + std::to_string(gui_interval) +
                                     " lies past the last frame " + std::to_string(frames));
        EventStream ev = raw.t_begin == 1.0 && raw.t_end == static_cast<double>(frames)
                             ? std::move(raw)
                             : normalize_time(raw, frames);

        std::vector<std::pair<double, double>> intervals;
        for (int i = 1; i < frames; ++i)
            intervals.emplace_back(static_cast<double>(i), static_cast<double>(i + 1));
        StackedEventFrames volume = bin_stacked_frames(ev, intervals, gui_chunks);
        FlowField flow = read_flow(gui_flow);

        DefParams params;
        if (!gui_params.empty()) {
            params = read_def(gui_params);
        } else {
            params.k = gui_k;
            params.lambda = gui_lambda;
            params.sigma = gui_sigma;
            params.L = gui_L;
            params.c = Image(flow.height(), flow.width(), gui_interval + 0.5);
            params.alpha.assign(static_cast<size_t>(params.plane_count()),
                                Image(flow.height(), flow.width(),
                                      1.0 / params.plane_count()));
        }

        Image g = directional_filter(volume, flow, params,
                                     {static_cast<double>(gui_interval),
                                      static_cast<double>(gui_interval + 1)});

        fs::path dir(gui_out);
        fs::create_directories(dir);
        fs::path p = dir / "guidance.imf1";
        write_image(p, g);
        note_written(p);
        write_manifest(dir, json{{"subcommand", "guidance"},
                                 {"events", gui_events},
                                 {"flow", gui_flow},
                                 {"params", gui_params},
                                 {"frames", frames},
                                 {"interval", gui_interval},
                                 {"chunks", gui_chunks},
                                 {"k", params.k},
                                 {"lambda", params.lambda},
                                 {"sigma", params.sigma},
                                 {"L", params.L},
                                 {"threads", threads}});
    });

    // gradcheck
    int gc_configs = 100;
    unsigned gc_seed = 1234;
    double gc_threshold = 1e-3;

    CLI::App* gc = app.add_subcommand(
        "gradcheck", "Verify the filter gradients against central differences");
    gc->add_option("--configs", gc_configs, "Randomized configurations to test")
        ->capture_default_str()
        ->check(CLI::Range(1, 100000));
    gc->add_option("--seed", gc_seed, "Random seed")->capture_default_str();
    gc->add_option("--threshold", gc_threshold, "Max allowed relative error")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_threads(gc);

    gc->callback([&] {
        set_max_threads(threads);
        GradCheckReport rep = run_gradient_check(gc_configs, gc_seed, gc_threshold);
        std::cout << "configs " << rep.configs << " seed " << gc_seed << " threshold "
                  << fmt(rep.threshold) << "\n";
        std::cout << "checks logits " << rep.checks_logits << " c " << rep.checks_c << " volume "
                  << rep.checks_volume << " skipped-c " << rep.skipped_c << "\n";
        std::cout << "max rel logits " << fmt(rep.max_rel_logits) << "\n";
        std::cout << "max rel c " << fmt(rep.max_rel_c) << "\n";
        std::cout << "max rel volume " << fmt(rep.max_rel_volume) << "\n";
        if (rep.passed()) {
            std::cout << "gradcheck PASS\n";
        } else {
            std::cout << "gradcheck FAIL: max relative error " << fmt(rep.max_rel())
                      << " >= " << fmt(rep.threshold) << "\n";
            exit_code = 1;
        }
    });

    // eval
    std::string ev_recon;
    std::string ev_truth;

    CLI::App* evc = app.add_subcommand(
        "eval", "Report PSNR and SSIM of reconstructed frames against ground truth");
    evc->add_option("recon_dir", ev_recon, "Directory of reconstructed .imf1 frames")->required();
    evc->add_option("truth_dir", ev_truth, "Directory of ground-truth .imf1 frames")->required();
    add_threads(evc);

    evc->callback([&] {
        set_max_threads(threads);
        std::map<long, fs::path> recon = indexed_frames(ev_recon);
        std::map<long, fs::path> truth = indexed_frames(ev_truth);
        for (const auto& [idx, path] : recon)
            if (!truth.count(idx))
                throw std::runtime_error(ev_truth + ": missing frame index " +
                                         std::to_string(idx));
        for (const auto& [idx, path] : truth)
            if (!recon.count(idx))
                throw std::runtime_error(ev_recon + ": missing frame index " +
                                         std::to_string(idx));

        FrameSequence a;
        FrameSequence b;
        std::vector<long> ids;
        for (const auto& [idx, path] : recon) {
            ids.push_back(idx);
            a.frames.push_back(read_image(path));
            b.frames.push_back(read_image(truth.at(idx)));
        }
        EvalReport rep = evaluate_sequence(a, b);
        for (size_t i = 0; i < ids.size(); ++i)
            std::cout << "frame " << ids[i] << " psnr " << fmt(rep.frame_psnr[i]) << " ssim "
                      << fmt(rep.frame_ssim[i]) << "\n";
        std::cout << "mean psnr " << fmt(rep.mean_psnr) << " ssim " << fmt(rep.mean_ssim)
                  << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
