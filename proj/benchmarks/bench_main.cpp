#include <benchmark/benchmark.h>

#include <random>
#include <utility>
#include <vector>

#include "evdeblur/def.hpp"
#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/metrics.hpp"
#include "evdeblur/recon.hpp"
#include "evdeblur/simulator.hpp"
#include "evdeblur/warp.hpp"

using namespace evdeblur;

namespace {

// DAVIS-class sensor geometry.
constexpr int kH = 180;
constexpr int kW = 240;
constexpr int kT = 7;

EventStream make_stream(int count) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> time_dist(1.0, static_cast<double>(kT));
    std::uniform_int_distribution<int> x_dist(0, kW - 1);
    std::uniform_int_distribution<int> y_dist(0, kH - 1);
    std::bernoulli_distribution pol(0.5);
    EventStream s;
    s.width = kW;
    s.height = kH;
    s.t_begin = 1.0;
    s.t_end = kT;
    s.events.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        s.events.push_back({time_dist(rng), x_dist(rng), y_dist(rng), pol(rng) ? 1 : -1});
    sort_canonical(s.events);
    return s;
}

std::vector<std::pair<double, double>> unit_intervals() {
    std::vector<std::pair<double, double>> intervals;
    for (int i = 1; i < kT; ++i)
        intervals.push_back({static_cast<double>(i), static_cast<double>(i + 1)});
    return intervals;
}

Image make_image(unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    Image img(kH, kW);
    for (size_t i = 0; i < img.size(); ++i) img[i] = dist(rng);
    return img;
}

void bm_bin_stacked_frames(benchmark::State& state) {
    EventStream stream = make_stream(200000);
    auto intervals = unit_intervals();
    for (auto _ : state) {
        StackedEventFrames stacked = bin_stacked_frames(stream, intervals, 8);
        benchmark::DoNotOptimize(stacked.channels.data());
    }
}
BENCHMARK(bm_bin_stacked_frames);

void bm_solve_latest(benchmark::State& state) {
    EventStream stream = make_stream(200000);
    Image blur = make_image(11);
    for (auto _ : state) {
        Image latest = solve_latest(blur, stream, 0.1, kT);
        benchmark::DoNotOptimize(latest.data().data());
    }
}
BENCHMARK(bm_solve_latest);

void bm_sequential_deblur(benchmark::State& state) {
    EventStream stream = make_stream(200000);
    Image blur = make_image(13);
    for (auto _ : state) {
        FrameSequence seq = sequential_deblur(blur, stream, 0.1, kT);
        benchmark::DoNotOptimize(seq.frames.data());
    }
}
BENCHMARK(bm_sequential_deblur);

void bm_directional_filter(benchmark::State& state) {
    EventStream stream = make_stream(200000);
    StackedEventFrames volume = bin_stacked_frames(stream, unit_intervals(), 8);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> c_dist(1.2, 1.8);
    std::uniform_real_distribution<double> f_dist(-1.0, 1.0);
    std::uniform_real_distribution<double> logit(-1.0, 1.0);
    Image centers(kH, kW);
    for (size_t i = 0; i < centers.size(); ++i) centers[i] = c_dist(rng);
    std::vector<Image> logits(5, Image(kH, kW));
    for (Image& plane : logits)
        for (size_t i = 0; i < plane.size(); ++i) plane[i] = logit(rng);
    DefParams params = def_params_from_logits(centers, logits);
    FlowField flow(kH, kW);
    for (size_t i = 0; i < flow.u.size(); ++i) {
        flow.u[i] = f_dist(rng);
        flow.v[i] = f_dist(rng);
    }

    for (auto _ : state) {
        Image g = directional_filter(volume, flow, params, {1.0, 2.0});
        benchmark::DoNotOptimize(g.data().data());
    }
}
BENCHMARK(bm_directional_filter);

void bm_generate_events(benchmark::State& state) {
    SimConfig cfg;
    Fixture fx = make_fixture(FixturePattern::TranslatingBars, kH, kW, 5, {1.0, 0.0}, cfg);
    for (auto _ : state) {
        EventStream s = generate_events(fx.frames, cfg);
        benchmark::DoNotOptimize(s.events.data());
    }
}
BENCHMARK(bm_generate_events);

void bm_ssim(benchmark::State& state) {
    Image a = make_image(19);
    Image b = make_image(23);
    for (auto _ : state) {
        double v = ssim(a, b);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(bm_ssim);

}  // namespace

BENCHMARK_MAIN();
