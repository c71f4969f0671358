#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "evdeblur/def.hpp"
#include "evdeblur/parallel.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace evdeblur;

namespace {

StackedEventFrames make_volume(int height, int width, int chunks,
                               std::vector<std::pair<double, double>> intervals,
                               std::mt19937* rng = nullptr) {
    StackedEventFrames v;
    v.height = height;
    v.width = width;
    v.chunks_per_interval = chunks;
    v.intervals = std::move(intervals);
    for (const auto& [a, b] : v.intervals) {
        for (int j = 0; j < chunks; ++j) v.chunk_bounds.push_back(a + (b - a) * j / chunks);
    }
    v.chunk_bounds.push_back(v.intervals.back().second);
    v.channels.assign(static_cast<size_t>(chunks) * v.intervals.size(), Image(height, width));
    if (rng) {
        std::uniform_int_distribution<int> sums(-3, 3);
        for (Image& ch : v.channels)
            for (size_t i = 0; i < ch.size(); ++i) ch[i] = sums(*rng);
    }
    return v;
}

DefParams softmax_params(std::mt19937& rng, int height, int width, double c_lo, double c_hi,
                         int k = 2, double lambda = 1.0, double sigma = 1.0, int L = 20) {
    std::uniform_real_distribution<double> c_dist(c_lo, c_hi);
    std::uniform_real_distribution<double> logit(-1.5, 1.5);
    Image centers(height, width);
    for (size_t i = 0; i < centers.size(); ++i) centers[i] = c_dist(rng);
    std::vector<Image> logits(static_cast<size_t>(2 * k + 1), Image(height, width));
    for (Image& plane : logits)
        for (size_t i = 0; i < plane.size(); ++i) plane[i] = logit(rng);
    return def_params_from_logits(centers, logits, lambda, sigma, L);
}

FlowField random_flow(std::mt19937& rng, int height, int width, double mag) {
    std::uniform_real_distribution<double> dist(-mag, mag);
    FlowField f(height, width);
    for (size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = dist(rng);
        f.v[i] = dist(rng);
    }
    return f;
}

bool images_equal(const Image& a, const Image& b) {
    return a.same_size(b) && max_abs_diff(a, b) == 0.0;
}

}  // namespace

TEST_CASE("normalized exponentials of logits land on the simplex") {
    std::mt19937 rng(61);
    Image centers(4, 4, 1.5);
    std::vector<Image> logits(5, Image(4, 4));
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (Image& plane : logits)
        for (size_t i = 0; i < plane.size(); ++i) plane[i] = dist(rng);
    logits[0].at(0, 0) = 700.0;
    logits[1].at(0, 0) = -700.0;
    logits[3].at(2, 2) = -700.0;

    DefParams p = def_params_from_logits(centers, logits);
    CHECK(p.k == 2);
    CHECK(p.plane_count() == 5);
    for (size_t i = 0; i < centers.size(); ++i) {
        double sum = 0.0;
        for (const Image& plane : p.alpha) {
            CHECK(plane[i] >= 0.0);
            sum += plane[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    CHECK_THROWS_AS(def_params_from_logits(centers, std::vector<Image>(4, Image(4, 4))),
                    std::invalid_argument);
    CHECK_THROWS_AS(def_params_from_logits(centers, std::vector<Image>(1, Image(4, 4))),
                    std::invalid_argument);
    CHECK_THROWS_AS(def_params_from_logits(centers, std::vector<Image>(5, Image(3, 4))),
                    std::invalid_argument);
}

TEST_CASE("parameter validation rejects broken configurations") {
    std::mt19937 rng(63);
    DefParams good = softmax_params(rng, 3, 3, 1.0, 2.0);
    CHECK_NOTHROW(validate_def_params(good, "t"));

    DefParams p = good;
    p.k = 0;
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
    p = good;
    p.lambda = 0.0;
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
    p = good;
    p.sigma = -1.0;
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
    p = good;
    p.L = 0;
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
    p = good;
    p.alpha.pop_back();
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
    p = good;
    p.alpha[0].at(0, 0) = -0.1;
    CHECK(throws_with([&] { validate_def_params(p, "t"); }, "negative coefficient"));
    p = good;
    p.alpha[0].at(1, 1) += 0.5;
    CHECK(throws_with([&] { validate_def_params(p, "t"); }, "sum to 1"));
    p = good;
    p.c.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(validate_def_params(p, "t"), std::invalid_argument);
}

TEST_CASE("velocity propagation shifts pixels along their own flow") {
    FlowField flow(3, 4, 2.0, 0.0);
    ScatterSamples s = propagate_velocity(flow, 1.5, 1.0);
    CHECK(s.height == 3);
    CHECK(s.width == 4);
    REQUIRE(s.positions.size() == 12);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) {
            const Vec2& pos = s.positions[static_cast<size_t>(y) * 4 + x];
            CHECK(pos.x == x + 1.0);
            CHECK(pos.y == static_cast<double>(y));
            const Vec2& vel = s.velocities[static_cast<size_t>(y) * 4 + x];
            CHECK(vel.x == 2.0);
            CHECK(vel.y == 0.0);
        }

    ScatterSamples at_start = propagate_velocity(flow, 1.0, 1.0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x) {
            CHECK(at_start.positions[static_cast<size_t>(y) * 4 + x].x ==
                  static_cast<double>(x));
            CHECK(at_start.positions[static_cast<size_t>(y) * 4 + x].y ==
                  static_cast<double>(y));
        }

    FlowField zero(3, 4);
    ScatterSamples still = propagate_velocity(zero, 1.9, 1.0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            CHECK(still.positions[static_cast<size_t>(y) * 4 + x].x == static_cast<double>(x));

    CHECK(throws_with([&] { propagate_velocity(flow, 0.5, 1.0); }, "precedes"));
}

TEST_CASE("velocity resampling returns a constant field unchanged") {
    std::mt19937 rng(65);
    for (int trial = 0; trial < 5; ++trial) {
        FlowField flow(9, 9, 0.7, -0.3);
        std::uniform_real_distribution<double> c_dist(1.0, 2.0);
        double c = c_dist(rng);
        ScatterSamples s = propagate_velocity(flow, c, 1.0);
        std::uniform_real_distribution<double> t_dist(2.0, 7.0);
        Vec2 got = resample_velocity(s, {t_dist(rng), t_dist(rng)}, 1.0, 20);
        CHECK(std::abs(got.x - 0.7) <= 1e-12);
        CHECK(std::abs(got.y - -0.3) <= 1e-12);
    }
}

TEST_CASE("velocity resampling keeps a lone sample and averages a mirrored pair") {
    ScatterSamples s;
    s.height = 2;
    s.width = 2;
    s.positions = {{4.0, 4.0}, {100.0, 100.0}, {-50.0, 3.0}, {70.0, -9.0}};
    s.velocities = {{0.3, -1.2}, {9.0, 9.0}, {9.0, 9.0}, {9.0, 9.0}};
    Vec2 lone = resample_velocity(s, {4.4, 4.2}, 1.0, 4);
    CHECK(lone.x == 0.3);
    CHECK(lone.y == -1.2);

    ScatterSamples pair;
    pair.height = 2;
    pair.width = 2;
    pair.positions = {{4.0, 4.0}, {5.0, 4.0}};
    pair.velocities = {{0.3, -1.2}, {0.7, 0.4}};
    Vec2 mean = resample_velocity(pair, {4.5, 4.0}, 1.0, 4);
    CHECK(mean.x == (0.3 + 0.7) / 2.0);
    CHECK(mean.y == (-1.2 + 0.4) / 2.0);
}

TEST_CASE("velocity resampling falls back to the nearest grid flow") {
    ScatterSamples s;
    s.height = 2;
    s.width = 2;
    s.positions = {{90.0, 90.0}, {91.0, 90.0}, {90.0, 91.0}, {91.0, 91.0}};
    s.velocities = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {4.0, 0.0}};
    Vec2 got = resample_velocity(s, {0.4, 1.3}, 1.0, 4);
    CHECK(got.x == 3.0);
    CHECK(got.y == 0.0);
}

TEST_CASE("volume sampling interpolates and pads with zero") {
    std::mt19937 rng(67);
    StackedEventFrames v = make_volume(4, 5, 8, {{1.0, 2.0}}, &rng);
    for (int ch = 0; ch < 8; ++ch)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x)
                CHECK(trilinear_sample(v, x, y, ch) ==
                      v.channels[static_cast<size_t>(ch)].at(y, x));

    StackedEventFrames two = make_volume(2, 2, 2, {{1.0, 2.0}});
    two.channels[0] = Image(2, 2, 0.0);
    two.channels[1] = Image(2, 2, 4.0);
    CHECK(trilinear_sample(two, 0.0, 0.0, 0.5) == 2.0);
    CHECK(trilinear_sample(two, 0.0, 0.0, -1.5) == 0.0);
    CHECK(trilinear_sample(two, -4.0, 0.0, 0.0) == 0.0);
    CHECK(trilinear_sample(two, 0.0, 9.0, 0.0) == 0.0);

    std::uniform_real_distribution<double> coord(-1.5, 8.5);
    for (int trial = 0; trial < 40; ++trial) {
        double x = coord(rng), y = coord(rng), tc = coord(rng);
        CHECK(std::abs(trilinear_sample(v, x, y, tc) - oracles::tri_at(v, x, y, tc)) <= 1e-12);
    }
}

TEST_CASE("a one-hot center tap with no motion reads one chunk plane") {
    std::mt19937 rng(69);
    StackedEventFrames v = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    FlowField zero(6, 6);
    DefParams p;
    p.k = 2;
    p.c = Image(6, 6, 1.0 + 3.5 / 8.0);
    p.alpha.assign(5, Image(6, 6, 0.0));
    p.alpha[2] = Image(6, 6, 1.0);
    Image g = directional_filter(v, zero, p, {1.0, 2.0});
    CHECK(images_equal(g, v.channels[3]));
}

TEST_CASE("constant volumes pass through the filter untouched") {
    std::mt19937 rng(71);
    FlowField flow = random_flow(rng, 10, 10, 0.4);

    // Binomial-profile dyadic coefficients sum to one exactly, and against
    // the short dyadic constants below every product and partial sum is
    // exactly representable, so interior pixels reproduce the constant
    // bitwise no matter how the taps are accumulated.
    DefParams dyadic;
    dyadic.k = 2;
    dyadic.c = Image(10, 10, 1.4);
    const double coef[5] = {0.0625, 0.25, 0.375, 0.25, 0.0625};
    for (double a : coef) dyadic.alpha.push_back(Image(10, 10, a));
    for (double value : {0.75, 0.5, 1.25, 0.375}) {
        StackedEventFrames v = make_volume(10, 10, 8, {{1.0, 2.0}});
        for (Image& ch : v.channels) ch = Image(10, 10, value);
        Image g = directional_filter(v, flow, dyadic, {1.0, 2.0});
        for (int y = 3; y < 7; ++y)
            for (int x = 3; x < 7; ++x) CHECK(g.at(y, x) == value);
    }

    StackedEventFrames v = make_volume(10, 10, 8, {{1.0, 2.0}});
    for (Image& ch : v.channels) ch = Image(10, 10, 0.7);
    DefParams generic = softmax_params(rng, 10, 10, 1.35, 1.65);
    Image h = directional_filter(v, flow, generic, {1.0, 2.0});
    for (int y = 3; y < 7; ++y)
        for (int x = 3; x < 7; ++x) CHECK(std::abs(h.at(y, x) - 0.7) <= 1e-12);
}

TEST_CASE("the filter matches a scalar brute-force evaluation") {
    std::mt19937 rng(73);
    for (int trial = 0; trial < 10; ++trial) {
        StackedEventFrames v = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
        FlowField flow = random_flow(rng, 6, 6, 1.0);
        DefParams p = softmax_params(rng, 6, 6, 0.9, 2.1);  // clamping exercised
        Image got = directional_filter(v, flow, p, {1.0, 2.0});
        Image want = oracles::brute_force_guidance(v, flow, p, {1.0, 2.0});
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("the filter checks interval and grid agreement") {
    std::mt19937 rng(75);
    StackedEventFrames v = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    FlowField flow(6, 6);
    DefParams p = softmax_params(rng, 6, 6, 1.0, 2.0);
    CHECK(throws_with([&] { directional_filter(v, flow, p, {2.0, 3.0}); },
                      "interval/volume mismatch"));
    FlowField wrong(6, 7);
    DefParams pw = softmax_params(rng, 6, 7, 1.0, 2.0);
    CHECK_THROWS_AS(directional_filter(v, wrong, pw, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("far-away volume entries cannot influence a pixel") {
    std::mt19937 rng(77);
    StackedEventFrames v = make_volume(12, 12, 8, {{1.0, 2.0}}, &rng);
    FlowField flow = random_flow(rng, 12, 12, 1.0);
    DefParams p = softmax_params(rng, 12, 12, 1.0, 2.0);
    Image before = directional_filter(v, flow, p, {1.0, 2.0});
    for (Image& ch : v.channels) ch.at(10, 10) += 50.0;
    Image after = directional_filter(v, flow, p, {1.0, 2.0});
    CHECK(after.at(2, 2) == before.at(2, 2));
    CHECK(after.at(0, 5) == before.at(0, 5));
}

TEST_CASE("gradients vanish for zero upstream and clamped centers") {
    std::mt19937 rng(79);
    StackedEventFrames v = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    FlowField flow = random_flow(rng, 6, 6, 0.8);
    DefParams p = softmax_params(rng, 6, 6, 1.0, 2.0);
    DefGradients g = directional_filter_grad(v, flow, p, {1.0, 2.0}, Image(6, 6, 0.0));
    CHECK(g.d_c.max_value() == 0.0);
    CHECK(g.d_c.min_value() == 0.0);
    for (const Image& plane : g.d_alpha) {
        CHECK(plane.max_value() == 0.0);
        CHECK(plane.min_value() == 0.0);
    }
    for (const Image& plane : g.d_logits) {
        CHECK(plane.max_value() == 0.0);
        CHECK(plane.min_value() == 0.0);
    }
    for (const Image& ch : g.d_volume) {
        CHECK(ch.max_value() == 0.0);
        CHECK(ch.min_value() == 0.0);
    }

    DefParams low = p;
    low.c = Image(6, 6, 0.2);  // clamped to the interval start everywhere
    DefGradients gc = directional_filter_grad(v, flow, low, {1.0, 2.0}, Image(6, 6, 1.0));
    CHECK(gc.d_c.max_value() == 0.0);
    CHECK(gc.d_c.min_value() == 0.0);
}

TEST_CASE("coefficient gradients are the sampled tap values") {
    std::mt19937 rng(81);
    StackedEventFrames v = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    FlowField flow = random_flow(rng, 6, 6, 0.8);
    DefParams p = softmax_params(rng, 6, 6, 1.2, 1.8);
    Image upstream(6, 6, 0.0);
    upstream.at(3, 2) = 1.0;
    DefGradients g = directional_filter_grad(v, flow, p, {1.0, 2.0}, upstream);

    double c = p.c.at(3, 2);
    Vec2 d = oracles::nw_at(flow, c - 1.0, 2.0, 3.0, p.sigma, p.L);
    double base_tc = (c - 1.0) * 8.0 - 0.5;
    for (int j = -2; j <= 2; ++j) {
        double off = p.lambda * j;
        double want = oracles::tri_at(v, 2.0 + off * d.x, 3.0 + off * d.y, base_tc + off);
        CHECK(std::abs(g.d_alpha[static_cast<size_t>(j + 2)].at(3, 2) - want) <= 1e-12);
        CHECK(g.d_alpha[static_cast<size_t>(j + 2)].at(0, 0) == 0.0);
    }

    // The logit gradient is the simplex-projected coefficient gradient.
    double weighted = 0.0;
    for (int j = 0; j < 5; ++j)
        weighted += p.alpha[static_cast<size_t>(j)].at(3, 2) *
                    g.d_alpha[static_cast<size_t>(j)].at(3, 2);
    for (int j = 0; j < 5; ++j) {
        double want = p.alpha[static_cast<size_t>(j)].at(3, 2) *
                      (g.d_alpha[static_cast<size_t>(j)].at(3, 2) - weighted);
        CHECK(std::abs(g.d_logits[static_cast<size_t>(j)].at(3, 2) - want) <= 1e-12);
    }
}

TEST_CASE("volume gradients depend on geometry, not on the volume values") {
    std::mt19937 rng(83);
    StackedEventFrames va = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    StackedEventFrames vb = make_volume(6, 6, 8, {{1.0, 2.0}}, &rng);
    FlowField flow = random_flow(rng, 6, 6, 0.8);
    DefParams p = softmax_params(rng, 6, 6, 1.0, 2.0);
    Image upstream = oracles::random_image(rng, 6, 6, -1.0, 1.0);
    DefGradients ga = directional_filter_grad(va, flow, p, {1.0, 2.0}, upstream);
    DefGradients gb = directional_filter_grad(vb, flow, p, {1.0, 2.0}, upstream);
    REQUIRE(ga.d_volume.size() == gb.d_volume.size());
    for (size_t ch = 0; ch < ga.d_volume.size(); ++ch)
        CHECK(images_equal(ga.d_volume[ch], gb.d_volume[ch]));
}

TEST_CASE("filter results and gradients ignore the worker count") {
    std::mt19937 rng(85);
    StackedEventFrames v = make_volume(9, 9, 8, {{1.0, 2.0}}, &rng);
    FlowField flow = random_flow(rng, 9, 9, 0.8);
    DefParams p = softmax_params(rng, 9, 9, 1.0, 2.0);
    Image upstream = oracles::random_image(rng, 9, 9, -1.0, 1.0);

    set_max_threads(1);
    Image g1 = directional_filter(v, flow, p, {1.0, 2.0});
    DefGradients d1 = directional_filter_grad(v, flow, p, {1.0, 2.0}, upstream);
    set_max_threads(7);
    Image g7 = directional_filter(v, flow, p, {1.0, 2.0});
    DefGradients d7 = directional_filter_grad(v, flow, p, {1.0, 2.0}, upstream);
    set_max_threads(0);

    CHECK(images_equal(g1, g7));
    CHECK(images_equal(d1.d_c, d7.d_c));
    for (size_t j = 0; j < d1.d_logits.size(); ++j)
        CHECK(images_equal(d1.d_logits[j], d7.d_logits[j]));
    for (size_t ch = 0; ch < d1.d_volume.size(); ++ch)
        CHECK(images_equal(d1.d_volume[ch], d7.d_volume[ch]));
}

TEST_CASE("the randomized gradient audit passes and is reproducible") {
    GradCheckReport a = run_gradient_check(15, 99);
    CHECK(a.passed());
    CHECK(a.configs == 15);
    CHECK(a.checks_logits > 0);
    CHECK(a.checks_c > 0);
    CHECK(a.checks_volume > 0);
    CHECK(a.max_rel() < 1e-3);

    GradCheckReport b = run_gradient_check(15, 99);
    CHECK(a.max_rel_logits == b.max_rel_logits);
    CHECK(a.max_rel_c == b.max_rel_c);
    CHECK(a.max_rel_volume == b.max_rel_volume);
    CHECK(a.skipped_c == b.skipped_c);
}
