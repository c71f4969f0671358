#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "evdeblur/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace evdeblur;

TEST_CASE("identical images have infinite signal-to-noise") {
    Image a(4, 4, 0.3);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0.0);
}

TEST_CASE("uniform differences give the closed-form ratio") {
    Image zero(4, 4, 0.0);
    Image tenth(4, 4, 0.1);
    CHECK(std::abs(psnr(zero, tenth) - 20.0) <= 1e-9);
    Image hundredth(4, 4, 0.01);
    CHECK(std::abs(psnr(zero, hundredth) - 40.0) <= 1e-9);
}

TEST_CASE("signal-to-noise scales with the declared peak") {
    Image zero(4, 4, 0.0);
    Image tenth(4, 4, 0.1);
    CHECK(std::abs(psnr(zero, tenth, 10.0) - 40.0) <= 1e-9);
}

TEST_CASE("signal-to-noise is symmetric and permutation invariant") {
    std::mt19937 rng(43);
    Image a = oracles::random_image(rng, 5, 5);
    Image b = oracles::random_image(rng, 5, 5);
    CHECK(psnr(a, b) == psnr(b, a));

    // Dyadic differences sum exactly in any order, so a joint pixel
    // permutation changes nothing at all.
    Image da(1, 4), db(1, 4);
    double vals_a[4] = {0.0, 0.25, 0.5, 1.0};
    double vals_b[4] = {0.25, 0.25, 1.0, 0.5};
    for (int i = 0; i < 4; ++i) {
        da[static_cast<size_t>(i)] = vals_a[i];
        db[static_cast<size_t>(i)] = vals_b[i];
    }
    Image pa(1, 4), pb(1, 4);
    int perm[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i) {
        pa[static_cast<size_t>(i)] = vals_a[perm[i]];
        pb[static_cast<size_t>(i)] = vals_b[perm[i]];
    }
    CHECK(psnr(da, db) == psnr(pa, pb));
}

TEST_CASE("signal-to-noise validates its inputs") {
    CHECK_THROWS_AS(psnr(Image(2, 2, 0.0), Image(2, 3, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(psnr(Image(2, 2, 0.0), Image(2, 2, 0.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(psnr(Image(), Image()), std::invalid_argument);
}

TEST_CASE("structural similarity of an image with itself is one") {
    std::mt19937 rng(45);
    Image a = oracles::random_image(rng, 16, 16);
    CHECK(ssim(a, a) == 1.0);
}

TEST_CASE("structural similarity drops under contrast inversion") {
    std::mt19937 rng(47);
    Image a = oracles::random_image(rng, 16, 16);
    Image inv(16, 16);
    for (size_t i = 0; i < a.size(); ++i) inv[i] = 1.0 - a[i];
    CHECK(ssim(a, inv) < 1.0);
}

TEST_CASE("structural similarity matches an independent reference") {
    std::mt19937 rng(49);
    Image a = oracles::random_image(rng, 16, 16);
    Image b(16, 16);
    for (size_t i = 0; i < a.size(); ++i) b[i] = std::clamp(a[i] + 0.05 * (a[i] - 0.5), 0.0, 1.0);
    CHECK(std::abs(ssim(a, b) - oracles::reference_ssim(a, b)) <= 1e-6);

    Image c = oracles::random_image(rng, 16, 16);
    CHECK(std::abs(ssim(a, c) - oracles::reference_ssim(a, c)) <= 1e-6);
}

TEST_CASE("structural similarity is symmetric") {
    std::mt19937 rng(51);
    Image a = oracles::random_image(rng, 12, 14);
    Image b = oracles::random_image(rng, 12, 14);
    CHECK(ssim(a, b) == ssim(b, a));
}

TEST_CASE("structural similarity needs a full window") {
    CHECK_THROWS_AS(ssim(Image(10, 16, 0.5), Image(10, 16, 0.5)), std::invalid_argument);
    CHECK_THROWS_AS(ssim(Image(16, 10, 0.5), Image(16, 10, 0.5)), std::invalid_argument);
    CHECK_NOTHROW(ssim(Image(11, 11, 0.5), Image(11, 11, 0.5)));
}

TEST_CASE("content loss is the mean of the per-frame mean errors") {
    FrameSequence seq;
    FrameSequence truth;
    seq.frames.assign(2, Image(2, 2, 0.5));
    truth.frames.assign(2, Image(2, 2, 0.5));
    CHECK(loss_content(seq, truth) == 0.0);

    Image off1(2, 2);
    off1.at(0, 0) = 1.0;
    off1.at(0, 1) = 0.5;
    off1.at(1, 0) = 0.0;
    off1.at(1, 1) = 0.5;  // diffs 0.5, 0, 0.5, 0 -> mean 0.25
    Image off2(2, 2, 0.75);  // diffs all 0.25 -> mean 0.25
    FrameSequence shifted;
    shifted.frames.push_back(off1);
    shifted.frames.push_back(off2);
    CHECK(loss_content(shifted, truth) == 0.25);

    FrameSequence offset;
    offset.frames.assign(2, Image(2, 2, 0.7));
    CHECK(std::abs(loss_content(offset, truth) - 0.2) <= 1e-12);
}

TEST_CASE("content loss validates lengths") {
    FrameSequence two;
    two.frames.assign(2, Image(2, 2, 0.5));
    FrameSequence three;
    three.frames.assign(3, Image(2, 2, 0.5));
    CHECK_THROWS_AS(loss_content(two, three), std::invalid_argument);
}

TEST_CASE("sequence evaluation aggregates the per-frame metrics") {
    std::mt19937 rng(53);
    FrameSequence seq;
    FrameSequence truth;
    for (int i = 0; i < 3; ++i) {
        Image t = oracles::random_image(rng, 16, 16);
        truth.frames.push_back(t);
        if (i == 1) {
            seq.frames.push_back(t);  // identical pair
        } else {
            Image noisy(16, 16);
            for (size_t p = 0; p < t.size(); ++p) noisy[p] = std::clamp(t[p] + 0.02, 0.0, 1.0);
            seq.frames.push_back(noisy);
        }
    }
    EvalReport rep = evaluate_sequence(seq, truth);
    REQUIRE(rep.frame_psnr.size() == 3);
    REQUIRE(rep.frame_ssim.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(rep.frame_psnr[static_cast<size_t>(i)] ==
              psnr(seq.frames[static_cast<size_t>(i)], truth.frames[static_cast<size_t>(i)]));
        CHECK(rep.frame_ssim[static_cast<size_t>(i)] ==
              ssim(seq.frames[static_cast<size_t>(i)], truth.frames[static_cast<size_t>(i)]));
    }
    CHECK(std::isinf(rep.frame_psnr[1]));
    CHECK(std::isinf(rep.mean_psnr));
    CHECK(rep.frame_ssim[1] == 1.0);
    CHECK(rep.content == loss_content(seq, truth));
}
