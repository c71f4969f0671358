#include "evdeblur/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evdeblur/parallel.hpp"

namespace evdeblur {

double psnr(const Image& a, const Image& b, double peak) {
    require_same_size(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty images");
    double se = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        se += d * d;
    }
    double mse = se / static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWindow = 11;
constexpr int kRadius = kWindow / 2;

// Normalized 11x11 Gaussian, sigma 1.5.
const std::array<double, kWindow * kWindow>& ssim_window() {
    static const std::array<double, kWindow * kWindow> table = [] {
        std::array<double, kWindow * kWindow> w{};
        double sum = 0.0;
        for (int dy = -kRadius; dy <= kRadius; ++dy)
            for (int dx = -kRadius; dx <= kRadius; ++dx) {
                double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
                w[static_cast<size_t>((dy + kRadius) * kWindow + (dx + kRadius))] = v;
                sum += v;
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return table;
}

}  // namespace

double ssim(const Image& a, const Image& b, double peak) {
    require_same_size(a, b, "ssim");
    if (!(peak > 0.0)) throw std::invalid_argument("ssim: peak must be positive");
    if (a.height() < kWindow || a.width() < kWindow)
        throw std::invalid_argument("ssim: images must be at least 11x11");

    const auto& win = ssim_window();
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    int rows = a.height() - kWindow + 1;
    int cols = a.width() - kWindow + 1;

    Image per_window(rows, cols);
    parallel_for(0, static_cast<size_t>(rows), [&](size_t r0, size_t r1) {
        for (size_t r = r0; r < r1; ++r)
            for (int cgl = 0; cgl < cols; ++cgl) {
                double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int dy = 0; dy < kWindow; ++dy)
                    for (int dx = 0; dx < kWindow; ++dx) {
                        double wv = win[dy * kWindow + dx];
                        double va = a.at(static_cast<int>(r) + dy, cgl + dx);
                        double vb = b.at(static_cast<int>(r) + dy, cgl + dx);
                        mu_a += wv * va;
                        mu_b += wv * vb;
                        // One shared grouping keeps the moments symmetric in
                        // a and b, and makes cov equal var bitwise when the
                        // inputs are identical.
                        saa += wv * (va * va);
                        sbb += wv * (vb * vb);
                        sab += wv * (va * vb);
                    }
                double var_a = saa - mu_a * mu_a;
                double var_b = sbb - mu_b * mu_b;
                double cov = sab - mu_a * mu_b;
                double num = (2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2);
                double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                per_window.at(static_cast<int>(r), cgl) = num / den;
            }
    });

    double sum = 0.0;
    for (size_t i = 0; i < per_window.size(); ++i) sum += per_window[i];
    return sum / static_cast<double>(per_window.size());
}

double loss_content(const FrameSequence& seq, const FrameSequence& truth) {
    if (seq.count() != truth.count())
        throw std::invalid_argument("loss_content: sequence lengths differ");
    if (seq.count() == 0) throw std::invalid_argument("loss_content: empty sequences");
    double total = 0.0;
    for (int i = 0; i < seq.count(); ++i)
        total += mean_abs_diff(seq.frames[static_cast<size_t>(i)],
                               truth.frames[static_cast<size_t>(i)]);
    return total / seq.count();
}

EvalReport evaluate_sequence(const FrameSequence& seq, const FrameSequence& truth,
                             double peak) {
    if (seq.count() != truth.count())
        throw std::invalid_argument("evaluate_sequence: sequence lengths differ");
    if (seq.count() == 0) throw std::invalid_argument("evaluate_sequence: empty sequences");
    EvalReport rep;
    for (int i = 0; i < seq.count(); ++i) {
        const Image& x = seq.frames[static_cast<size_t>(i)];
        const Image& y = truth.frames[static_cast<size_t>(i)];
        rep.frame_psnr.push_back(psnr(x, y, peak));
        rep.frame_ssim.push_back(ssim(x, y, peak));
    }
    double ps = 0.0, ss = 0.0;
    for (double v : rep.frame_psnr) ps += v;
    for (double v : rep.frame_ssim) ss += v;
    rep.mean_psnr = ps / seq.count();
    rep.mean_ssim = ss / seq.count();
    rep.content = loss_content(seq, truth);
    return rep;
}

}  // namespace evdeblur
