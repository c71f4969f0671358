#include "evdeblur/recon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evdeblur/parallel.hpp"

namespace evdeblur {

namespace {

void require_tau(double tau, const std::string& where) {
    if (!(tau > 0.0)) throw std::invalid_argument(where + ": tau must be positive");
}

// Unit-interval polarity sums S_1..S_{T-1}, where S_i covers [i, i+1).
std::vector<Image> unit_interval_sums(const EventStream& stream, int frame_count) {
    std::vector<Image> sums;
    sums.reserve(static_cast<size_t>(frame_count) - 1);
    for (int i = 1; i < frame_count; ++i)
        sums.push_back(polarity_integral(stream, i, i + 1));
    return sums;
}

}  // namespace

Image decay_map(const Image& polarity_sums, double tau) {
    require_tau(tau, "decay_map");
    Image out(polarity_sums.height(), polarity_sums.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-tau * polarity_sums[i]);
    return out;
}

Image backward_step(const Image& next_frame, const Image& polarity_sums, double tau) {
    require_tau(tau, "backward_step");
    require_same_size(next_frame, polarity_sums, "backward_step");
    Image out(next_frame.height(), next_frame.width());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = next_frame[i] * std::exp(-tau * polarity_sums[i]);
    return out;
}

Image forward_step(const Image& prev_frame, const Image& polarity_sums, double tau) {
    require_tau(tau, "forward_step");
    require_same_size(prev_frame, polarity_sums, "forward_step");
    Image out(prev_frame.height(), prev_frame.width());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = prev_frame[i] * std::exp(tau * polarity_sums[i]);
    return out;
}

Image solve_latest(const Image& blur, const EventStream& stream, double tau, int frame_count) {
    require_tau(tau, "solve_latest");
    if (frame_count < 2)
        throw std::invalid_argument("solve_latest: frame count must be at least 2");
    if (blur.height() != stream.height || blur.width() != stream.width)
        throw std::invalid_argument("solve_latest: blur size does not match the stream");

    std::vector<Image> sums = unit_interval_sums(stream, frame_count);
    Image out(blur.height(), blur.width());
    parallel_for(0, blur.size(), [&](size_t lo, size_t hi) {
        for (size_t p = lo; p < hi; ++p) {
            // Running product of decays walked from the last interval
            // backwards; each partial product is one term of the sum.
            double prod = 1.0;
            double denom = 1.0;
            for (int i = frame_count - 2; i >= 0; --i) {
                prod *= std::exp(-tau * sums[static_cast<size_t>(i)][p]);
                denom += prod;
            }
            if (!(denom > 1e-12))
                throw std::runtime_error("solve_latest: denominator vanished");
            // Dividing first makes the no-event case (denom == frame_count
            // exactly) return the blur bitwise.
            out[p] = blur[p] * (frame_count / denom);
        }
    });
    return out;
}

InitDenoiser identity_init() {
    return [](const Image& estimate, const Image&, const EventStream&) { return estimate; };
}

StepDenoiser identity_step() {
    return [](const Image& estimate, const StepContext&) { return estimate; };
}

FrameSequence sequential_deblur(const Image& blur, const EventStream& stream, double tau,
                                int frame_count, const InitDenoiser& hook0,
                                const StepDenoiser& hook) {
    std::vector<Image> sums = unit_interval_sums(stream, frame_count);
    Image latest = hook0(solve_latest(blur, stream, tau, frame_count), blur, stream);

    FrameSequence seq;
    seq.frames.assign(static_cast<size_t>(frame_count), Image());
    seq.frames.back() = std::move(latest);
    for (int i = frame_count - 1; i >= 1; --i) {
        const Image& next = seq.frames[static_cast<size_t>(i)];
        Image stepped = backward_step(next, sums[static_cast<size_t>(i) - 1], tau);
        StepContext ctx{next, stream, static_cast<double>(i), static_cast<double>(i + 1), blur};
        seq.frames[static_cast<size_t>(i) - 1] = hook(stepped, ctx);
    }
    return seq;
}

namespace {

// Sorted per-frame log values; adjacent-frame L1 distances between these
// are the transport distance between the frames' value distributions.
std::vector<std::vector<double>> sorted_log_frames(const FrameSequence& seq) {
    std::vector<std::vector<double>> sorted;
    sorted.reserve(seq.frames.size());
    for (const Image& f : seq.frames) {
        std::vector<double> v(f.size());
        for (size_t i = 0; i < f.size(); ++i) v[i] = std::log(std::max(f[i], 1e-12));
        std::sort(v.begin(), v.end());
        sorted.push_back(std::move(v));
    }
    return sorted;
}

}  // namespace

double estimate_tau(const Image& blur, const EventStream& stream, int frame_count,
                    const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("estimate_tau: empty candidate grid");
    for (double g : grid)
        if (!(g > 0.0))
            throw std::invalid_argument("estimate_tau: candidates must be positive");

    double best_tau = 0.0;
    double best_score = 0.0;
    bool first = true;
    for (double candidate : grid) {
        FrameSequence seq = sequential_deblur(blur, stream, candidate, frame_count);
        std::vector<std::vector<double>> sorted = sorted_log_frames(seq);
        double score = 0.0;
        for (size_t k = 0; k + 1 < sorted.size(); ++k)
            for (size_t i = 0; i < sorted[k].size(); ++i)
                score += std::abs(sorted[k][i] - sorted[k + 1][i]);
        score /= static_cast<double>(blur.size() * (sorted.size() - 1));
        if (first || score < best_score ||
            (score == best_score && candidate < best_tau)) {
            best_tau = candidate;
            best_score = score;
            first = false;
        }
    }
    return best_tau;
}

}  // namespace evdeblur
