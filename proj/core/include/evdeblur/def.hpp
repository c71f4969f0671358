#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/warp.hpp"

namespace evdeblur {

/// Control surface of the directional filter: a per-pixel temporal center
/// and 2k+1 per-pixel mixing coefficients that are nonnegative and sum to
/// one. Build through def_params_from_logits to get the simplex by
/// construction.
struct DefParams {
    Image c;                   // temporal centers, normalized time units
    std::vector<Image> alpha;  // 2k+1 planes; plane j+k holds coefficient j
    int k = 2;                 // taps run j = -k..k
    double lambda = 1.0;       // stride per tap, in pixels and chunks
    double sigma = 1.0;        // Gaussian bandwidth of the velocity resampler
    int L = 20;                // resampling window side, pixels

    int plane_count() const { return 2 * k + 1; }
};

/// Normalized exponentials of unconstrained logits, per pixel across the
/// planes. The largest logit is subtracted first, so any finite logits give
/// valid coefficients.
DefParams def_params_from_logits(const Image& centers, const std::vector<Image>& logits,
                                 double lambda = 1.0, double sigma = 1.0, int L = 20);

void validate_def_params(const DefParams& params, const std::string& where);

/// Grid velocities carried to a later time plane: each source pixel p0
/// lands at p0 + shift * flow(p0) and keeps its velocity. height/width
/// record the source grid so the nearest-pixel fallback stays available.
struct ScatterSamples {
    int height = 0;
    int width = 0;
    std::vector<Vec2> positions;   // row-major by source pixel
    std::vector<Vec2> velocities;
};

ScatterSamples propagate_velocity(const FlowField& flow, double c_value, double interval_begin);

/// Gaussian-kernel mean of the sample velocities whose positions land in
/// the L-by-L window around target. Weights are normalized before the sum,
/// so two mirrored samples average exactly. An empty window (or a weight
/// sum below 1e-12) falls back to the velocity of the grid pixel nearest
/// the target.
Vec2 resample_velocity(const ScatterSamples& samples, Vec2 target, double sigma, int L);

/// Interpolates the stacked volume at fractional (column, row, channel)
/// coordinates. Everything outside the volume reads as zero.
double trilinear_sample(const StackedEventFrames& volume, double x, double y, double t_channel);

/// Boundary guidance map. Per output pixel p: resample the flow at p onto
/// the time plane c(p), then mix 2k+1 trilinear taps spaced lambda apart
/// along that velocity in space and lambda chunks apart in time, weighted
/// by the simplex coefficients. interval must be one of the volume's
/// intervals.
Image directional_filter(const StackedEventFrames& volume, const FlowField& flow,
                         const DefParams& params, std::pair<double, double> interval);

struct DefGradients {
    std::vector<Image> d_alpha;   // wrt the simplex coefficients
    std::vector<Image> d_logits;  // wrt the logits behind them
    Image d_c;
    std::vector<Image> d_volume;  // one grid per volume channel
};

/// Analytic partial derivatives of sum_p upstream(p) * guidance(p). The
/// c gradient includes the chain through the velocity resampler; pixels
/// whose center was clamped to the interval get a zero c gradient.
DefGradients directional_filter_grad(const StackedEventFrames& volume, const FlowField& flow,
                                     const DefParams& params,
                                     std::pair<double, double> interval, const Image& upstream);

struct GradCheckReport {
    int configs = 0;
    int checks_logits = 0;
    int checks_c = 0;
    int checks_volume = 0;
    int skipped_c = 0;  // centers whose taps sat too close to grid lines
    double max_rel_logits = 0.0;
    double max_rel_c = 0.0;
    double max_rel_volume = 0.0;
    double threshold = 1e-3;

    double max_rel() const;
    bool passed() const { return max_rel() < threshold; }
};

/// Central-difference verification of directional_filter_grad over
/// randomized filter configurations. Deterministic for a fixed seed.
GradCheckReport run_gradient_check(int configs, unsigned seed, double threshold = 1e-3);

}  // namespace evdeblur
