#pragma once

#include <functional>
#include <vector>

#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"

namespace evdeblur {

/// Entrywise exp(-tau * S). Maps a later frame to an earlier one when
/// multiplied in; equals 1 wherever no events fired.
Image decay_map(const Image& polarity_sums, double tau);

/// One step back in time: next frame times exp(-tau * S).
Image backward_step(const Image& next_frame, const Image& polarity_sums, double tau);

/// One step forward in time: previous frame times exp(+tau * S). Exact
/// inverse of backward_step over the same polarity sums.
Image forward_step(const Image& prev_frame, const Image& polarity_sums, double tau);

/// Latest sharp frame from a blurred capture: per pixel,
///   T * blur / (1 + sum over t of the running product of the per-step
///   decays, walked from the last step backwards).
/// With no events every decay is 1, the denominator is exactly T, and the
/// result is the blur unchanged.
Image solve_latest(const Image& blur, const EventStream& stream, double tau, int frame_count);

/// Refinement hook applied to the initial latest-frame estimate. Receives
/// the estimate, the blurred capture, and the full event stream; the
/// identity hook returns the estimate unchanged.
using InitDenoiser = std::function<Image(const Image& estimate, const Image& blur,
                                         const EventStream& events)>;

/// Context handed to the per-step refinement hook alongside the stepped
/// estimate: the already-refined later frame, the events (with the current
/// step's interval), and the blurred capture.
struct StepContext {
    const Image& next_frame;
    const EventStream& events;
    double interval_begin;
    double interval_end;
    const Image& blur;
};
using StepDenoiser = std::function<Image(const Image& estimate, const StepContext& ctx)>;

InitDenoiser identity_init();
StepDenoiser identity_step();

/// Full sharp-sequence recovery: solve the latest frame, refine it with
/// hook0, then walk backwards one unit interval at a time, refining each
/// stepped frame with hook. Frames are returned in forward order 1..T.
/// Outputs are not clamped; with identity hooks the mean of the returned
/// frames reproduces the input blur entrywise.
FrameSequence sequential_deblur(const Image& blur, const EventStream& stream, double tau,
                                int frame_count, const InitDenoiser& hook0 = identity_init(),
                                const StepDenoiser& hook = identity_step());

/// Picks the threshold from a candidate grid. The mean of a reconstruction
/// reproduces the blur for every candidate, and a wrong candidate rescales
/// each pixel's log walk while a per-pixel offset absorbs the difference,
/// so no per-pixel residual can rank candidates. What a wrong candidate
/// cannot fake is stationarity: motion rearranges scene values without
/// changing their distribution, while the absorbed offsets are pinned in
/// place and make the frame histograms drift over time. The candidate
/// minimizing the total transport distance between consecutive frames'
/// log-value distributions wins; ties go to the smaller candidate. Scenes
/// whose true brightness distribution drifts (global brightening, say)
/// violate the assumption and can fool the estimate.
double estimate_tau(const Image& blur, const EventStream& stream, int frame_count,
                    const std::vector<double>& grid);

}  // namespace evdeblur
