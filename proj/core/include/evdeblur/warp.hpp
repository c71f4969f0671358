#pragma once

#include <vector>

#include "evdeblur/image.hpp"

namespace evdeblur {

/// Per-pixel forward motion from one frame time to the next, in pixels per
/// frame step. u moves columns, v moves rows.
struct FlowField {
    Image u;
    Image v;

    FlowField() = default;
    FlowField(int height, int width, double fu = 0.0, double fv = 0.0)
        : u(height, width, fu), v(height, width, fv) {}

    int height() const { return u.height(); }
    int width() const { return u.width(); }
    Vec2 at(int y, int x) const { return {u.at(y, x), v.at(y, x)}; }
};

enum class Border { Clamp, Zero };

/// Bilinear interpolation of the four neighbors of (sx, sy), where sx is the
/// column and sy the row coordinate. Integer coordinates return the stored
/// pixel exactly. Out-of-range taps either clamp to the edge or read as zero.
double bilinear_sample(const Image& img, double sx, double sy, Border border);

/// Samples img at p + flow(p) for every pixel p. With zero flow this is the
/// identity, exactly.
Image backward_warp(const Image& img, const FlowField& flow, Border border = Border::Clamp);

/// Photometric warp loss: mean over steps i of the mean absolute difference
/// between frame i+1 of seq warped by flows[i] and frame i of truth.
double loss_flow(const FrameSequence& seq, const std::vector<FlowField>& flows,
                 const FrameSequence& truth);

/// Smoothness of a flow set: mean over flows of the summed absolute forward
/// differences of u and v, divided by the pixel count. Differences past the
/// last row or column count as zero.
double loss_tv(const std::vector<FlowField>& flows);

// Loss weights for the adversarial and smoothness terms of the total
// training objective. The adversarial term itself needs a trained
// discriminator and is not evaluable here; the weight is kept so reported
// totals state what they omit.
inline constexpr double kAdversarialWeight = 0.01;
inline constexpr double kTvWeight = 0.05;

}  // namespace evdeblur
