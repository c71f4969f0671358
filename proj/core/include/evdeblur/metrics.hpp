#pragma once

#include <vector>

#include "evdeblur/image.hpp"

namespace evdeblur {

/// 10*log10(peak^2 / mean squared error). Identical images have zero error
/// and report +infinity.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale structural similarity with the common fixed internals:
/// 11x11 Gaussian window with sigma 1.5, stability constants (0.01*peak)^2
/// and (0.03*peak)^2, averaged over window positions that fit entirely
/// inside the images. Identical images score exactly 1.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// Mean over frames of the mean absolute pixel difference.
double loss_content(const FrameSequence& seq, const FrameSequence& truth);

struct EvalReport {
    std::vector<double> frame_psnr;  // +inf where frames are identical
    std::vector<double> frame_ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double content = 0.0;
};

EvalReport evaluate_sequence(const FrameSequence& seq, const FrameSequence& truth,
                             double peak = 1.0);

}  // namespace evdeblur
