#pragma once

#include <vector>

#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/warp.hpp"

namespace evdeblur {

struct SimConfig {
    double tau = 0.1;   // contrast threshold, log-intensity units
    double eps = 1e-3;  // intensity floor before taking logs
    int substeps = 16;  // interpolation segments per frame gap
};

/// Entrywise natural log of max(value, eps). The floor keeps black pixels
/// at a finite level so threshold counting terminates.
Image log_intensity(const Image& img, double eps);

/// Threshold-triggered event generation. Each pixel keeps a reference log
/// level that starts at frame 1; log intensity is interpolated linearly
/// across every frame gap, and each time the interpolant departs from the
/// reference by a full threshold an event is emitted at the crossing time
/// and the reference advances by exactly that threshold. Sub-threshold
/// residual carries over between gaps.
EventStream generate_events(const FrameSequence& seq, const SimConfig& cfg);

/// Entrywise mean of the frames: the exposure model of a blurred capture.
Image synthesize_blur(const FrameSequence& seq);

enum class FixturePattern { TranslatingBars, RotatingDot, Ramp };

/// Ground-truthed test scene: sharp frames, their blur, the simulated event
/// stream, and the exact per-step motion fields.
struct Fixture {
    FrameSequence frames;
    Image blur;
    EventStream events;
    std::vector<FlowField> flows;  // T-1 fields, step i -> i+1
};

/// Builds an analytic moving scene and simulates it.
///
/// velocity is interpreted per pattern:
///  - TranslatingBars: (vx, vy) pixels per frame step, rounded to integers
///    so the bar edges stay pixel-aligned and the flows stay exact.
///  - RotatingDot: x = radians per frame step, y = orbit radius in pixels.
///    Radius 0 leaves the dot centered, so the scene is static.
///  - Ramp: x = total log-intensity swing at the rightmost column; pixels
///    brighten in place, so all flows are zero.
Fixture make_fixture(FixturePattern pattern, int height, int width, int frame_count,
                     Vec2 velocity, const SimConfig& cfg);

FixturePattern parse_fixture_pattern(const std::string& name);

}  // namespace evdeblur
