#include "evdeblur/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "evdeblur/parallel.hpp"

namespace evdeblur {

namespace {

void validate_config(const SimConfig& cfg) {
    if (!(cfg.tau > 0.0)) throw std::invalid_argument("simulator: tau must be positive");
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("simulator: eps must be positive");
    if (cfg.substeps < 1) throw std::invalid_argument("simulator: substeps must be at least 1");
}

void validate_sequence(const FrameSequence& seq, const std::string& where) {
    if (seq.count() < 2) throw std::invalid_argument(where + ": need at least two frames");
    for (int i = 1; i < seq.count(); ++i)
        require_same_size(seq.frames[0], seq.frames[static_cast<size_t>(i)], where);
}

}  // namespace

Image log_intensity(const Image& img, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("log_intensity: eps must be positive");
    Image out(img.height(), img.width());
    for (size_t i = 0; i < img.size(); ++i) out[i] = std::log(std::max(img[i], eps));
    return out;
}

EventStream generate_events(const FrameSequence& seq, const SimConfig& cfg) {
    validate_config(cfg);
    validate_sequence(seq, "generate_events");
    int T = seq.count();
    int h = seq.frames[0].height();
    int w = seq.frames[0].width();

    std::vector<Image> logs;
    logs.reserve(static_cast<size_t>(T));
    for (const Image& f : seq.frames) logs.push_back(log_intensity(f, cfg.eps));

    std::vector<std::vector<Event>> per_row(static_cast<size_t>(h));
    parallel_for(0, static_cast<size_t>(h), [&](size_t y0, size_t y1) {
        for (size_t y = y0; y < y1; ++y) {
            std::vector<Event>& out = per_row[y];
            int yi = static_cast<int>(y);
            for (int x = 0; x < w; ++x) {
                double ref = logs[0].at(yi, x);
                for (int g = 1; g < T; ++g) {
                    double a = logs[static_cast<size_t>(g) - 1].at(yi, x);
                    double b = logs[static_cast<size_t>(g)].at(yi, x);
                    for (int s = 0; s < cfg.substeps; ++s) {
                        double u0 = a + (b - a) * s / cfg.substeps;
                        double u1 = a + (b - a) * (s + 1) / cfg.substeps;
                        // The segment is linear, so all crossings inside it
                        // share one polarity; the two loops are mutually
                        // exclusive given |u0 - ref| < tau on entry.
                        while (u1 >= ref + cfg.tau) {
                            double target = ref + cfg.tau;
                            double frac = (target - u0) / (u1 - u0);
                            out.push_back({g + (s + frac) / cfg.substeps, x, yi, +1});
                            ref = target;
                        }
                        while (u1 <= ref - cfg.tau) {
                            double target = ref - cfg.tau;
                            double frac = (target - u0) / (u1 - u0);
                            out.push_back({g + (s + frac) / cfg.substeps, x, yi, -1});
                            ref = target;
                        }
                    }
                }
            }
        }
    });

    EventStream stream;
    stream.width = w;
    stream.height = h;
    stream.t_begin = 1.0;
    stream.t_end = static_cast<double>(T);
    size_t total = 0;
    for (const auto& row : per_row) total += row.size();
    stream.events.reserve(total);
    for (const auto& row : per_row)
        stream.events.insert(stream.events.end(), row.begin(), row.end());
    sort_canonical(stream.events);
    return stream;
}

Image synthesize_blur(const FrameSequence& seq) {
    if (seq.count() < 1) throw std::invalid_argument("synthesize_blur: empty sequence");
    for (int i = 1; i < seq.count(); ++i)
        require_same_size(seq.frames[0], seq.frames[static_cast<size_t>(i)], "synthesize_blur");
    Image out(seq.frames[0].height(), seq.frames[0].width());
    for (const Image& f : seq.frames)
        for (size_t i = 0; i < out.size(); ++i) out[i] += f[i];
    for (size_t i = 0; i < out.size(); ++i) out[i] /= seq.count();
    return out;
}

namespace {

// Bars: a period-8 log-intensity profile translating along x. The profile
// spends most of its period on two plateaus a whole multiple of tau apart,
// with a small overshoot cell past each plateau. A pixel crossing an edge
// therefore emits its full burst strictly inside one frame gap and settles
// back onto the plateau level in the next, which keeps every crossing time
// away from the frame boundaries.
FrameSequence bars_frames(int h, int w, int T, Vec2 velocity, const SimConfig& cfg) {
    const double llo = std::log(0.18);
    const double delta = 0.1 * cfg.tau;
    const double headroom = std::log(0.9) - llo - delta;
    long m = std::lround(std::log(4.0) / cfg.tau);
    if (m < 1) m = 1;
    long m_max = static_cast<long>(std::floor(headroom / cfg.tau));
    if (m > m_max) m = m_max;
    if (m < 1)
        throw std::invalid_argument(
            "make_fixture: threshold too large for the bar contrast range");
    const double lhi = llo + static_cast<double>(m) * cfg.tau;
    const double profile[8] = {llo, llo, llo - delta, lhi, lhi, lhi, lhi + delta, llo};

    int vx = static_cast<int>(std::lround(velocity.x));
    FrameSequence seq;
    seq.frames.reserve(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) {
        Image img(h, w);
        for (int x = 0; x < w; ++x) {
            int phase = (x - vx * (t - 1)) % 8;
            if (phase < 0) phase += 8;
            double v = std::exp(profile[phase]);
            for (int y = 0; y < h; ++y) img.at(y, x) = v;
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

FrameSequence dot_frames(int h, int w, int T, Vec2 velocity) {
    const double omega = velocity.x;
    const double orbit = velocity.y;
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double r = 0.08 * std::min(h, w) + 1.0;
    FrameSequence seq;
    seq.frames.reserve(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) {
        double theta = omega * (t - 1);
        double dx0 = cx + orbit * std::cos(theta);
        double dy0 = cy + orbit * std::sin(theta);
        Image img(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d2 = (x - dx0) * (x - dx0) + (y - dy0) * (y - dy0);
                img.at(y, x) = 0.2 + 0.6 * std::exp(-d2 / (2.0 * r * r));
            }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

FrameSequence ramp_frames(int h, int w, int T, Vec2 velocity) {
    const double base = std::log(0.1);
    const double swing = velocity.x;
    FrameSequence seq;
    seq.frames.reserve(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) {
        double progress = static_cast<double>(t - 1) / (T - 1);
        Image img(h, w);
        for (int x = 0; x < w; ++x) {
            double v = std::exp(base + swing * (static_cast<double>(x + 1) / w) * progress);
            for (int y = 0; y < h; ++y) img.at(y, x) = v;
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

std::vector<FlowField> constant_flows(int h, int w, int count, double u, double v) {
    std::vector<FlowField> flows;
    flows.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) flows.emplace_back(h, w, u, v);
    return flows;
}

std::vector<FlowField> rotation_flows(int h, int w, int count, double omega) {
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double ca = std::cos(omega);
    const double sa = std::sin(omega);
    FlowField f(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double dx = x - cx;
            double dy = y - cy;
            f.u.at(y, x) = (cx + ca * dx - sa * dy) - x;
            f.v.at(y, x) = (cy + sa * dx + ca * dy) - y;
        }
    return std::vector<FlowField>(static_cast<size_t>(count), f);
}

}  // namespace

Fixture make_fixture(FixturePattern pattern, int height, int width, int frame_count,
                     Vec2 velocity, const SimConfig& cfg) {
    validate_config(cfg);
    if (height < 16 || width < 16)
        throw std::invalid_argument("make_fixture: size must be at least 16x16");
    if (frame_count < 2)
        throw std::invalid_argument("make_fixture: frame count must be at least 2");

    Fixture fx;
    switch (pattern) {
        case FixturePattern::TranslatingBars: {
            fx.frames = bars_frames(height, width, frame_count, velocity, cfg);
            int vx = static_cast<int>(std::lround(velocity.x));
            int vy = static_cast<int>(std::lround(velocity.y));
            fx.flows = constant_flows(height, width, frame_count - 1, vx, vy);
            break;
        }
        case FixturePattern::RotatingDot:
            fx.frames = dot_frames(height, width, frame_count, velocity);
            fx.flows = rotation_flows(height, width, frame_count - 1, velocity.x);
            break;
        case FixturePattern::Ramp:
            fx.frames = ramp_frames(height, width, frame_count, velocity);
            fx.flows = constant_flows(height, width, frame_count - 1, 0.0, 0.0);
            break;
        default:
            throw std::invalid_argument("make_fixture: unknown pattern");
    }
    fx.blur = synthesize_blur(fx.frames);
    fx.events = generate_events(fx.frames, cfg);
    return fx;
}

FixturePattern parse_fixture_pattern(const std::string& name) {
    if (name == "translating_bars") return FixturePattern::TranslatingBars;
    if (name == "rotating_dot") return FixturePattern::RotatingDot;
    if (name == "ramp") return FixturePattern::Ramp;
    throw std::invalid_argument("unknown pattern '" + name + "'");
}

}  // namespace evdeblur
