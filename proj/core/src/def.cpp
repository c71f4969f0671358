#include "evdeblur/def.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "evdeblur/parallel.hpp"

namespace evdeblur {

namespace {

double volume_value(const StackedEventFrames& vol, int ch, int y, int x) {
    if (ch < 0 || ch >= vol.channel_count() || y < 0 || y >= vol.height || x < 0 ||
        x >= vol.width)
        return 0.0;
    return vol.channels[static_cast<size_t>(ch)].at(y, x);
}

struct TriCorner {
    int ch, y, x;
    double w;
};

struct TriResult {
    double value = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    double dt = 0.0;
    TriCorner corners[8];
    int corner_count = 0;  // in-bounds corners only
};

TriResult trilinear_eval(const StackedEventFrames& vol, double x, double y, double tc) {
    double bx = std::floor(x), by = std::floor(y), bc = std::floor(tc);
    int x0 = static_cast<int>(bx), y0 = static_cast<int>(by), c0 = static_cast<int>(bc);
    double fx = x - bx, fy = y - by, fc = tc - bc;

    double v[2][2][2];  // [channel][row][col]
    for (int dc = 0; dc < 2; ++dc)
        for (int dr = 0; dr < 2; ++dr)
            for (int dl = 0; dl < 2; ++dl)
                v[dc][dr][dl] = volume_value(vol, c0 + dc, y0 + dr, x0 + dl);

    TriResult r;
    double plane[2], plane_dx[2], plane_dy[2];
    for (int dc = 0; dc < 2; ++dc) {
        // The a + f*(b - a) form interpolates a constant volume bitwise,
        // which keeps the mixing weights a true partition of unity.
        double top = v[dc][0][0] + fx * (v[dc][0][1] - v[dc][0][0]);
        double bot = v[dc][1][0] + fx * (v[dc][1][1] - v[dc][1][0]);
        plane[dc] = top + fy * (bot - top);
        plane_dx[dc] =
            (1.0 - fy) * (v[dc][0][1] - v[dc][0][0]) + fy * (v[dc][1][1] - v[dc][1][0]);
        plane_dy[dc] =
            (1.0 - fx) * (v[dc][1][0] - v[dc][0][0]) + fx * (v[dc][1][1] - v[dc][0][1]);
    }
    r.value = plane[0] + fc * (plane[1] - plane[0]);
    r.dx = (1.0 - fc) * plane_dx[0] + fc * plane_dx[1];
    r.dy = (1.0 - fc) * plane_dy[0] + fc * plane_dy[1];
    r.dt = plane[1] - plane[0];

    double wc[2] = {1.0 - fc, fc}, wy[2] = {1.0 - fy, fy}, wx[2] = {1.0 - fx, fx};
    for (int dc = 0; dc < 2; ++dc)
        for (int dr = 0; dr < 2; ++dr)
            for (int dl = 0; dl < 2; ++dl) {
                int ch = c0 + dc, yy = y0 + dr, xx = x0 + dl;
                if (ch < 0 || ch >= vol.channel_count() || yy < 0 || yy >= vol.height ||
                    xx < 0 || xx >= vol.width)
                    continue;
                r.corners[r.corner_count++] = {ch, yy, xx, wc[dc] * wy[dr] * wx[dl]};
            }
    return r;
}

double nw_weight(double nx, double ny, Vec2 target, double two_sigma2) {
    double dx = nx - target.x;
    double dy = ny - target.y;
    return std::exp(-(dx * dx + dy * dy) / two_sigma2);
}

struct NwResult {
    Vec2 d{0.0, 0.0};
    Vec2 dd_dc{0.0, 0.0};
    bool fallback = false;
};

// Window-filtered Gaussian mean of grid velocities carried to the time
// plane shift past the interval start. Only pixels inside a candidate box
// around the target can land in the window, so the scan is restricted to
// that box; the accumulation order matches a full row-major scan.
NwResult nw_resample_grad(const FlowField& flow, double shift, Vec2 target, double sigma,
                          int L, double fmax, bool want_grad) {
    int h = flow.height(), w = flow.width();
    double half = 0.5 * L;
    double two_sigma2 = 2.0 * sigma * sigma;
    int hw = static_cast<int>(std::ceil(half + shift * fmax)) + 1;
    int cx = static_cast<int>(std::lround(target.x));
    int cy = static_cast<int>(std::lround(target.y));
    int x_lo = std::max(0, cx - hw), x_hi = std::min(w - 1, cx + hw);
    int y_lo = std::max(0, cy - hw), y_hi = std::min(h - 1, cy + hw);

    double wsum = 0.0;
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            Vec2 f = flow.at(y, x);
            double nx = x + shift * f.x, ny = y + shift * f.y;
            if (std::abs(nx - target.x) <= half && std::abs(ny - target.y) <= half)
                wsum += nw_weight(nx, ny, target, two_sigma2);
        }

    NwResult r;
    if (!(wsum >= 1e-12)) {
        int gx = std::clamp(static_cast<int>(std::lround(target.x)), 0, w - 1);
        int gy = std::clamp(static_cast<int>(std::lround(target.y)), 0, h - 1);
        r.d = flow.at(gy, gx);
        r.fallback = true;
        return r;
    }

    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            Vec2 f = flow.at(y, x);
            double nx = x + shift * f.x, ny = y + shift * f.y;
            if (std::abs(nx - target.x) <= half && std::abs(ny - target.y) <= half) {
                double wn = nw_weight(nx, ny, target, two_sigma2) / wsum;
                r.d.x += wn * f.x;
                r.d.y += wn * f.y;
            }
        }

    if (want_grad) {
        double sigma2 = sigma * sigma;
        double gx = 0.0, gy = 0.0;
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                Vec2 f = flow.at(y, x);
                double nx = x + shift * f.x, ny = y + shift * f.y;
                if (std::abs(nx - target.x) <= half && std::abs(ny - target.y) <= half) {
                    double wv = nw_weight(nx, ny, target, two_sigma2);
                    double dw =
                        -wv * ((nx - target.x) * f.x + (ny - target.y) * f.y) / sigma2;
                    gx += dw * (f.x - r.d.x);
                    gy += dw * (f.y - r.d.y);
                }
            }
        r.dd_dc = {gx / wsum, gy / wsum};
    }
    return r;
}

struct FilterSetup {
    double a = 0.0;
    double b = 0.0;
    double chunk_dt = 0.0;
    int base_channel = 0;
    double fmax = 0.0;
};

FilterSetup prepare_filter(const StackedEventFrames& volume, const FlowField& flow,
                           const DefParams& params, std::pair<double, double> interval,
                           const std::string& where) {
    validate_def_params(params, where);
    require_same_size(params.c, flow.u, where);
    if (volume.height != params.c.height() || volume.width != params.c.width())
        throw std::invalid_argument(where + ": volume size does not match the grid");
    int idx = -1;
    for (size_t i = 0; i < volume.intervals.size(); ++i)
        if (volume.intervals[i].first == interval.first &&
            volume.intervals[i].second == interval.second) {
            idx = static_cast<int>(i);
            break;
        }
    if (idx < 0) throw std::invalid_argument(where + ": interval/volume mismatch");

    FilterSetup s;
    s.a = interval.first;
    s.b = interval.second;
    s.chunk_dt = (s.b - s.a) / volume.chunks_per_interval;
    s.base_channel = idx * volume.chunks_per_interval;
    s.fmax = 0.0;
    for (size_t i = 0; i < flow.u.size(); ++i)
        s.fmax = std::max(s.fmax, std::max(std::abs(flow.u[i]), std::abs(flow.v[i])));
    return s;
}

// One output pixel of the filter. alpha_override / c_override substitute the
// per-pixel parameters, which the finite-difference harness uses to probe a
// single pixel without rebuilding the parameter grids.
double guidance_at(const StackedEventFrames& volume, const FlowField& flow,
                   const DefParams& params, const FilterSetup& s, int y, int x,
                   const double* alpha_override, const double* c_override) {
    double c_raw = c_override ? *c_override : params.c.at(y, x);
    double c = std::clamp(c_raw, s.a, s.b);
    NwResult nw = nw_resample_grad(flow, c - s.a, {static_cast<double>(x),
                                   static_cast<double>(y)},
                                   params.sigma, params.L, s.fmax, false);
    double base_tc = s.base_channel + (c - s.a) / s.chunk_dt - 0.5;
    double g = 0.0;
    for (int j = -params.k; j <= params.k; ++j) {
        double aj = alpha_override ? alpha_override[j + params.k]
                                   : params.alpha[static_cast<size_t>(j + params.k)].at(y, x);
        double off = params.lambda * j;
        // One stride step advances one chunk in time, which is exactly one
        // channel, so the temporal offset in channel units is off itself.
        TriResult tr =
            trilinear_eval(volume, x + off * nw.d.x, y + off * nw.d.y, base_tc + off);
        g += aj * tr.value;
    }
    return g;
}

}  // namespace

DefParams def_params_from_logits(const Image& centers, const std::vector<Image>& logits,
                                 double lambda, double sigma, int L) {
    if (logits.size() < 3 || logits.size() % 2 == 0)
        throw std::invalid_argument(
            "def_params_from_logits: need an odd number of planes, at least 3");
    for (const Image& plane : logits)
        require_same_size(centers, plane, "def_params_from_logits");

    DefParams p;
    p.c = centers;
    p.k = static_cast<int>(logits.size() / 2);
    p.lambda = lambda;
    p.sigma = sigma;
    p.L = L;
    size_t planes = logits.size();
    p.alpha.assign(planes, Image(centers.height(), centers.width()));
    for (size_t i = 0; i < centers.size(); ++i) {
        double m = logits[0][i];
        for (size_t j = 1; j < planes; ++j) m = std::max(m, logits[j][i]);
        double sum = 0.0;
        for (size_t j = 0; j < planes; ++j) sum += std::exp(logits[j][i] - m);
        for (size_t j = 0; j < planes; ++j) p.alpha[j][i] = std::exp(logits[j][i] - m) / sum;
    }
    validate_def_params(p, "def_params_from_logits");
    return p;
}

void validate_def_params(const DefParams& params, const std::string& where) {
    if (params.k < 1) throw std::invalid_argument(where + ": k must be at least 1");
    if (!(params.lambda > 0.0)) throw std::invalid_argument(where + ": lambda must be positive");
    if (!(params.sigma > 0.0)) throw std::invalid_argument(where + ": sigma must be positive");
    if (params.L < 1) throw std::invalid_argument(where + ": window must be at least 1");
    if (static_cast<int>(params.alpha.size()) != params.plane_count())
        throw std::invalid_argument(where + ": coefficient plane count does not match k");
    if (!params.c.all_finite()) throw std::invalid_argument(where + ": non-finite centers");
    for (const Image& plane : params.alpha) {
        require_same_size(params.c, plane, where);
        for (size_t i = 0; i < plane.size(); ++i)
            if (!(plane[i] >= 0.0))
                throw std::invalid_argument(where + ": negative coefficient");
    }
    for (size_t i = 0; i < params.c.size(); ++i) {
        double sum = 0.0;
        for (const Image& plane : params.alpha) sum += plane[i];
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument(where + ": coefficients do not sum to 1");
    }
}

ScatterSamples propagate_velocity(const FlowField& flow, double c_value,
                                  double interval_begin) {
    if (c_value < interval_begin)
        throw std::invalid_argument("propagate_velocity: center precedes the interval");
    ScatterSamples s;
    s.height = flow.height();
    s.width = flow.width();
    double shift = c_value - interval_begin;
    s.positions.reserve(flow.u.size());
    s.velocities.reserve(flow.u.size());
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            Vec2 f = flow.at(y, x);
            s.positions.push_back({x + shift * f.x, y + shift * f.y});
            s.velocities.push_back(f);
        }
    return s;
}

Vec2 resample_velocity(const ScatterSamples& samples, Vec2 target, double sigma, int L) {
    if (samples.positions.size() != samples.velocities.size())
        throw std::invalid_argument("resample_velocity: positions/velocities length mismatch");
    if (samples.positions.empty())
        throw std::invalid_argument("resample_velocity: no samples");
    if (!(sigma > 0.0)) throw std::invalid_argument("resample_velocity: sigma must be positive");
    if (L < 1) throw std::invalid_argument("resample_velocity: window must be at least 1");

    double half = 0.5 * L;
    double two_sigma2 = 2.0 * sigma * sigma;
    double wsum = 0.0;
    for (size_t i = 0; i < samples.positions.size(); ++i) {
        const Vec2& n = samples.positions[i];
        if (std::abs(n.x - target.x) <= half && std::abs(n.y - target.y) <= half)
            wsum += nw_weight(n.x, n.y, target, two_sigma2);
    }
    if (!(wsum >= 1e-12)) {
        if (samples.height < 1 || samples.width < 1 ||
            samples.positions.size() !=
                static_cast<size_t>(samples.height) * static_cast<size_t>(samples.width))
            throw std::invalid_argument(
                "resample_velocity: empty window and no source grid to fall back to");
        int gx = std::clamp(static_cast<int>(std::lround(target.x)), 0, samples.width - 1);
        int gy = std::clamp(static_cast<int>(std::lround(target.y)), 0, samples.height - 1);
        return samples.velocities[static_cast<size_t>(gy) * samples.width + gx];
    }

    Vec2 out{0.0, 0.0};
    for (size_t i = 0; i < samples.positions.size(); ++i) {
        const Vec2& n = samples.positions[i];
        if (std::abs(n.x - target.x) <= half && std::abs(n.y - target.y) <= half) {
            double wn = nw_weight(n.x, n.y, target, two_sigma2) / wsum;
            out.x += wn * samples.velocities[i].x;
            out.y += wn * samples.velocities[i].y;
        }
    }
    return out;
}

double trilinear_sample(const StackedEventFrames& volume, double x, double y,
                        double t_channel) {
    return trilinear_eval(volume, x, y, t_channel).value;
}

Image directional_filter(const StackedEventFrames& volume, const FlowField& flow,
                         const DefParams& params, std::pair<double, double> interval) {
    FilterSetup s = prepare_filter(volume, flow, params, interval, "directional_filter");
    Image out(params.c.height(), params.c.width());
    parallel_for(0, static_cast<size_t>(out.height()), [&](size_t y0, size_t y1) {
        for (size_t y = y0; y < y1; ++y)
            for (int x = 0; x < out.width(); ++x)
                out.at(static_cast<int>(y), x) =
                    guidance_at(volume, flow, params, s, static_cast<int>(y), x, nullptr,
                                nullptr);
    });
    return out;
}

DefGradients directional_filter_grad(const StackedEventFrames& volume, const FlowField& flow,
                                     const DefParams& params,
                                     std::pair<double, double> interval,
                                     const Image& upstream) {
    FilterSetup s = prepare_filter(volume, flow, params, interval, "directional_filter_grad");
    require_same_size(params.c, upstream, "directional_filter_grad");
    int h = params.c.height(), w = params.c.width();
    int planes = params.plane_count();

    DefGradients g;
    g.d_alpha.assign(static_cast<size_t>(planes), Image(h, w));
    g.d_logits.assign(static_cast<size_t>(planes), Image(h, w));
    g.d_c = Image(h, w);
    g.d_volume.assign(volume.channels.size(), Image(volume.height, volume.width));

    // Volume contributions are gathered per pixel during the parallel pass
    // and scattered serially afterwards, so the accumulation order never
    // depends on the thread count.
    struct VolContribution {
        int ch, y, x;
        double v;
    };
    std::vector<std::vector<VolContribution>> scatter(static_cast<size_t>(h) * w);

    parallel_for(0, static_cast<size_t>(h), [&](size_t y0, size_t y1) {
        std::vector<double> svals(static_cast<size_t>(planes));
        for (size_t yz = y0; yz < y1; ++yz) {
            int y = static_cast<int>(yz);
            for (int x = 0; x < w; ++x) {
                double c_raw = params.c.at(y, x);
                double c = std::clamp(c_raw, s.a, s.b);
                bool clamped = (c_raw < s.a) || (c_raw > s.b);
                NwResult nw = nw_resample_grad(
                    flow, c - s.a, {static_cast<double>(x), static_cast<double>(y)},
                    params.sigma, params.L, s.fmax, true);
                double base_tc = s.base_channel + (c - s.a) / s.chunk_dt - 0.5;
                double u = upstream.at(y, x);
                auto& bucket = scatter[static_cast<size_t>(y) * w + x];

                double dg_dc = 0.0;
                for (int j = -params.k; j <= params.k; ++j) {
                    double aj = params.alpha[static_cast<size_t>(j + params.k)].at(y, x);
                    double off = params.lambda * j;
                    TriResult tr = trilinear_eval(volume, x + off * nw.d.x,
                                                  y + off * nw.d.y, base_tc + off);
                    svals[static_cast<size_t>(j + params.k)] = tr.value;
                    dg_dc += aj * (tr.dx * (off * nw.dd_dc.x) + tr.dy * (off * nw.dd_dc.y) +
                                   tr.dt * (1.0 / s.chunk_dt));
                    for (int ci = 0; ci < tr.corner_count; ++ci)
                        bucket.push_back({tr.corners[ci].ch, tr.corners[ci].y,
                                          tr.corners[ci].x, u * aj * tr.corners[ci].w});
                }

                double weighted = 0.0;
                for (int m = 0; m < planes; ++m) {
                    double da = u * svals[static_cast<size_t>(m)];
                    g.d_alpha[static_cast<size_t>(m)].at(y, x) = da;
                    weighted += params.alpha[static_cast<size_t>(m)].at(y, x) * da;
                }
                for (int m = 0; m < planes; ++m) {
                    double am = params.alpha[static_cast<size_t>(m)].at(y, x);
                    g.d_logits[static_cast<size_t>(m)].at(y, x) =
                        am * (g.d_alpha[static_cast<size_t>(m)].at(y, x) - weighted);
                }
                g.d_c.at(y, x) = clamped ? 0.0 : u * dg_dc;
            }
        }
    });

    for (const auto& bucket : scatter)
        for (const VolContribution& vc : bucket)
            g.d_volume[static_cast<size_t>(vc.ch)].at(vc.y, vc.x) += vc.v;
    return g;
}

double GradCheckReport::max_rel() const {
    return std::max(max_rel_logits, std::max(max_rel_c, max_rel_volume));
}

namespace {

double rel_err(double analytic, double fd) {
    double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    return std::abs(analytic - fd) / scale;
}

double dist_to_int(double v) { return std::abs(v - std::round(v)); }

}  // namespace

GradCheckReport run_gradient_check(int configs, unsigned seed, double threshold) {
    if (configs < 1) throw std::invalid_argument("run_gradient_check: need at least 1 config");
    GradCheckReport rep;
    rep.configs = configs;
    rep.threshold = threshold;

    constexpr int kH = 8, kW = 8, kChunks = 8, kK = 2;
    constexpr double kA = 1.0, kB = 2.0;
    constexpr double kH_fd = 1e-4;
    const int planes = 2 * kK + 1;

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uflow(-1.5, 1.5);
    std::uniform_real_distribution<double> ucenter(0.1, 0.9);
    std::uniform_real_distribution<double> uvol(-2.0, 2.0);
    std::uniform_real_distribution<double> uup(-1.0, 1.0);
    std::uniform_real_distribution<double> ulambda(0.6, 1.4);
    std::uniform_real_distribution<double> usigma(0.8, 1.5);
    std::normal_distribution<double> ulogit(0.0, 1.0);

    for (int cfg = 0; cfg < configs; ++cfg) {
        FlowField flow(kH, kW);
        for (size_t i = 0; i < flow.u.size(); ++i) flow.u[i] = uflow(rng);
        for (size_t i = 0; i < flow.v.size(); ++i) flow.v[i] = uflow(rng);

        Image centers(kH, kW);
        for (size_t i = 0; i < centers.size(); ++i) centers[i] = kA + ucenter(rng);

        std::vector<Image> logits(static_cast<size_t>(planes), Image(kH, kW));
        for (Image& plane : logits)
            for (size_t i = 0; i < plane.size(); ++i) plane[i] = ulogit(rng);

        double lambda = ulambda(rng);
        double sigma = usigma(rng);
        DefParams params = def_params_from_logits(centers, logits, lambda, sigma, 20);

        StackedEventFrames vol;
        vol.height = kH;
        vol.width = kW;
        vol.chunks_per_interval = kChunks;
        vol.intervals = {{kA, kB}};
        for (int j = 0; j <= kChunks; ++j)
            vol.chunk_bounds.push_back(kA + (kB - kA) * j / kChunks);
        vol.channels.assign(kChunks, Image(kH, kW));
        for (Image& ch : vol.channels)
            for (size_t i = 0; i < ch.size(); ++i) ch[i] = uvol(rng);

        Image upstream(kH, kW);
        for (size_t i = 0; i < upstream.size(); ++i) upstream[i] = uup(rng);

        const std::pair<double, double> interval{kA, kB};
        DefGradients analytic =
            directional_filter_grad(vol, flow, params, interval, upstream);
        FilterSetup setup = prepare_filter(vol, flow, params, interval, "run_gradient_check");

        // Logit gradients: perturbing one logit at one pixel only moves that
        // pixel's coefficients, so a single-pixel forward suffices.
        std::vector<double> base_logits(static_cast<size_t>(planes));
        std::vector<double> alpha_p(static_cast<size_t>(planes));
        for (int y = 0; y < kH; ++y)
            for (int x = 0; x < kW; ++x) {
                for (int m = 0; m < planes; ++m)
                    base_logits[static_cast<size_t>(m)] =
                        logits[static_cast<size_t>(m)].at(y, x);
                for (int m = 0; m < planes; ++m) {
                    double g_side[2];
                    for (int side = 0; side < 2; ++side) {
                        std::vector<double> lp = base_logits;
                        lp[static_cast<size_t>(m)] += side == 0 ? kH_fd : -kH_fd;
                        double mx = *std::max_element(lp.begin(), lp.end());
                        double sum = 0.0;
                        for (int q = 0; q < planes; ++q)
                            sum += std::exp(lp[static_cast<size_t>(q)] - mx);
                        for (int q = 0; q < planes; ++q)
                            alpha_p[static_cast<size_t>(q)] =
                                std::exp(lp[static_cast<size_t>(q)] - mx) / sum;
                        g_side[side] = guidance_at(vol, flow, params, setup, y, x,
                                                   alpha_p.data(), nullptr);
                    }
                    double fd = upstream.at(y, x) * (g_side[0] - g_side[1]) / (2.0 * kH_fd);
                    rep.max_rel_logits = std::max(
                        rep.max_rel_logits,
                        rel_err(analytic.d_logits[static_cast<size_t>(m)].at(y, x), fd));
                    ++rep.checks_logits;
                }
            }

        // Center gradients: skip pixels whose sample stencil sits close to a
        // grid line, since interpolation is only piecewise-smooth there. The
        // margin scales with how fast each coordinate moves per unit c; a
        // coordinate that does not move (the center tap, or a zero velocity
        // component) cannot cross a grid line and is exempt.
        for (int y = 0; y < kH; ++y)
            for (int x = 0; x < kW; ++x) {
                double c0 = params.c.at(y, x);
                NwResult nw = nw_resample_grad(
                    flow, c0 - kA, {static_cast<double>(x), static_cast<double>(y)},
                    params.sigma, params.L, setup.fmax, true);
                double base_tc = setup.base_channel + (c0 - kA) / setup.chunk_dt - 0.5;
                bool degenerate = nw.fallback;
                for (int j = -kK; j <= kK && !degenerate; ++j) {
                    double off = params.lambda * j;
                    double sx = x + off * nw.d.x;
                    double sy = y + off * nw.d.y;
                    double st = base_tc + off;
                    double vx = off * nw.dd_dc.x;
                    double vy = off * nw.dd_dc.y;
                    double mt = 3.0 * kH_fd / setup.chunk_dt + 1e-3;
                    if (vx != 0.0 && dist_to_int(sx) < 3.0 * kH_fd * std::abs(vx) + 1e-3)
                        degenerate = true;
                    if (vy != 0.0 && dist_to_int(sy) < 3.0 * kH_fd * std::abs(vy) + 1e-3)
                        degenerate = true;
                    if (dist_to_int(st) < mt)
                        degenerate = true;
                }
                if (degenerate) {
                    ++rep.skipped_c;
                    continue;
                }
                double c_hi = c0 + kH_fd, c_lo = c0 - kH_fd;
                double g_hi = guidance_at(vol, flow, params, setup, y, x, nullptr, &c_hi);
                double g_lo = guidance_at(vol, flow, params, setup, y, x, nullptr, &c_lo);
                double fd = upstream.at(y, x) * (g_hi - g_lo) / (2.0 * kH_fd);
                rep.max_rel_c = std::max(rep.max_rel_c, rel_err(analytic.d_c.at(y, x), fd));
                ++rep.checks_c;
            }

        // Volume gradients: the filter is linear in the volume, so any
        // entries will do; each probe needs a full forward pass.
        std::uniform_int_distribution<int> pick_ch(0, kChunks - 1);
        std::uniform_int_distribution<int> pick_y(0, kH - 1);
        std::uniform_int_distribution<int> pick_x(0, kW - 1);
        for (int probe = 0; probe < 24; ++probe) {
            int ch = pick_ch(rng), py = pick_y(rng), px = pick_x(rng);
            double saved = vol.channels[static_cast<size_t>(ch)].at(py, px);
            double loss_side[2];
            for (int side = 0; side < 2; ++side) {
                vol.channels[static_cast<size_t>(ch)].at(py, px) =
                    saved + (side == 0 ? kH_fd : -kH_fd);
                Image gmap = directional_filter(vol, flow, params, interval);
                double loss = 0.0;
                for (size_t i = 0; i < gmap.size(); ++i) loss += upstream[i] * gmap[i];
                loss_side[side] = loss;
            }
            vol.channels[static_cast<size_t>(ch)].at(py, px) = saved;
            double fd = (loss_side[0] - loss_side[1]) / (2.0 * kH_fd);
            rep.max_rel_volume = std::max(
                rep.max_rel_volume,
                rel_err(analytic.d_volume[static_cast<size_t>(ch)].at(py, px), fd));
            ++rep.checks_volume;
        }
    }
    return rep;
}

}  // namespace evdeblur
