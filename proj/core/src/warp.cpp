#include "evdeblur/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evdeblur/parallel.hpp"

namespace evdeblur {

namespace {
double fetch(const Image& img, int y, int x, Border border) {
    if (y >= 0 && y < img.height() && x >= 0 && x < img.width()) return img.at(y, x);
    if (border == Border::Zero) return 0.0;
    y = std::clamp(y, 0, img.height() - 1);
    x = std::clamp(x, 0, img.width() - 1);
    return img.at(y, x);
}
}  // namespace

double bilinear_sample(const Image& img, double sx, double sy, Border border) {
    if (img.empty()) return 0.0;
    double fx = std::floor(sx);
    double fy = std::floor(sy);
    int x0 = static_cast<int>(fx);
    int y0 = static_cast<int>(fy);
    double wx = sx - fx;
    double wy = sy - fy;
    double v00 = fetch(img, y0, x0, border);
    double v01 = fetch(img, y0, x0 + 1, border);
    double v10 = fetch(img, y0 + 1, x0, border);
    double v11 = fetch(img, y0 + 1, x0 + 1, border);
    double top = (1.0 - wx) * v00 + wx * v01;
    double bot = (1.0 - wx) * v10 + wx * v11;
    return (1.0 - wy) * top + wy * bot;
}

Image backward_warp(const Image& img, const FlowField& flow, Border border) {
    require_same_size(img, flow.u, "backward_warp");
    require_same_size(img, flow.v, "backward_warp");
    Image out(img.height(), img.width());
    parallel_for(0, static_cast<size_t>(img.height()), [&](size_t y0, size_t y1) {
        for (size_t y = y0; y < y1; ++y)
            for (int x = 0; x < img.width(); ++x) {
                int yi = static_cast<int>(y);
                out.at(yi, x) = bilinear_sample(img, x + flow.u.at(yi, x), y + flow.v.at(yi, x),
                                                border);
            }
    });
    return out;
}

double loss_flow(const FrameSequence& seq, const std::vector<FlowField>& flows,
                 const FrameSequence& truth) {
    int T = seq.count();
    if (truth.count() != T)
        throw std::invalid_argument("loss_flow: sequence lengths differ");
    if (static_cast<int>(flows.size()) != T - 1)
        throw std::invalid_argument("loss_flow: need one flow per frame step");
    if (T < 2) throw std::invalid_argument("loss_flow: need at least two frames");
    double total = 0.0;
    for (int i = 1; i < T; ++i) {
        Image predicted = backward_warp(seq.frame(i + 1), flows[static_cast<size_t>(i) - 1]);
        total += mean_abs_diff(predicted, truth.frame(i));
    }
    return total / (T - 1);
}

double loss_tv(const std::vector<FlowField>& flows) {
    if (flows.empty()) throw std::invalid_argument("loss_tv: no flows");
    double total = 0.0;
    for (const FlowField& f : flows) {
        double s = 0.0;
        int h = f.height();
        int w = f.width();
        for (const Image* comp : {&f.u, &f.v}) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    if (x + 1 < w) s += std::abs(comp->at(y, x + 1) - comp->at(y, x));
                    if (y + 1 < h) s += std::abs(comp->at(y + 1, x) - comp->at(y, x));
                }
        }
        total += s / (static_cast<double>(h) * w);
    }
    return total / static_cast<double>(flows.size());
}

}  // namespace evdeblur
