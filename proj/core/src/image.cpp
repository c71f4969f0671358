#include "evdeblur/image.hpp"

#include <algorithm>
#include <limits>

namespace evdeblur {

double Image::min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : values_) m = std::min(m, v);
    return m;
}

double Image::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : values_) m = std::max(m, v);
    return m;
}

bool Image::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_same_size(const Image& a, const Image& b, const std::string& where) {
    if (!a.same_size(b))
        throw std::invalid_argument(where + ": size mismatch (" + std::to_string(a.height()) +
                                    "x" + std::to_string(a.width()) + " vs " +
                                    std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                                    ")");
}

double mean_abs_diff(const Image& a, const Image& b) {
    require_same_size(a, b, "mean_abs_diff");
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double max_abs_diff(const Image& a, const Image& b) {
    require_same_size(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace evdeblur
