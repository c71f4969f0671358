#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace evdeblur {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Dense H x W grid of doubles, row-major. Used for intensity images,
/// polarity-integral maps, decay maps and guidance maps alike.
class Image {
public:
    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          values_(static_cast<size_t>(height) * static_cast<size_t>(width), fill) {
        if (height < 0 || width < 0)
            throw std::invalid_argument("Image: negative dimensions");
    }

    static Image constant(int height, int width, double v) { return Image(height, width, v); }

    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& at(int y, int x) { return values_[static_cast<size_t>(y) * width_ + x]; }
    double at(int y, int x) const { return values_[static_cast<size_t>(y) * width_ + x]; }

    double& operator[](size_t i) { return values_[i]; }
    double operator[](size_t i) const { return values_[i]; }

    const std::vector<double>& data() const { return values_; }
    std::vector<double>& data() { return values_; }

    bool same_size(const Image& o) const { return height_ == o.height_ && width_ == o.width_; }

    double min_value() const;
    double max_value() const;
    bool all_finite() const;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

/// Ordered frames at normalized times 1..T, all the same size.
struct FrameSequence {
    std::vector<Image> frames;

    int count() const { return static_cast<int>(frames.size()); }
    // t is the 1-based frame time, matching the normalized timestamps.
    const Image& frame(int t) const { return frames[static_cast<size_t>(t) - 1]; }
    Image& frame(int t) { return frames[static_cast<size_t>(t) - 1]; }
};

/// Throws std::invalid_argument naming `where` when the two grids disagree in shape.
void require_same_size(const Image& a, const Image& b, const std::string& where);

/// Mean absolute difference over all pixels.
double mean_abs_diff(const Image& a, const Image& b);

/// Largest absolute difference over all pixels.
double max_abs_diff(const Image& a, const Image& b);

}  // namespace evdeblur
