#include "evdeblur/event.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace evdeblur {

bool canonical_less(const Event& a, const Event& b) {
    return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
}

void sort_canonical(std::vector<Event>& events) {
    std::sort(events.begin(), events.end(), canonical_less);
}

void validate_stream(const EventStream& stream, const std::string& where) {
    if (stream.width <= 0 || stream.height <= 0)
        throw std::invalid_argument(where + ": sensor size must be positive");
    if (!(stream.t_end >= stream.t_begin))
        throw std::invalid_argument(where + ": exposure interval is reversed");
    double prev = stream.t_begin;
    for (size_t i = 0; i < stream.events.size(); ++i) {
        const Event& e = stream.events[i];
        if (e.p != -1 && e.p != 1)
            throw std::invalid_argument(where + ": event " + std::to_string(i) +
                                        " has polarity " + std::to_string(e.p));
        if (e.x < 0 || e.x >= stream.width || e.y < 0 || e.y >= stream.height)
            throw std::invalid_argument(where + ": event " + std::to_string(i) +
                                        " is out of the sensor bounds");
        if (!(e.t >= prev))
            throw std::invalid_argument(where + ": event " + std::to_string(i) +
                                        " breaks timestamp order");
        if (e.t > stream.t_end)
            throw std::invalid_argument(where + ": event " + std::to_string(i) +
                                        " lies past the exposure end");
        prev = e.t;
    }
}

EventStream normalize_time(const EventStream& stream, int frame_count) {
    if (frame_count < 2)
        throw std::invalid_argument("normalize_time: frame count must be at least 2");
    EventStream out = stream;
    out.t_begin = 1.0;
    out.t_end = static_cast<double>(frame_count);
    double span = stream.t_end - stream.t_begin;
    if (span <= 0.0) {
        if (!stream.events.empty())
            throw std::invalid_argument("normalize_time: zero-length exposure");
        return out;
    }
    // Map through the fractional position so the endpoints land exactly on
    // 1 and frame_count.
    for (Event& e : out.events) {
        double r = (e.t - stream.t_begin) / span;
        e.t = 1.0 + r * (frame_count - 1);
    }
    return out;
}

Image polarity_integral(const EventStream& stream, double a, double b) {
    if (!(a < b)) throw std::invalid_argument("polarity_integral: empty interval");
    bool closed = (b == stream.t_end);
    Image map(stream.height, stream.width, 0.0);
    for (const Event& e : stream.events) {
        if (e.t < a) continue;
        if (e.t > b) break;  // events are sorted
        if (e.t == b && !closed) break;
        map.at(e.y, e.x) += e.p;
    }
    return map;
}

StackedEventFrames bin_stacked_frames(const EventStream& stream,
                                      const std::vector<std::pair<double, double>>& intervals,
                                      int chunks_per_interval) {
    if (chunks_per_interval < 1)
        throw std::invalid_argument("bin_stacked_frames: chunk count must be at least 1");
    if (intervals.empty())
        throw std::invalid_argument("bin_stacked_frames: no intervals");
    for (size_t i = 0; i < intervals.size(); ++i) {
        if (!(intervals[i].first < intervals[i].second))
            throw std::invalid_argument("bin_stacked_frames: interval " + std::to_string(i) +
                                        " is empty or reversed");
        if (i > 0 && intervals[i].first != intervals[i - 1].second)
            throw std::invalid_argument("bin_stacked_frames: intervals overlap or leave gaps");
    }

    StackedEventFrames out;
    out.height = stream.height;
    out.width = stream.width;
    out.chunks_per_interval = chunks_per_interval;
    out.intervals = intervals;

    size_t channel_count = intervals.size() * static_cast<size_t>(chunks_per_interval);
    out.chunk_bounds.reserve(channel_count + 1);
    for (const auto& [a, b] : intervals) {
        for (int j = 0; j < chunks_per_interval; ++j)
            out.chunk_bounds.push_back(a + (b - a) * j / chunks_per_interval);
    }
    out.chunk_bounds.push_back(intervals.back().second);
    out.channels.assign(channel_count, Image(stream.height, stream.width, 0.0));

    double lo = out.chunk_bounds.front();
    double hi = out.chunk_bounds.back();
    for (const Event& e : stream.events) {
        if (e.t < lo || e.t > hi) continue;
        // Largest bound <= t selects the chunk; t == hi joins the final
        // chunk so the partition is exhaustive.
        auto it = std::upper_bound(out.chunk_bounds.begin(), out.chunk_bounds.end(), e.t);
        size_t idx = static_cast<size_t>(it - out.chunk_bounds.begin()) - 1;
        if (idx >= channel_count) idx = channel_count - 1;
        out.channels[idx].at(e.y, e.x) += e.p;
    }
    return out;
}

}  // namespace evdeblur
