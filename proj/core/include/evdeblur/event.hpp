#pragma once

#include <utility>
#include <vector>

#include "evdeblur/image.hpp"

namespace evdeblur {

/// One polarity impulse. Coordinates are 0-based pixel indices; the
/// timestamp lives in normalized exposure units.
struct Event {
    double t = 0.0;
    int x = 0;
    int y = 0;
    int p = 0;  // -1 or +1
};

/// Ascending by t, ties broken by y, then x, then p. Total order, so a
/// sorted stream serializes to the same bytes regardless of how it was
/// produced.
bool canonical_less(const Event& a, const Event& b);
void sort_canonical(std::vector<Event>& events);

struct EventStream {
    int width = 0;
    int height = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
    std::vector<Event> events;
};

/// Throws if coordinates, polarities, timestamps or ordering violate the
/// stream invariants. `where` prefixes the error message.
void validate_stream(const EventStream& stream, const std::string& where);

/// Affinely remaps timestamps so the exposure covers [1, T]. Endpoints map
/// exactly: t_begin -> 1, t_end -> T.
EventStream normalize_time(const EventStream& stream, int frame_count);

/// Per-pixel sum of polarities over [a, b), closed at b when b == t_end.
/// Entries are exact integer counts stored as doubles.
Image polarity_integral(const EventStream& stream, double a, double b);

/// Channel-stacked polarity sums: each interval is split into equal chunks
/// and every chunk becomes one channel image. channel(i, j) with
/// j < chunks_per_interval addresses chunk j of interval i.
struct StackedEventFrames {
    int height = 0;
    int width = 0;
    int chunks_per_interval = 0;
    std::vector<std::pair<double, double>> intervals;
    std::vector<double> chunk_bounds;  // size channel_count() + 1
    std::vector<Image> channels;

    int channel_count() const { return static_cast<int>(channels.size()); }
    int interval_count() const { return static_cast<int>(intervals.size()); }
    const Image& channel(int interval, int chunk) const {
        return channels[static_cast<size_t>(interval) * chunks_per_interval + chunk];
    }
};

/// Bins events into chunks_per_interval equal chunks per interval. Chunks
/// are half-open [start, end); the final chunk of the final interval is
/// closed so every event in the partition lands in exactly one chunk.
/// Events outside the partition are ignored.
StackedEventFrames bin_stacked_frames(const EventStream& stream,
                                      const std::vector<std::pair<double, double>>& intervals,
                                      int chunks_per_interval);

}  // namespace evdeblur
