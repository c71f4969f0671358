#pragma once

#include <filesystem>

#include "evdeblur/def.hpp"
#include "evdeblur/event.hpp"
#include "evdeblur/image.hpp"
#include "evdeblur/warp.hpp"

namespace evdeblur {

// All writers stage to a temporary file and rename on success, so a failed
// write never leaves a partial file behind. All binary payloads are
// little-endian; all text numbers use '.' as the decimal separator and the
// shortest digit strings that parse back to the same values, independent of
// locale. Every error message starts with the offending path.

/// Text event file. Line 1: `EVT1 <width> <height> <t_begin> <t_end>
/// <count>`; then `<t> <x> <y> <p>` per event. Round-trips are
/// byte-identical for canonically ordered streams.
EventStream read_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, const EventStream& stream);

/// Images: binary `IMF1` (magic, u32 width, u32 height, row-major f32) or
/// PGM (P5 binary / P2 ascii, maxval up to 255, loaded as value/maxval).
/// The reader dispatches on the magic; the writer picks PGM for paths
/// ending in .pgm and IMF1 otherwise.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

/// Binary flow file `FLO1`: magic, u32 width, u32 height, then row-major
/// interleaved (u, v) f32 pairs.
FlowField read_flow(const std::filesystem::path& path);
void write_flow(const std::filesystem::path& path, const FlowField& flow);

/// Text filter-parameter file. Line 1: `DEF1 <width> <height> <k> <lambda>
/// <sigma> <L>`; then the center grid row-major, then 2k+1 coefficient
/// planes row-major, one image row per line. Coefficients must form a
/// per-pixel simplex; small drift (up to 1e-6) is renormalized on load.
DefParams read_def(const std::filesystem::path& path);
void write_def(const std::filesystem::path& path, const DefParams& params);

}  // namespace evdeblur
