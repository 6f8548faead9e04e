#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vjscc/errors.hpp"

namespace vjscc {

// A pixel volume of T frames, C channels, H x W each, values in [0, 1].
struct VideoClip {
    size_t t_frames = 0;
    size_t channels = 0;
    size_t height = 0;
    size_t width = 0;
    std::vector<double> data;  // row-major [T, C, H, W]
    double frame_rate = 25.0;

    size_t numel() const { return t_frames * channels * height * width; }
    size_t flat(size_t t, size_t c, size_t y, size_t x) const {
        return ((t * channels + c) * height + y) * width + x;
    }
    double& at(size_t t, size_t c, size_t y, size_t x) { return data[flat(t, c, y, x)]; }
    double at(size_t t, size_t c, size_t y, size_t x) const { return data[flat(t, c, y, x)]; }
};

// Axis-aligned object box per frame, for synthetic clips with a mover.
struct MoverTrace {
    // one entry per frame: {y0, x0, y1, x1} half-open pixel box; empty if the
    // pattern has no mover
    std::vector<std::array<size_t, 4>> boxes;
};

struct SyntheticClip {
    VideoClip clip;
    MoverTrace trace;
};

// Raw clip files are headerless unsigned 8-bit data, frame-major planar
// (frame, then channel, then row, then column).
VideoClip load_raw(const std::string& path, size_t t_frames, size_t channels, size_t height,
                   size_t width);
void write_raw(const VideoClip& clip, const std::string& path);

// Known pattern names: moving_square, bouncing_ball,
// static_noise_background_with_mover. Deterministic in (seed, dims, pattern).
SyntheticClip synthesize_clip(uint64_t seed, size_t t_frames, size_t channels, size_t height,
                              size_t width, const std::string& pattern);

// Writes one P2 graymap per temporal slice: kept tokens white (255), dropped
// black (0). Files are named <path_prefix>_t<idx>.pgm.
void write_mask_map(const std::vector<uint8_t>& mask, size_t n_t, size_t n_h, size_t n_w,
                    const std::string& path_prefix);

// P2 reader used by tests and tools.
std::vector<int> read_pgm(const std::string& path, size_t& height, size_t& width);

// Token-level footprint of a mover trace: entry (i,j,k) is 1 when the object
// box intersects tube (i,j,k) in any of the tube's frames. Token order is
// i*(n_h*n_w) + j*n_w + k.
std::vector<uint8_t> mover_token_footprint(const MoverTrace& trace, size_t tube_t, size_t tube_h,
                                           size_t tube_w, size_t n_t, size_t n_h, size_t n_w);

}  // namespace vjscc
