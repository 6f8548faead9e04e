#include "vjscc/video_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vjscc/rng.hpp"

namespace vjscc {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void fill_background(VideoClip& clip, const std::vector<double>& color) {
    for (size_t t = 0; t < clip.t_frames; ++t)
        for (size_t c = 0; c < clip.channels; ++c)
            std::fill_n(clip.data.begin() + clip.flat(t, c, 0, 0), clip.height * clip.width,
                        color[c]);
}

void draw_box(VideoClip& clip, size_t t, const std::array<size_t, 4>& box,
              const std::vector<double>& color) {
    for (size_t c = 0; c < clip.channels; ++c)
        for (size_t y = box[0]; y < box[2]; ++y)
            for (size_t x = box[1]; x < box[3]; ++x) clip.at(t, c, y, x) = color[c];
}

std::vector<double> random_color(Rng& rng, size_t channels) {
    std::vector<double> c(channels);
    for (auto& v : c) v = rng.uniform();
    return c;
}

std::vector<double> contrasting_color(const std::vector<double>& bg) {
    std::vector<double> c(bg.size());
    for (size_t i = 0; i < bg.size(); ++i) c[i] = std::fmod(bg[i] + 0.5, 1.0);
    return c;
}

// Velocity and start position such that the whole trajectory stays in frame.
void pick_linear_trajectory(Rng& rng, size_t extent, size_t obj, size_t t_frames, long& start,
                            long& vel) {
    const long span = static_cast<long>(extent) - static_cast<long>(obj);
    for (long speed = 2; speed >= 0; --speed) {
        const long travel = speed * static_cast<long>(t_frames - 1);
        if (travel > span) continue;
        vel = speed;
        if (speed != 0 && rng.uniform() < 0.5) vel = -speed;
        const long lo = vel < 0 ? -vel * static_cast<long>(t_frames - 1) : 0;
        const long hi = vel > 0 ? span - travel : span;
        start = lo + static_cast<long>(rng.integer(static_cast<uint64_t>(hi - lo + 1)));
        return;
    }
    start = 0;
    vel = 0;
}

SyntheticClip make_mover_clip(uint64_t seed, size_t t_frames, size_t channels, size_t height,
                              size_t width, bool noise_background) {
    Rng rng(seed);
    SyntheticClip out;
    VideoClip& clip = out.clip;
    clip.t_frames = t_frames;
    clip.channels = channels;
    clip.height = height;
    clip.width = width;
    clip.data.assign(clip.numel(), 0.0);

    const auto bg = random_color(rng, channels);
    if (noise_background) {
        // per-pixel noise, identical in every frame
        std::vector<double> plane(channels * height * width);
        for (auto& v : plane) v = rng.uniform();
        for (size_t t = 0; t < t_frames; ++t)
            std::copy(plane.begin(), plane.end(), clip.data.begin() + clip.flat(t, 0, 0, 0));
    } else {
        fill_background(clip, bg);
    }

    const size_t side = std::max<size_t>(2, std::min(height, width) / 4);
    long y0, x0, vy, vx;
    pick_linear_trajectory(rng, height, side, t_frames, y0, vy);
    pick_linear_trajectory(rng, width, side, t_frames, x0, vx);
    const auto color = contrasting_color(bg);
    out.trace.boxes.resize(t_frames);
    for (size_t t = 0; t < t_frames; ++t) {
        const size_t y = static_cast<size_t>(y0 + vy * static_cast<long>(t));
        const size_t x = static_cast<size_t>(x0 + vx * static_cast<long>(t));
        const std::array<size_t, 4> box{y, x, y + side, x + side};
        draw_box(clip, t, box, color);
        out.trace.boxes[t] = box;
    }
    return out;
}

SyntheticClip make_bouncing_ball(uint64_t seed, size_t t_frames, size_t channels, size_t height,
                                 size_t width) {
    Rng rng(seed);
    SyntheticClip out;
    VideoClip& clip = out.clip;
    clip.t_frames = t_frames;
    clip.channels = channels;
    clip.height = height;
    clip.width = width;
    clip.data.assign(clip.numel(), 0.0);

    const auto bg = random_color(rng, channels);
    fill_background(clip, bg);
    const auto color = contrasting_color(bg);

    const long r = std::max<long>(2, static_cast<long>(std::min(height, width)) / 8);
    long cy = r + static_cast<long>(rng.integer(height - 2 * r));
    long cx = r + static_cast<long>(rng.integer(width - 2 * r));
    long vy = rng.uniform() < 0.5 ? 1 : 2;
    long vx = rng.uniform() < 0.5 ? 1 : 2;
    if (rng.uniform() < 0.5) vy = -vy;
    if (rng.uniform() < 0.5) vx = -vx;

    out.trace.boxes.resize(t_frames);
    for (size_t t = 0; t < t_frames; ++t) {
        for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx)
                if (dy * dy + dx * dx <= r * r)
                    for (size_t c = 0; c < channels; ++c)
                        clip.at(t, c, static_cast<size_t>(cy + dy), static_cast<size_t>(cx + dx)) =
                            color[c];
        out.trace.boxes[t] = {static_cast<size_t>(cy - r), static_cast<size_t>(cx - r),
                              static_cast<size_t>(cy + r + 1), static_cast<size_t>(cx + r + 1)};
        // reflect off walls
        if (cy + vy < r || cy + vy >= static_cast<long>(height) - r) vy = -vy;
        if (cx + vx < r || cx + vx >= static_cast<long>(width) - r) vx = -vx;
        cy += vy;
        cx += vx;
    }
    return out;
}

}  // namespace

VideoClip load_raw(const std::string& path, size_t t_frames, size_t channels, size_t height,
                   size_t width) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_raw: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const size_t expected = t_frames * channels * height * width;
    if (bytes.size() != expected)
        throw IoError("load_raw: " + path + " holds " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expected));
    VideoClip clip;
    clip.t_frames = t_frames;
    clip.channels = channels;
    clip.height = height;
    clip.width = width;
    clip.data.resize(expected);
    for (size_t i = 0; i < expected; ++i)
        clip.data[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / 255.0;
    return clip;
}

void write_raw(const VideoClip& clip, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_raw: cannot open " + path);
    std::vector<char> bytes(clip.data.size());
    for (size_t i = 0; i < clip.data.size(); ++i) {
        const double v = std::clamp(clip.data[i], 0.0, 1.0);
        bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_raw: short write to " + path);
}

SyntheticClip synthesize_clip(uint64_t seed, size_t t_frames, size_t channels, size_t height,
                              size_t width, const std::string& pattern) {
    const uint64_t mixed = mix64(seed, fnv1a(pattern));
    if (pattern == "moving_square") {
        return make_mover_clip(mixed, t_frames, channels, height, width, false);
    } else if (pattern == "static_noise_background_with_mover") {
        return make_mover_clip(mixed, t_frames, channels, height, width, true);
    } else if (pattern == "bouncing_ball") {
        return make_bouncing_ball(mixed, t_frames, channels, height, width);
    }
    throw ConfigError("synthesize_clip: unknown pattern '" + pattern + "'");
}

void write_mask_map(const std::vector<uint8_t>& mask, size_t n_t, size_t n_h, size_t n_w,
                    const std::string& path_prefix) {
    if (mask.size() != n_t * n_h * n_w)
        throw DimensionError("write_mask_map: mask length " + std::to_string(mask.size()) +
                             " does not equal n_t*n_h*n_w = " + std::to_string(n_t * n_h * n_w));
    for (size_t t = 0; t < n_t; ++t) {
        const std::string path = path_prefix + "_t" + std::to_string(t) + ".pgm";
        std::ofstream out(path);
        if (!out) throw IoError("write_mask_map: cannot open " + path);
        out << "P2\n" << n_w << " " << n_h << "\n255\n";
        for (size_t j = 0; j < n_h; ++j) {
            for (size_t k = 0; k < n_w; ++k) {
                out << (mask[(t * n_h + j) * n_w + k] ? 255 : 0);
                out << (k + 1 == n_w ? '\n' : ' ');
            }
        }
        if (!out) throw IoError("write_mask_map: short write to " + path);
    }
}

std::vector<uint8_t> mover_token_footprint(const MoverTrace& trace, size_t tube_t, size_t tube_h,
                                           size_t tube_w, size_t n_t, size_t n_h, size_t n_w) {
    std::vector<uint8_t> footprint(n_t * n_h * n_w, 0);
    for (size_t frame = 0; frame < trace.boxes.size(); ++frame) {
        const size_t i = frame / tube_t;
        if (i >= n_t) break;
        const auto& box = trace.boxes[frame];
        if (box[0] == box[2] || box[1] == box[3]) continue;
        const size_t j0 = box[0] / tube_h;
        const size_t j1 = std::min(n_h - 1, (box[2] - 1) / tube_h);
        const size_t k0 = box[1] / tube_w;
        const size_t k1 = std::min(n_w - 1, (box[3] - 1) / tube_w);
        for (size_t j = j0; j <= j1; ++j)
            for (size_t k = k0; k <= k1; ++k) footprint[(i * n_h + j) * n_w + k] = 1;
    }
    return footprint;
}

std::vector<int> read_pgm(const std::string& path, size_t& height, size_t& width) {
    std::ifstream in(path);
    if (!in) throw IoError("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P2") throw IoError("read_pgm: " + path + " is not a P2 graymap");
    int maxval = 0;
    in >> width >> height >> maxval;
    std::vector<int> pixels(width * height);
    for (auto& p : pixels) in >> p;
    if (!in) throw IoError("read_pgm: truncated file " + path);
    return pixels;
}

}  // namespace vjscc
