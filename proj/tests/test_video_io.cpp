#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "vjscc/video_io.hpp"

using namespace vjscc;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("load_raw scales bytes into [0,1]") {
    const std::string path = temp_path("vio_all255.raw");
    {
        std::ofstream out(path, std::ios::binary);
        std::vector<char> bytes(16 * 3 * 32 * 32, static_cast<char>(255));
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    VideoClip clip = load_raw(path, 16, 3, 32, 32);
    for (double v : clip.data) CHECK(v == 1.0);

    {
        std::ofstream out(path, std::ios::binary);
        std::vector<char> bytes(16 * 3 * 32 * 32, 0);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    clip = load_raw(path, 16, 3, 32, 32);
    for (double v : clip.data) CHECK(v == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("load_raw reports expected vs actual byte counts") {
    const std::string path = temp_path("vio_short.raw");
    {
        std::ofstream out(path, std::ios::binary);
        out << "abc";
    }
    try {
        load_raw(path, 2, 1, 4, 4);
        FAIL("expected IoError");
    } catch (const IoError& err) {
        const std::string msg = err.what();
        CHECK(msg.find("3") != std::string::npos);
        CHECK(msg.find("32") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("write_raw then load_raw is byte-identical") {
    SyntheticClip synth = synthesize_clip(42, 4, 3, 16, 16, "moving_square");
    const std::string a = temp_path("vio_rt_a.raw");
    const std::string b = temp_path("vio_rt_b.raw");
    write_raw(synth.clip, a);
    VideoClip loaded = load_raw(a, 4, 3, 16, 16);
    write_raw(loaded, b);
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ba == bb);
    CHECK(ba.size() == 4u * 3 * 16 * 16);
    std::remove(a.c_str());
    std::remove(b.c_str());
}

TEST_CASE("synthesize_clip is deterministic in its seed") {
    for (const char* pattern :
         {"moving_square", "bouncing_ball", "static_noise_background_with_mover"}) {
        SyntheticClip a = synthesize_clip(7, 8, 3, 32, 32, pattern);
        SyntheticClip b = synthesize_clip(7, 8, 3, 32, 32, pattern);
        CHECK(a.clip.data == b.clip.data);
        SyntheticClip c = synthesize_clip(8, 8, 3, 32, 32, pattern);
        CHECK(a.clip.data != c.clip.data);
        for (double v : a.clip.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("moving square translates by a fixed integer velocity") {
    SyntheticClip synth = synthesize_clip(3, 8, 1, 32, 32, "moving_square");
    REQUIRE(synth.trace.boxes.size() == 8);
    const long vy = static_cast<long>(synth.trace.boxes[1][0]) -
                    static_cast<long>(synth.trace.boxes[0][0]);
    const long vx = static_cast<long>(synth.trace.boxes[1][1]) -
                    static_cast<long>(synth.trace.boxes[0][1]);
    for (size_t t = 1; t < 8; ++t) {
        CHECK(static_cast<long>(synth.trace.boxes[t][0]) ==
              static_cast<long>(synth.trace.boxes[0][0]) + vy * static_cast<long>(t));
        CHECK(static_cast<long>(synth.trace.boxes[t][1]) ==
              static_cast<long>(synth.trace.boxes[0][1]) + vx * static_cast<long>(t));
    }
}

TEST_CASE("background pixels outside the trajectory are static") {
    for (const char* pattern : {"moving_square", "static_noise_background_with_mover"}) {
        SyntheticClip synth = synthesize_clip(11, 8, 3, 32, 32, pattern);
        const VideoClip& clip = synth.clip;
        // pixels never covered by any box must be identical across frames
        std::set<std::pair<size_t, size_t>> covered;
        for (const auto& box : synth.trace.boxes)
            for (size_t y = box[0]; y < box[2]; ++y)
                for (size_t x = box[1]; x < box[3]; ++x) covered.insert({y, x});
        size_t checked = 0;
        for (size_t y = 0; y < clip.height; ++y)
            for (size_t x = 0; x < clip.width; ++x) {
                if (covered.count({y, x})) continue;
                for (size_t t = 1; t < clip.t_frames; ++t)
                    for (size_t c = 0; c < clip.channels; ++c)
                        CHECK(clip.at(t, c, y, x) == clip.at(0, c, y, x));
                ++checked;
            }
        CHECK(checked > 0);
    }
}

TEST_CASE("unknown pattern raises a config error") {
    CHECK_THROWS_AS(synthesize_clip(0, 4, 1, 16, 16, "zigzag"), ConfigError);
}

TEST_CASE("mask maps render kept tokens white and dropped black") {
    const std::string prefix = temp_path("vio_mask");
    const size_t n_t = 2, n_h = 4, n_w = 4;

    std::vector<uint8_t> ones(n_t * n_h * n_w, 1);
    write_mask_map(ones, n_t, n_h, n_w, prefix);
    size_t h = 0, w = 0;
    for (size_t t = 0; t < n_t; ++t) {
        auto px = read_pgm(prefix + "_t" + std::to_string(t) + ".pgm", h, w);
        CHECK(h == n_h);
        CHECK(w == n_w);
        for (int v : px) CHECK(v == 255);
    }

    std::vector<uint8_t> zeros(n_t * n_h * n_w, 0);
    write_mask_map(zeros, n_t, n_h, n_w, prefix);
    for (size_t t = 0; t < n_t; ++t) {
        auto px = read_pgm(prefix + "_t" + std::to_string(t) + ".pgm", h, w);
        for (int v : px) CHECK(v == 0);
    }

    // checkerboard, verified pixel by pixel against the token index map
    std::vector<uint8_t> checker(n_t * n_h * n_w);
    for (size_t t = 0; t < n_t; ++t)
        for (size_t j = 0; j < n_h; ++j)
            for (size_t k = 0; k < n_w; ++k)
                checker[(t * n_h + j) * n_w + k] = static_cast<uint8_t>((j + k) % 2);
    write_mask_map(checker, n_t, n_h, n_w, prefix);
    for (size_t t = 0; t < n_t; ++t) {
        auto px = read_pgm(prefix + "_t" + std::to_string(t) + ".pgm", h, w);
        for (size_t j = 0; j < n_h; ++j)
            for (size_t k = 0; k < n_w; ++k)
                CHECK(px[j * n_w + k] == ((j + k) % 2 ? 255 : 0));
    }
    for (size_t t = 0; t < n_t; ++t)
        std::remove((prefix + "_t" + std::to_string(t) + ".pgm").c_str());
}

TEST_CASE("mask map length mismatch raises a dimension error") {
    std::vector<uint8_t> mask(7, 1);
    CHECK_THROWS_AS(write_mask_map(mask, 2, 2, 2, temp_path("vio_bad")), DimensionError);
}

TEST_CASE("mover footprint marks exactly the intersected tubes") {
    MoverTrace trace;
    trace.boxes = {{0, 0, 4, 4}, {4, 4, 8, 8}};  // two frames
    // tube_t = 2 so both frames land in temporal slice 0; 4x4 tubes over 8x8
    auto fp = mover_token_footprint(trace, 2, 4, 4, 1, 2, 2);
    CHECK(fp == std::vector<uint8_t>{1, 0, 0, 1});
}
