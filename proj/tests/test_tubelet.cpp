#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vjscc/rng.hpp"
#include "vjscc/tubelet.hpp"

using namespace vjscc;

namespace {

Tensor identity_matrix(size_t n) {
    std::vector<double> data(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
    return Tensor::from_data({n, n}, std::move(data));
}

Tensor random_tensor(std::vector<size_t> shape, uint64_t seed) {
    Rng rng(seed);
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform();
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("grid extents at full production dimensions") {
    const ClipDims dims{16, 3, 224, 224};
    const TubeletConfig cfg{2, 16, 16, 768};
    Tensor clip = Tensor::zeros({16, 3, 224, 224});
    Tensor w = Tensor::zeros({cfg.tube_numel(3), 768});
    Tensor b = Tensor::zeros({768});
    TokenGrid grid = embed(clip, dims, cfg, w, b);
    CHECK(grid.n_t == 8);
    CHECK(grid.n_h == 14);
    CHECK(grid.n_w == 14);
    CHECK(grid.values.shape() == std::vector<size_t>{8, 196, 768});
}

TEST_CASE("single tube covers the whole clip") {
    const ClipDims dims{2, 1, 4, 4};
    const TubeletConfig cfg{2, 4, 4, 5};
    Tensor clip = random_tensor({2, 1, 4, 4}, 1);
    Tensor w = Tensor::zeros({cfg.tube_numel(1), 5});
    Tensor b = Tensor::zeros({5});
    TokenGrid grid = embed(clip, dims, cfg, w, b);
    CHECK(grid.values.shape() == std::vector<size_t>{1, 1, 5});
}

TEST_CASE("identity projection reproduces flattened tube values") {
    const ClipDims dims{4, 2, 8, 8};
    const TubeletConfig cfg{2, 4, 4, /*K=*/2 * 4 * 4 * 2};
    const size_t tube_len = cfg.tube_numel(dims.channels);
    Tensor clip = random_tensor({4, 2, 8, 8}, 2);
    TokenGrid grid = embed(clip, dims, cfg, identity_matrix(tube_len), Tensor::zeros({tube_len}));

    const size_t n_h = 2, n_w = 2, spatial = n_h * n_w;
    // direct indexing oracle over every tube element
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < n_h; ++j)
            for (size_t k = 0; k < n_w; ++k) {
                size_t e = 0;
                for (size_t dt = 0; dt < cfg.tube_t; ++dt)
                    for (size_t ch = 0; ch < dims.channels; ++ch)
                        for (size_t dr = 0; dr < cfg.tube_h; ++dr)
                            for (size_t dc = 0; dc < cfg.tube_w; ++dc) {
                                const size_t token = i * spatial + j * n_w + k;
                                const double expected =
                                    clip.values()[((i * cfg.tube_t + dt) * dims.channels + ch) *
                                                      dims.height * dims.width +
                                                  (j * cfg.tube_h + dr) * dims.width +
                                                  (k * cfg.tube_w + dc)];
                                CHECK(grid.values.values()[token * tube_len + e] == expected);
                                ++e;
                            }
            }
}

TEST_CASE("embed then deembed with inverse projections is the identity") {
    const ClipDims dims{4, 1, 8, 8};
    const TubeletConfig cfg{2, 4, 4, 2 * 4 * 4};
    const size_t tube_len = cfg.tube_numel(1);
    Tensor clip = random_tensor({4, 1, 8, 8}, 3);
    Tensor eye = identity_matrix(tube_len);
    Tensor zero_b = Tensor::zeros({tube_len});
    TokenGrid grid = embed(clip, dims, cfg, eye, zero_b);
    Tensor back = deembed(grid, dims, cfg, eye, zero_b);
    CHECK(back.values() == clip.values());
    CHECK(back.shape() == clip.shape());
}

TEST_CASE("zero tokens deembed to an all-zero clip") {
    const ClipDims dims{4, 1, 8, 8};
    const TubeletConfig cfg{2, 4, 4, 6};
    TokenGrid grid;
    grid.n_t = 2;
    grid.n_h = 2;
    grid.n_w = 2;
    grid.values = Tensor::zeros({2, 4, 6});
    Tensor w = random_tensor({6, cfg.tube_numel(1)}, 4);
    Tensor clip = deembed(grid, dims, cfg, w, Tensor::zeros({cfg.tube_numel(1)}));
    for (double v : clip.values()) CHECK(v == 0.0);
}

TEST_CASE("deembed shape oracle at production dimensions") {
    const ClipDims dims{16, 3, 224, 224};
    const TubeletConfig cfg{2, 16, 16, 768};
    const size_t tube_len = cfg.tube_numel(3);  // 1536
    TokenGrid grid;
    grid.n_t = 8;
    grid.n_h = 14;
    grid.n_w = 14;
    grid.values = Tensor::zeros({8, 196, 768});
    Tensor clip = deembed(grid, dims, cfg, Tensor::zeros({768, tube_len}),
                          Tensor::zeros({tube_len}));
    CHECK(clip.shape() == std::vector<size_t>{16, 3, 224, 224});
}

TEST_CASE("permuting tubes commutes with embedding") {
    const ClipDims dims{2, 1, 8, 8};
    const TubeletConfig cfg{2, 4, 4, 2 * 4 * 4};
    const size_t tube_len = cfg.tube_numel(1);
    Tensor clip = random_tensor({2, 1, 8, 8}, 5);

    // swap the pixel contents of tubes (0,0,0) and (0,1,1)
    Tensor swapped = Tensor::from_data(clip.shape(), clip.values());
    for (size_t dt = 0; dt < 2; ++dt)
        for (size_t dr = 0; dr < 4; ++dr)
            for (size_t dc = 0; dc < 4; ++dc) {
                const size_t a = (dt * 1 + 0) * 64 + dr * 8 + dc;
                const size_t b = (dt * 1 + 0) * 64 + (4 + dr) * 8 + (4 + dc);
                std::swap(swapped.values()[a], swapped.values()[b]);
            }

    Tensor eye = identity_matrix(tube_len);
    Tensor zb = Tensor::zeros({tube_len});
    TokenGrid g_orig = embed(clip, dims, cfg, eye, zb);
    TokenGrid g_swap = embed(swapped, dims, cfg, eye, zb);

    // tokens 0 and 3 (spatial positions (0,0) and (1,1)) must swap
    auto row = [&](const TokenGrid& g, size_t token) {
        return std::vector<double>(g.values.values().begin() + token * tube_len,
                                   g.values.values().begin() + (token + 1) * tube_len);
    };
    CHECK(row(g_swap, 0) == row(g_orig, 3));
    CHECK(row(g_swap, 3) == row(g_orig, 0));
    CHECK(row(g_swap, 1) == row(g_orig, 1));
    CHECK(row(g_swap, 2) == row(g_orig, 2));
}

TEST_CASE("indivisible dimensions are rejected") {
    const ClipDims dims{5, 1, 8, 8};
    const TubeletConfig cfg{2, 4, 4, 8};
    Tensor clip = Tensor::zeros({5, 1, 8, 8});
    CHECK_THROWS_AS(
        embed(clip, dims, cfg, Tensor::zeros({32, 8}), Tensor::zeros({8})), DimensionError);
}
