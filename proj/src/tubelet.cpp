#include "vjscc/tubelet.hpp"

namespace vjscc {

void check_divisible(const ClipDims& dims, const TubeletConfig& cfg) {
    if (cfg.tube_t == 0 || cfg.tube_h == 0 || cfg.tube_w == 0 || cfg.hidden_dim == 0)
        throw DimensionError("tubelet: tube dims and hidden dim must be positive");
    if (dims.t_frames % cfg.tube_t || dims.height % cfg.tube_h || dims.width % cfg.tube_w)
        throw DimensionError("tubelet: clip " + std::to_string(dims.t_frames) + "x" +
                             std::to_string(dims.height) + "x" + std::to_string(dims.width) +
                             " not divisible by tube " + std::to_string(cfg.tube_t) + "x" +
                             std::to_string(cfg.tube_h) + "x" + std::to_string(cfg.tube_w));
}

std::vector<size_t> tube_unfold_map(const ClipDims& dims, const TubeletConfig& cfg) {
    check_divisible(dims, cfg);
    const size_t n_t = dims.t_frames / cfg.tube_t;
    const size_t n_h = dims.height / cfg.tube_h;
    const size_t n_w = dims.width / cfg.tube_w;
    const size_t tube_len = cfg.tube_numel(dims.channels);
    std::vector<size_t> map(n_t * n_h * n_w * tube_len);
    size_t out = 0;
    for (size_t i = 0; i < n_t; ++i)
        for (size_t j = 0; j < n_h; ++j)
            for (size_t k = 0; k < n_w; ++k)
                for (size_t dt = 0; dt < cfg.tube_t; ++dt)
                    for (size_t ch = 0; ch < dims.channels; ++ch)
                        for (size_t dr = 0; dr < cfg.tube_h; ++dr)
                            for (size_t dc = 0; dc < cfg.tube_w; ++dc)
                                map[out++] =
                                    ((i * cfg.tube_t + dt) * dims.channels + ch) * dims.height *
                                        dims.width +
                                    (j * cfg.tube_h + dr) * dims.width + (k * cfg.tube_w + dc);
    return map;
}

std::vector<size_t> invert_permutation(const std::vector<size_t>& perm) {
    std::vector<size_t> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

TokenGrid embed(const Tensor& clip, const ClipDims& dims, const TubeletConfig& cfg,
                const Tensor& proj_w, const Tensor& proj_b) {
    check_divisible(dims, cfg);
    if (clip.numel() != dims.numel())
        throw DimensionError("embed: clip " + shape_str(clip.shape()) + " does not match dims");
    const size_t tube_len = cfg.tube_numel(dims.channels);
    if (proj_w.ndim() != 2 || proj_w.dim(0) != tube_len || proj_w.dim(1) != cfg.hidden_dim)
        throw DimensionError("embed: projection " + shape_str(proj_w.shape()) + " must be [" +
                             std::to_string(tube_len) + "x" + std::to_string(cfg.hidden_dim) + "]");
    TokenGrid grid;
    grid.n_t = dims.t_frames / cfg.tube_t;
    grid.n_h = dims.height / cfg.tube_h;
    grid.n_w = dims.width / cfg.tube_w;
    const auto map = tube_unfold_map(dims, cfg);
    Tensor tubes = apply_permutation(clip, map, {grid.token_count(), tube_len});
    Tensor tokens = linear(tubes, proj_w, proj_b);
    grid.values = reshape(tokens, {grid.n_t, grid.spatial(), cfg.hidden_dim});
    return grid;
}

Tensor deembed(const TokenGrid& tokens, const ClipDims& dims, const TubeletConfig& cfg,
               const Tensor& proj_w, const Tensor& proj_b) {
    check_divisible(dims, cfg);
    const size_t tube_len = cfg.tube_numel(dims.channels);
    if (tokens.n_t != dims.t_frames / cfg.tube_t || tokens.n_h != dims.height / cfg.tube_h ||
        tokens.n_w != dims.width / cfg.tube_w)
        throw DimensionError("deembed: grid extents do not match target clip dims");
    if (proj_w.ndim() != 2 || proj_w.dim(1) != tube_len)
        throw DimensionError("deembed: projection " + shape_str(proj_w.shape()) +
                             " must map to tube length " + std::to_string(tube_len));
    Tensor flat = reshape(tokens.values, {tokens.token_count(), tokens.values.shape().back()});
    Tensor tubes = linear(flat, proj_w, proj_b);
    const auto map = tube_unfold_map(dims, cfg);
    // unfold read clip[map[i]] into slot i, so folding scatters slot i back
    const auto inv = invert_permutation(map);
    return apply_permutation(tubes, inv,
                             {dims.t_frames, dims.channels, dims.height, dims.width});
}

}  // namespace vjscc
