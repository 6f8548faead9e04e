#pragma once

#include <vector>

#include "vjscc/tensor.hpp"

namespace vjscc {

struct TubeletConfig {
    size_t tube_t = 2;
    size_t tube_h = 4;
    size_t tube_w = 4;
    size_t hidden_dim = 32;  // token dimension K

    size_t tube_numel(size_t channels) const { return tube_t * tube_h * tube_w * channels; }
};

// Token volume produced by tubelet embedding: values has shape
// [n_t, n_h*n_w, K].
struct TokenGrid {
    Tensor values;
    size_t n_t = 0;
    size_t n_h = 0;
    size_t n_w = 0;

    size_t spatial() const { return n_h * n_w; }
    size_t token_count() const { return n_t * n_h * n_w; }
};

struct ClipDims {
    size_t t_frames, channels, height, width;
    size_t numel() const { return t_frames * channels * height * width; }
};

// Flat source index per unfolded element: output is [M, t*h*w*C] where tube
// (i,j,k) maps to row i*(n_h*n_w) + j*n_w + k and the row is ordered by
// (frame, channel, row, column) within the tube.
std::vector<size_t> tube_unfold_map(const ClipDims& dims, const TubeletConfig& cfg);
std::vector<size_t> invert_permutation(const std::vector<size_t>& perm);

// Throws DimensionError unless T, H, W divide by the tube dims.
void check_divisible(const ClipDims& dims, const TubeletConfig& cfg);

// clip: [T, C, H, W] -> TokenGrid via unfold + affine projection
// (t*h*w*C -> K).
TokenGrid embed(const Tensor& clip, const ClipDims& dims, const TubeletConfig& cfg,
                const Tensor& proj_w, const Tensor& proj_b);

// TokenGrid -> [T, C, H, W] via affine projection (K -> t*h*w*C) + fold.
// No clamping here; evaluation-time clamping is the caller's concern.
Tensor deembed(const TokenGrid& tokens, const ClipDims& dims, const TubeletConfig& cfg,
               const Tensor& proj_w, const Tensor& proj_b);

}  // namespace vjscc
