#pragma once

#include <vector>

#include "vjscc/tensor.hpp"

namespace vjscc {

// One pre-norm Transformer block: MSA with n_heads heads of dimension
// K/n_heads, then an MLP of hidden width mlp_ratio*K, each behind a layer
// norm and a residual connection.
struct LayerParams {
    Tensor ln1_gain, ln1_bias;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gain, ln2_bias;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
    size_t n_heads = 1;
};

// A paired spatial/temporal stack with its learned positional embeddings.
// pos_spatial: [S, K]; pos_temporal: [n_t, K].
struct TransformerStack {
    std::vector<LayerParams> spatial_layers;
    std::vector<LayerParams> temporal_layers;
    Tensor pos_spatial;
    Tensor pos_temporal;
};

inline constexpr double kLayerNormEps = 1e-5;

// q, k, v: [B, N, K] already projected. Splits into heads, applies scaled
// dot-product attention per head, concatenates and output-projects. If
// weights_out is non-null it receives the [B, heads, N, N] attention matrix.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, size_t n_heads,
                            const Tensor& out_w, const Tensor& out_b,
                            Tensor* weights_out = nullptr);

// x: [B, N, K] -> [B, N, K]
Tensor encoder_layer(const Tensor& x, const LayerParams& p);

Tensor run_layers(const Tensor& x, const std::vector<LayerParams>& layers);

// grid: [n_t, S, K]. Adds spatial positions, runs the spatial layers with
// batch axis n_t, rearranges to [S, n_t, K], adds temporal positions, runs
// the temporal layers, and rearranges back.
Tensor st_then_tt(const Tensor& grid, const TransformerStack& stack);

// Decoder-side mirror: temporal layers first, then spatial.
Tensor tt_then_st(const Tensor& grid, const TransformerStack& stack);

// [n_t, S, K] <-> [S, n_t, K]
Tensor swap_grid_axes(const Tensor& grid);

}  // namespace vjscc
