#include "vjscc/st_transformer.hpp"

#include <cmath>

namespace vjscc {

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, size_t n_heads,
                            const Tensor& out_w, const Tensor& out_b, Tensor* weights_out) {
    if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3)
        throw DimensionError("attention: q/k/v must be [B, N, K], got " + shape_str(q.shape()));
    const size_t b = q.dim(0), n = q.dim(1), dim = q.dim(2);
    if (n_heads == 0 || dim % n_heads)
        throw DimensionError("attention: dim " + std::to_string(dim) + " not divisible by " +
                             std::to_string(n_heads) + " heads");
    const size_t d_head = dim / n_heads;

    auto split_heads = [&](const Tensor& t) {
        return transpose_axes(reshape(t, {b, n, n_heads, d_head}), {0, 2, 1, 3});
    };
    Tensor qh = split_heads(q);  // [B, H, N, d]
    Tensor kh = split_heads(k);
    Tensor vh = split_heads(v);

    Tensor scores = scale(matmul(qh, transpose_axes(kh, {0, 1, 3, 2})),
                          1.0 / std::sqrt(static_cast<double>(d_head)));
    Tensor attn = softmax(scores, 3);  // rows over keys sum to 1
    if (weights_out) *weights_out = attn;
    Tensor ctx = matmul(attn, vh);                               // [B, H, N, d]
    Tensor merged = reshape(transpose_axes(ctx, {0, 2, 1, 3}), {b, n, dim});
    return linear(merged, out_w, out_b);
}

Tensor encoder_layer(const Tensor& x, const LayerParams& p) {
    Tensor h = layer_norm(x, p.ln1_gain, p.ln1_bias, kLayerNormEps);
    Tensor q = linear(h, p.wq, p.bq);
    Tensor k = linear(h, p.wk, p.bk);
    Tensor v = linear(h, p.wv, p.bv);
    Tensor y = add(multi_head_attention(q, k, v, p.n_heads, p.wo, p.bo), x);
    Tensor h2 = layer_norm(y, p.ln2_gain, p.ln2_bias, kLayerNormEps);
    Tensor m = linear(gelu(linear(h2, p.mlp_w1, p.mlp_b1)), p.mlp_w2, p.mlp_b2);
    return add(m, y);
}

Tensor run_layers(const Tensor& x, const std::vector<LayerParams>& layers) {
    Tensor out = x;
    for (const auto& layer : layers) out = encoder_layer(out, layer);
    return out;
}

Tensor swap_grid_axes(const Tensor& grid) {
    if (grid.ndim() != 3)
        throw DimensionError("swap_grid_axes: expected [A, B, K], got " + shape_str(grid.shape()));
    return transpose_axes(grid, {1, 0, 2});
}

Tensor st_then_tt(const Tensor& grid, const TransformerStack& stack) {
    Tensor x = add(grid, stack.pos_spatial);      // [n_t, S, K] + [S, K]
    x = run_layers(x, stack.spatial_layers);
    x = swap_grid_axes(x);                        // [S, n_t, K]
    x = add(x, stack.pos_temporal);               // + [n_t, K]
    x = run_layers(x, stack.temporal_layers);
    return swap_grid_axes(x);
}

Tensor tt_then_st(const Tensor& grid, const TransformerStack& stack) {
    Tensor x = swap_grid_axes(grid);              // [S, n_t, K]
    x = add(x, stack.pos_temporal);
    x = run_layers(x, stack.temporal_layers);
    x = swap_grid_axes(x);                        // [n_t, S, K]
    x = add(x, stack.pos_spatial);
    return run_layers(x, stack.spatial_layers);
}

}  // namespace vjscc
