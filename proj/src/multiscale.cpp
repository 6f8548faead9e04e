#include "vjscc/multiscale.hpp"

namespace vjscc {

std::vector<size_t> neighbor_group_map(size_t n_t, size_t n_h, size_t n_w, size_t k_dim) {
    if (n_h % 2 || n_w % 2)
        throw DimensionError("patch_merge: spatial extents " + std::to_string(n_h) + "x" +
                             std::to_string(n_w) + " must be even");
    const size_t h2 = n_h / 2, w2 = n_w / 2;
    std::vector<size_t> map(n_t * n_h * n_w * k_dim);
    size_t out = 0;
    for (size_t i = 0; i < n_t; ++i)
        for (size_t mj = 0; mj < h2; ++mj)
            for (size_t mk = 0; mk < w2; ++mk)
                for (size_t chunk = 0; chunk < 4; ++chunk) {
                    const size_t dj = chunk >> 1, dk = chunk & 1;
                    const size_t src_sp = (2 * mj + dj) * n_w + (2 * mk + dk);
                    const size_t base = (i * n_h * n_w + src_sp) * k_dim;
                    for (size_t off = 0; off < k_dim; ++off) map[out++] = base + off;
                }
    return map;
}

TokenGrid patch_merge(const TokenGrid& f, const MergeParams& p) {
    const size_t k_dim = f.values.shape().back();
    if (p.merge_w.dim(0) != 4 * k_dim || p.merge_w.dim(1) != 2 * k_dim)
        throw DimensionError("patch_merge: merge map " + shape_str(p.merge_w.shape()) +
                             " must be [" + std::to_string(4 * k_dim) + "x" +
                             std::to_string(2 * k_dim) + "]");
    const auto map = neighbor_group_map(f.n_t, f.n_h, f.n_w, k_dim);
    TokenGrid out;
    out.n_t = f.n_t;
    out.n_h = f.n_h / 2;
    out.n_w = f.n_w / 2;
    Tensor grouped = apply_permutation(f.values, map, {f.n_t, out.spatial(), 4 * k_dim});
    out.values = linear(grouped, p.merge_w, p.merge_b);
    return out;
}

TokenGrid patch_reverse_merge(const TokenGrid& f_down, const MergeParams& p, size_t n_h,
                              size_t n_w) {
    const size_t k2 = f_down.values.shape().back();  // 2K
    const size_t k_dim = k2 / 2;
    if (p.reverse_w.dim(0) != k2 || p.reverse_w.dim(1) != 2 * k2)
        throw DimensionError("patch_reverse_merge: reverse map " + shape_str(p.reverse_w.shape()) +
                             " must be [" + std::to_string(k2) + "x" + std::to_string(2 * k2) +
                             "]");
    if (f_down.n_h != n_h / 2 || f_down.n_w != n_w / 2)
        throw DimensionError("patch_reverse_merge: grid " + std::to_string(f_down.n_h) + "x" +
                             std::to_string(f_down.n_w) + " does not downscale " +
                             std::to_string(n_h) + "x" + std::to_string(n_w));
    Tensor expanded = linear(f_down.values, p.reverse_w, p.reverse_b);  // [n_t, S/4, 4K]
    const auto map = neighbor_group_map(f_down.n_t, n_h, n_w, k_dim);
    TokenGrid out;
    out.n_t = f_down.n_t;
    out.n_h = n_h;
    out.n_w = n_w;
    out.values =
        apply_permutation(expanded, invert_permutation(map), {f_down.n_t, n_h * n_w, k_dim});
    return out;
}

namespace {

TokenGrid two_branch(const TokenGrid& z, const TransformerStack& stem,
                     const TransformerStack& down_branch, const MergeParams& merge,
                     bool decoder_order) {
    TokenGrid f = z;
    f.values = decoder_order ? tt_then_st(z.values, stem) : st_then_tt(z.values, stem);
    TokenGrid down = patch_merge(f, merge);
    down.values =
        decoder_order ? tt_then_st(down.values, down_branch) : st_then_tt(down.values, down_branch);
    TokenGrid up = patch_reverse_merge(down, merge, f.n_h, f.n_w);
    TokenGrid out = f;
    out.values = scale(add(f.values, up.values), 0.5);
    return out;
}

}  // namespace

TokenGrid two_branch_encode(const TokenGrid& z, const TransformerStack& stem,
                            const TransformerStack& down_branch, const MergeParams& merge) {
    return two_branch(z, stem, down_branch, merge, false);
}

TokenGrid two_branch_decode(const TokenGrid& z, const TransformerStack& stem,
                            const TransformerStack& down_branch, const MergeParams& merge) {
    return two_branch(z, stem, down_branch, merge, true);
}

}  // namespace vjscc
