#pragma once

#include "vjscc/st_transformer.hpp"
#include "vjscc/tubelet.hpp"

namespace vjscc {

// Affine maps for patch merging (4K -> 2K) and its reverse (2K -> 4K).
struct MergeParams {
    Tensor merge_w, merge_b;
    Tensor reverse_w, reverse_b;
};

// Flat index map grouping each 2x2 spatial neighborhood into one token:
// [n_t, n_h*n_w, K] -> [n_t, (n_h/2)*(n_w/2), 4K], neighbors concatenated in
// row-major order over the block.
std::vector<size_t> neighbor_group_map(size_t n_t, size_t n_h, size_t n_w, size_t k_dim);

// [n_t, S, K] -> [n_t, S/4, 2K]; throws on odd n_h or n_w.
TokenGrid patch_merge(const TokenGrid& f, const MergeParams& p);

// [n_t, S/4, 2K] -> [n_t, S, K]; target extents taken from (n_h, n_w).
TokenGrid patch_reverse_merge(const TokenGrid& f_down, const MergeParams& p, size_t n_h,
                              size_t n_w);

// Shared stem, then an identity branch and a merge -> stack -> reverse branch,
// averaged elementwise. The down branch runs at dimension 2K.
TokenGrid two_branch_encode(const TokenGrid& z, const TransformerStack& stem,
                            const TransformerStack& down_branch, const MergeParams& merge);

// Decoder mirror using tt_then_st stacks.
TokenGrid two_branch_decode(const TokenGrid& z, const TransformerStack& stem,
                            const TransformerStack& down_branch, const MergeParams& merge);

}  // namespace vjscc
