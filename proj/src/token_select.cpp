#include "vjscc/token_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vjscc {

size_t kept_count_for(double gamma, size_t m) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ConfigError("token keep ratio must lie in (0, 1], got " + std::to_string(gamma));
    const auto k = static_cast<size_t>(std::ceil(gamma * static_cast<double>(m)));
    return std::clamp<size_t>(k, 1, m);
}

std::pair<Tensor, Tensor> split_features(const Tensor& s, const SelectorParams& p) {
    if (s.ndim() != 3)
        throw DimensionError("split_features: expected [n_t, S, K], got " + shape_str(s.shape()));
    Tensor local = linear(gelu(linear(s, p.split_w1, p.split_b1)), p.split_w2, p.split_b2);
    Tensor global = mean_axis(local, 1);  // [n_t, 1, K']
    return {local, global};
}

Tensor score_tokens(const Tensor& local, const Tensor& global, const SelectorParams& p) {
    if (local.ndim() != 3 || global.ndim() != 3 || global.dim(1) != 1 ||
        local.dim(0) != global.dim(0) || local.dim(2) != global.dim(2))
        throw DimensionError("score_tokens: local " + shape_str(local.shape()) + " and global " +
                             shape_str(global.shape()) + " are inconsistent");
    Tensor spread = broadcast_axis(global, 1, local.dim(1));
    Tensor combined = concat(local, spread, 2);  // [n_t, S, K]
    Tensor raw = linear(gelu(linear(combined, p.score_w1, p.score_b1)), p.score_w2, p.score_b2);
    return sigmoid(raw);  // per-token keep probability in (0, 1)
}

SelectionResult select(const Tensor& s_tokens, const std::vector<double>& keep_probs,
                       double gamma) {
    const size_t m = s_tokens.dim(0);
    if (keep_probs.size() != m)
        throw DimensionError("select: " + std::to_string(keep_probs.size()) +
                             " scores for " + std::to_string(m) + " tokens");
    const size_t k = kept_count_for(gamma, m);

    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (keep_probs[a] != keep_probs[b]) return keep_probs[a] > keep_probs[b];
        return a < b;  // ties to the lower token index
    });

    SelectionResult res;
    res.gamma = gamma;
    res.keep_probs = keep_probs;
    res.mask.assign(m, 0);
    for (size_t r = 0; r < k; ++r) res.mask[order[r]] = 1;
    res.kept_indices.reserve(k);
    for (size_t i = 0; i < m; ++i)
        if (res.mask[i]) res.kept_indices.push_back(i);

    const size_t row = s_tokens.numel() / m;
    res.kept_tokens.resize(k * row);
    for (size_t r = 0; r < k; ++r)
        std::copy_n(s_tokens.values().data() + res.kept_indices[r] * row, row,
                    res.kept_tokens.data() + r * row);
    return res;
}

SelectionResult identity_selection(const Tensor& s_tokens) {
    const size_t m = s_tokens.dim(0);
    SelectionResult res;
    res.gamma = 1.0;
    res.mask.assign(m, 1);
    res.kept_indices.resize(m);
    std::iota(res.kept_indices.begin(), res.kept_indices.end(), 0);
    res.keep_probs.assign(m, 1.0);
    res.kept_tokens = s_tokens.values();
    return res;
}

Tensor straight_through_mask(const Tensor& s, const std::vector<uint8_t>& mask,
                             const Tensor& keep_probs) {
    const size_t m = s.dim(0);
    if (mask.size() != m)
        throw DimensionError("straight_through_mask: mask length " + std::to_string(mask.size()) +
                             " vs " + std::to_string(m) + " tokens");
    std::vector<double> coeff(m);
    for (size_t i = 0; i < m; ++i) coeff[i] = mask[i] ? 1.0 : 0.0;
    std::vector<size_t> coeff_shape(s.ndim(), 1);
    coeff_shape[0] = m;
    Tensor hard = Tensor::from_data(coeff_shape, std::move(coeff));
    if (!keep_probs.defined()) return mul(s, hard);
    if (keep_probs.numel() != m)
        throw DimensionError("straight_through_mask: keep_probs size " +
                             std::to_string(keep_probs.numel()) + " vs " + std::to_string(m) +
                             " tokens");
    // value is exactly s*mask since the residual term cancels elementwise;
    // the probability head still receives useful gradient through it
    Tensor probs = reshape(keep_probs, coeff_shape);
    Tensor soft = add(hard, sub(probs, detach(probs)));
    return mul(s, soft);
}

std::vector<uint8_t> serialize_mask(const std::vector<uint8_t>& mask) {
    std::vector<uint8_t> bytes((mask.size() + 7) / 8, 0);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) bytes[i / 8] |= static_cast<uint8_t>(0x80u >> (i % 8));
    return bytes;
}

std::vector<uint8_t> deserialize_mask(const std::vector<uint8_t>& bytes, size_t m) {
    if (bytes.size() != (m + 7) / 8)
        throw DimensionError("deserialize_mask: " + std::to_string(bytes.size()) + " bytes for " +
                             std::to_string(m) + " mask bits");
    std::vector<uint8_t> mask(m, 0);
    for (size_t i = 0; i < m; ++i)
        mask[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
    return mask;
}

}  // namespace vjscc
