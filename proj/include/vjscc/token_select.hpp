#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vjscc/tubelet.hpp"

namespace vjscc {

// Two small MLPs: the split MLP (K -> K' -> K', K' = K/2) feeding local and
// pooled global features, and the score MLP (K -> K' -> 1) over their
// concatenation.
struct SelectorParams {
    Tensor split_w1, split_b1, split_w2, split_b2;
    Tensor score_w1, score_b1, score_w2, score_b2;
};

struct SelectionResult {
    std::vector<uint8_t> mask;         // M entries in token order, 1 = kept
    std::vector<size_t> kept_indices;  // ascending token index
    std::vector<double> kept_tokens;   // row-major [kept, K] copies of the kept rows
    std::vector<double> keep_probs;    // per-token scores in (0, 1)
    double gamma = 1.0;

    size_t kept_count() const { return kept_indices.size(); }
};

// ceil(gamma * m) kept tokens; gamma must lie in (0, 1].
size_t kept_count_for(double gamma, size_t m);

// s: [n_t, S, K] -> (local [n_t, S, K'], global [n_t, 1, K']); the global row
// is the spatial average of the local rows per temporal slice.
std::pair<Tensor, Tensor> split_features(const Tensor& s, const SelectorParams& p);

// Concatenates local features with the broadcast global feature, scores each
// token with the score MLP and squashes to (0, 1) with a logistic.
Tensor score_tokens(const Tensor& local, const Tensor& global, const SelectorParams& p);

// Top-k selection over all M tokens, k = ceil(gamma*M), ties broken by lower
// token index. s_tokens is [M, K] (or any shape with leading dim M).
SelectionResult select(const Tensor& s_tokens, const std::vector<double>& keep_probs,
                       double gamma);

// All-ones selection over m tokens (gamma treated as 1.0).
SelectionResult identity_selection(const Tensor& s_tokens);

// Forward: s at kept rows, zero elsewhere. Gradient to s passes unchanged at
// kept rows and is blocked at dropped ones; keep_probs (when defined, shape
// [M, 1]) receive gradient through a residual path so the scorer trains.
Tensor straight_through_mask(const Tensor& s, const std::vector<uint8_t>& mask,
                             const Tensor& keep_probs = Tensor());

// Receiver side information: the mask as an MSB-first bitstring padded to a
// byte boundary.
std::vector<uint8_t> serialize_mask(const std::vector<uint8_t>& mask);
std::vector<uint8_t> deserialize_mask(const std::vector<uint8_t>& bytes, size_t m);

}  // namespace vjscc
