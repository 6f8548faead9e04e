#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vjscc/codec_pipeline.hpp"

namespace vjscc {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
};

// Central finite differences at step 1e-5 against the recorded backward pass;
// relative error |analytic - fd| / max(1, |fd|).
inline constexpr double kFdStep = 1e-5;

// Checks every element of every input of `op` (inputs are leaf tensors with
// requires_grad). The loss is sum(op(inputs) * r) for a fixed random r.
double max_rel_err_for(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                       std::vector<Tensor> inputs, uint64_t seed);

// Per-primitive suite, tolerance 1e-4. When corrupt_hook is set one analytic
// gradient is deliberately perturbed so the harness itself can be validated.
GradCheckReport check_primitives(uint64_t seed, double tol = 1e-4, bool corrupt_hook = false);

// End-to-end check: full roundtrip MSE at toy dims with fixed channel noise,
// sampling parameter elements round-robin over the parameter arrays.
GradCheckEntry check_pipeline(const PipelineConfig& cfg, size_t n_samples, uint64_t seed,
                              double tol = 1e-3);

}  // namespace vjscc
