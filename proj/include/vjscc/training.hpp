#pragma once

#include <cstdint>
#include <vector>

#include "vjscc/codec_pipeline.hpp"
#include "vjscc/metrics.hpp"

namespace vjscc {

struct TrainConfig {
    double learning_rate = 1e-4;
    size_t batch_size = 2;
    std::vector<double> snr_set_db{1, 4, 7, 10, 13};
    size_t steps = 1000;
    uint64_t seed = 0;
    double gamma = 0.8;
    size_t eval_every = 500;
    bool noiseless = false;  // bypasses channel noise entirely

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (snr_set_db.empty() && !noiseless)
            throw ConfigError("snr_set_db must be nonempty unless training noiseless");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
    }
};

// Bias-corrected Adam; moment arrays are parallel to the parameter store.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    size_t step = 0;
    std::vector<std::vector<double>> m, v;

    void init(const ParamStore& params);
};

void adam_update(ParamStore& params, AdamState& state, double learning_rate);

// Mean of squared differences over all elements.
Tensor mse_loss(const Tensor& x, const Tensor& xhat);

struct StepResult {
    double loss = 0.0;
    double snr_db = 0.0;
};

// One optimization step: samples one SNR for the step, round-trips every clip
// in the batch at gamma = cfg.gamma, backpropagates the mean loss and applies
// Adam. Deterministic in (cfg.seed, state.step).
StepResult train_step(Model& model, const std::vector<const VideoClip*>& batch, AdamState& state,
                      const TrainConfig& cfg);

// Deterministic batch assembly for a step: indices into the clip pool.
std::vector<size_t> batch_indices(uint64_t seed, size_t step, size_t batch_size, size_t pool);

struct EvalRow {
    size_t clip_index = 0;
    double snr_db = 0.0;
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
    double cbr = 0.0;
};

// Per-(clip, SNR) metrics with fixed evaluation noise seeds. The seed is
// derived from the clip contents, so duplicate clips yield identical rows.
std::vector<EvalRow> evaluate(const Model& model, const std::vector<VideoClip>& clips,
                              const std::vector<double>& snr_list, double gamma,
                              uint64_t eval_seed = 0);

uint64_t clip_content_hash(const VideoClip& clip);

}  // namespace vjscc
