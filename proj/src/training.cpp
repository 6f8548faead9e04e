#include "vjscc/training.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace vjscc {

void AdamState::init(const ParamStore& params) {
    step = 0;
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i) {
        m[i].assign(params.items()[i].second.numel(), 0.0);
        v[i].assign(params.items()[i].second.numel(), 0.0);
    }
}

void adam_update(ParamStore& params, AdamState& state, double learning_rate) {
    if (state.m.size() != params.size())
        throw DimensionError("adam_update: state tracks " + std::to_string(state.m.size()) +
                             " parameters, store has " + std::to_string(params.size()));
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor tensor = params.items()[i].second;  // shared handle
        const auto grad = tensor.grad();
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        auto& values = tensor.values();
        for (size_t j = 0; j < values.size(); ++j) {
            mi[j] = state.beta1 * mi[j] + (1.0 - state.beta1) * grad[j];
            vi[j] = state.beta2 * vi[j] + (1.0 - state.beta2) * grad[j] * grad[j];
            const double m_hat = mi[j] / bc1;
            const double v_hat = vi[j] / bc2;
            values[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

Tensor mse_loss(const Tensor& x, const Tensor& xhat) {
    if (x.shape() != xhat.shape())
        throw DimensionError("mse_loss: shapes " + shape_str(x.shape()) + " and " +
                             shape_str(xhat.shape()) + " differ");
    Tensor d = sub(x, xhat);
    return mean_all(mul(d, d));
}

StepResult train_step(Model& model, const std::vector<const VideoClip*>& batch, AdamState& state,
                      const TrainConfig& cfg) {
    cfg.validate();
    if (batch.empty()) throw DimensionError("train_step: empty batch");
    const size_t step = state.step;
    StepResult result;
    result.snr_db = cfg.noiseless
                        ? std::numeric_limits<double>::infinity()
                        : cfg.snr_set_db[mix64(cfg.seed, 0x736e72ULL, step) % cfg.snr_set_db.size()];

    Tensor total;
    for (size_t i = 0; i < batch.size(); ++i) {
        Tensor clip = Model::clip_to_tensor(*batch[i]);
        const uint64_t noise_seed = mix64(cfg.seed, step, i);
        RoundtripResult rt = model.roundtrip(clip, result.snr_db, noise_seed, cfg.gamma);
        Tensor loss = mse_loss(clip, rt.reconstruction);
        total = total.defined() ? add(total, loss) : loss;
    }
    Tensor mean_batch_loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    backward(mean_batch_loss);
    adam_update(model.params(), state, cfg.learning_rate);
    result.loss = mean_batch_loss.item();
    return result;
}

std::vector<size_t> batch_indices(uint64_t seed, size_t step, size_t batch_size, size_t pool) {
    if (pool == 0) throw DimensionError("batch_indices: empty clip pool");
    std::vector<size_t> idx(batch_size);
    for (size_t i = 0; i < batch_size; ++i)
        idx[i] = mix64(seed, 0x6261746368ULL, step * batch_size + i) % pool;
    return idx;
}

uint64_t clip_content_hash(const VideoClip& clip) {
    uint64_t h = 1469598103934665603ULL;
    auto absorb = [&h](uint64_t v) {
        for (int s = 0; s < 64; s += 8) {
            h ^= (v >> s) & 0xffu;
            h *= 1099511628211ULL;
        }
    };
    absorb(clip.t_frames);
    absorb(clip.channels);
    absorb(clip.height);
    absorb(clip.width);
    for (double d : clip.data) {
        uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        absorb(bits);
    }
    return h;
}

std::vector<EvalRow> evaluate(const Model& model, const std::vector<VideoClip>& clips,
                              const std::vector<double>& snr_list, double gamma,
                              uint64_t eval_seed) {
    std::vector<EvalRow> rows;
    rows.reserve(clips.size() * snr_list.size());
    const ClipDims dims = model.config().clip_dims();
    for (size_t ci = 0; ci < clips.size(); ++ci) {
        const uint64_t content = clip_content_hash(clips[ci]);
        Tensor clip = Model::clip_to_tensor(clips[ci]);
        for (double snr : snr_list) {
            uint64_t snr_bits;
            std::memcpy(&snr_bits, &snr, sizeof(snr_bits));
            const uint64_t seed = mix64(eval_seed, content, snr_bits);
            RoundtripResult rt = model.roundtrip(clip, snr, seed, gamma);
            VideoClip recon = Model::tensor_to_clip(rt.reconstruction, dims);
            MetricReport metrics = clip_metrics(clips[ci], recon);
            rows.push_back({ci, snr, metrics.psnr_db, metrics.ms_ssim, rt.enc.rate.cbr});
        }
    }
    return rows;
}

}  // namespace vjscc
