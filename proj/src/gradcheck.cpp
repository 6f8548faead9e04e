#include "vjscc/gradcheck.hpp"

#include <cmath>

#include "vjscc/training.hpp"

namespace vjscc {

namespace {

Tensor random_leaf(std::vector<size_t> shape, Rng& rng, bool requires_grad = true) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (auto& v : data) v = rng.normal();
    Tensor t = Tensor::from_data(std::move(shape), std::move(data));
    t.set_requires_grad(requires_grad);
    return t;
}

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
}

}  // namespace

double max_rel_err_for(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                       std::vector<Tensor> inputs, uint64_t seed) {
    Tensor probe = op(inputs);
    std::vector<double> r(probe.numel());
    Rng rng(mix64(seed, 0x72616e64ULL));
    for (auto& v : r) v = rng.normal();
    const Tensor r_const = Tensor::from_data(probe.shape(), r);

    auto loss_value = [&]() { return sum_all(mul(op(inputs), r_const)).item(); };

    Tensor loss = sum_all(mul(probe, r_const));
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& in : inputs) analytic.push_back(in.grad());

    double worst = 0.0;
    for (size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t].requires_grad()) continue;
        auto& data = inputs[t].values();
        for (size_t j = 0; j < data.size(); ++j) {
            const double keep = data[j];
            data[j] = keep + kFdStep;
            const double up = loss_value();
            data[j] = keep - kFdStep;
            const double down = loss_value();
            data[j] = keep;
            const double fd = (up - down) / (2.0 * kFdStep);
            worst = std::max(worst, rel_err(analytic[t][j], fd));
        }
    }
    return worst;
}

GradCheckReport check_primitives(uint64_t seed, double tol, bool corrupt_hook) {
    GradCheckReport report;
    Rng rng(seed);
    auto add_entry = [&](const std::string& name, double err) {
        report.entries.push_back({name, err, tol, err < tol});
    };

    add_entry("add", max_rel_err_for([](const std::vector<Tensor>& in) { return add(in[0], in[1]); },
                                     {random_leaf({3, 4}, rng), random_leaf({3, 4}, rng)}, seed));
    add_entry("add_broadcast",
              max_rel_err_for([](const std::vector<Tensor>& in) { return add(in[0], in[1]); },
                              {random_leaf({2, 3, 4}, rng), random_leaf({3, 4}, rng)}, seed));
    add_entry("sub", max_rel_err_for([](const std::vector<Tensor>& in) { return sub(in[0], in[1]); },
                                     {random_leaf({4, 3}, rng), random_leaf({4, 3}, rng)}, seed));
    add_entry("mul", max_rel_err_for([](const std::vector<Tensor>& in) { return mul(in[0], in[1]); },
                                     {random_leaf({3, 5}, rng), random_leaf({3, 5}, rng)}, seed));
    add_entry("mul_broadcast",
              max_rel_err_for([](const std::vector<Tensor>& in) { return mul(in[0], in[1]); },
                              {random_leaf({5, 3}, rng), random_leaf({5, 1}, rng)}, seed));
    add_entry("scale",
              max_rel_err_for([](const std::vector<Tensor>& in) { return scale(in[0], -1.7); },
                              {random_leaf({2, 6}, rng)}, seed));
    add_entry("matmul",
              max_rel_err_for([](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                              {random_leaf({4, 5}, rng), random_leaf({5, 3}, rng)}, seed));
    add_entry("matmul_batched",
              max_rel_err_for([](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                              {random_leaf({2, 3, 4, 5}, rng), random_leaf({2, 3, 5, 2}, rng)},
                              seed));
    add_entry("matmul_shared_rhs",
              max_rel_err_for([](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
                              {random_leaf({3, 4, 5}, rng), random_leaf({5, 2}, rng)}, seed));
    add_entry("linear",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return linear(in[0], in[1], in[2]); },
                  {random_leaf({2, 3, 5}, rng), random_leaf({5, 4}, rng), random_leaf({4}, rng)},
                  seed));
    add_entry("softmax",
              max_rel_err_for([](const std::vector<Tensor>& in) { return softmax(in[0], 1); },
                              {random_leaf({3, 4, 2}, rng)}, seed));
    add_entry("layer_norm",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) {
                      return layer_norm(in[0], in[1], in[2], kLayerNormEps);
                  },
                  {random_leaf({4, 6}, rng), random_leaf({6}, rng), random_leaf({6}, rng)}, seed));
    add_entry("gelu", max_rel_err_for([](const std::vector<Tensor>& in) { return gelu(in[0]); },
                                      {random_leaf({3, 7}, rng)}, seed));
    add_entry("sigmoid",
              max_rel_err_for([](const std::vector<Tensor>& in) { return sigmoid(in[0]); },
                              {random_leaf({3, 7}, rng)}, seed));
    add_entry("sum_all", max_rel_err_for([](const std::vector<Tensor>& in) { return sum_all(in[0]); },
                                         {random_leaf({2, 3, 2}, rng)}, seed));
    add_entry("mean_all",
              max_rel_err_for([](const std::vector<Tensor>& in) { return mean_all(in[0]); },
                              {random_leaf({4, 5}, rng)}, seed));
    add_entry("mean_axis",
              max_rel_err_for([](const std::vector<Tensor>& in) { return mean_axis(in[0], 1); },
                              {random_leaf({3, 5, 2}, rng)}, seed));
    add_entry("reshape",
              max_rel_err_for([](const std::vector<Tensor>& in) { return reshape(in[0], {6, 2}); },
                              {random_leaf({3, 4}, rng)}, seed));
    add_entry("transpose_axes",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return transpose_axes(in[0], {2, 0, 1}); },
                  {random_leaf({2, 3, 4}, rng)}, seed));
    add_entry("concat",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return concat(in[0], in[1], 1); },
                  {random_leaf({2, 3, 2}, rng), random_leaf({2, 2, 2}, rng)}, seed));
    add_entry("broadcast_axis",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return broadcast_axis(in[0], 1, 5); },
                  {random_leaf({3, 1, 2}, rng)}, seed));
    add_entry("slice",
              max_rel_err_for([](const std::vector<Tensor>& in) { return slice(in[0], 1, 1, 4); },
                              {random_leaf({2, 5, 3}, rng)}, seed));
    add_entry("gather",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return gather(in[0], {3, 0, 3, 1}); },
                  {random_leaf({5, 4}, rng)}, seed));
    add_entry("scatter_zeros",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return scatter_zeros(in[0], {4, 1, 2}, 6); },
                  {random_leaf({3, 4}, rng)}, seed));
    {
        const std::vector<size_t> perm{5, 2, 0, 4, 1, 3};
        add_entry("apply_permutation",
                  max_rel_err_for(
                      [perm](const std::vector<Tensor>& in) {
                          return apply_permutation(in[0], perm, {6});
                      },
                      {random_leaf({6}, rng)}, seed));
    }
    add_entry("power_normalize",
              max_rel_err_for(
                  [](const std::vector<Tensor>& in) { return power_normalize(in[0], 4); },
                  {random_leaf({8}, rng)}, seed));
    {
        // STE value path: gradient w.r.t. the token grid equals the hard mask
        const std::vector<uint8_t> mask{1, 0, 1, 1, 0};
        add_entry("straight_through_mask_tokens",
                  max_rel_err_for(
                      [mask](const std::vector<Tensor>& in) {
                          return straight_through_mask(in[0], mask);
                      },
                      {random_leaf({5, 3}, rng)}, seed));
    }
    {
        // full pre-norm block at toy dims: K=8, N=6, 2 heads
        Rng lrng(mix64(seed, 0x6c61796572ULL));
        const size_t k = 8, hidden = 32;
        LayerParams p;
        p.n_heads = 2;
        p.ln1_gain = random_leaf({k}, lrng);
        p.ln1_bias = random_leaf({k}, lrng);
        p.wq = random_leaf({k, k}, lrng);
        p.bq = random_leaf({k}, lrng);
        p.wk = random_leaf({k, k}, lrng);
        p.bk = random_leaf({k}, lrng);
        p.wv = random_leaf({k, k}, lrng);
        p.bv = random_leaf({k}, lrng);
        p.wo = random_leaf({k, k}, lrng);
        p.bo = random_leaf({k}, lrng);
        p.ln2_gain = random_leaf({k}, lrng);
        p.ln2_bias = random_leaf({k}, lrng);
        p.mlp_w1 = random_leaf({k, hidden}, lrng);
        p.mlp_b1 = random_leaf({hidden}, lrng);
        p.mlp_w2 = random_leaf({hidden, k}, lrng);
        p.mlp_b2 = random_leaf({k}, lrng);
        // weights scaled down so the softmax stays in a well-conditioned range
        for (Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wo, &p.mlp_w1, &p.mlp_w2})
            for (auto& v : w->values()) v *= 0.3;
        add_entry("encoder_layer",
                  max_rel_err_for(
                      [p](const std::vector<Tensor>& in) { return encoder_layer(in[0], p); },
                      {random_leaf({1, 6, k}, lrng)}, seed));
    }

    if (corrupt_hook && !report.entries.empty()) {
        // deliberately break one result so callers can verify failure handling
        auto& victim = report.entries.front();
        victim.max_rel_err += 1.0;
        victim.pass = false;
        victim.name += " (corrupted by test hook)";
    }
    return report;
}

GradCheckEntry check_pipeline(const PipelineConfig& cfg, size_t n_samples, uint64_t seed,
                              double tol) {
    Model model(cfg, seed);
    SyntheticClip synth = synthesize_clip(mix64(seed, 0x636c6970ULL), cfg.t_frames, cfg.channels,
                                          cfg.height, cfg.width, "moving_square");
    const Tensor clip = Model::clip_to_tensor(synth.clip);
    const uint64_t noise_seed = mix64(seed, 0x6e6f697365ULL);
    const double snr_db = 7.0;

    auto loss_value = [&]() {
        RoundtripResult rt = model.roundtrip(clip, snr_db, noise_seed, cfg.gamma);
        return mse_loss(clip, rt.reconstruction).item();
    };

    RoundtripResult rt = model.roundtrip(clip, snr_db, noise_seed, cfg.gamma);
    Tensor loss = mse_loss(clip, rt.reconstruction);
    backward(loss);

    const auto& items = model.params().items();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(items.size());
    for (const auto& [name, p] : items) analytic.push_back(p.grad());

    Rng rng(mix64(seed, 0x73616d706cULL));
    double worst = 0.0;
    const bool cover_all = n_samples >= items.size();
    for (size_t s = 0; s < n_samples; ++s) {
        const size_t t = cover_all && s < items.size() ? s : rng.integer(items.size());
        Tensor p = items[t].second;
        const size_t j = rng.integer(p.numel());
        auto& data = p.values();
        const double keep = data[j];
        data[j] = keep + kFdStep;
        const double up = loss_value();
        data[j] = keep - kFdStep;
        const double down = loss_value();
        data[j] = keep;
        const double fd = (up - down) / (2.0 * kFdStep);
        worst = std::max(worst, std::abs(analytic[t][j] - fd) / std::max(1.0, std::abs(fd)));
    }
    return {"pipeline_roundtrip", worst, tol, worst < tol};
}

}  // namespace vjscc
