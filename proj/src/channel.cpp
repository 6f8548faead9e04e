#include "vjscc/channel.hpp"

#include <cmath>
#include <limits>

#include "vjscc/rng.hpp"
#include "vjscc/token_select.hpp"

namespace vjscc {

double noise_power(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}

std::vector<std::complex<double>> pair_to_complex(const std::vector<double>& reals) {
    if (reals.size() % 2)
        throw DimensionError("pair_to_complex: odd vector length " + std::to_string(reals.size()));
    std::vector<std::complex<double>> out(reals.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) out[i] = {reals[2 * i], reals[2 * i + 1]};
    return out;
}

std::vector<double> complex_to_pairs(const std::vector<std::complex<double>>& symbols) {
    std::vector<double> out(symbols.size() * 2);
    for (size_t i = 0; i < symbols.size(); ++i) {
        out[2 * i] = symbols[i].real();
        out[2 * i + 1] = symbols[i].imag();
    }
    return out;
}

Tensor power_normalize(const Tensor& x, size_t n_groups, double* scale_out) {
    if (n_groups == 0) throw DimensionError("power_normalize: zero symbol count");
    double sum_sq = 0.0;
    for (double v : x.values()) sum_sq += v * v;
    if (sum_sq == 0.0) {
        if (scale_out) *scale_out = 1.0;
        return scale(x, 1.0);
    }
    const double alpha = std::sqrt(static_cast<double>(n_groups) / sum_sq);
    if (scale_out) *scale_out = alpha;
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * alpha;
    auto xn = x.node_ptr();
    // y = alpha(x) * x with alpha = sqrt(n/S), S = sum x^2:
    // dL/dx = alpha * (g - x * <g, x> / S)
    return make_op({x}, x.shape(), std::move(out), [xn, alpha, sum_sq](detail::Node& self) {
        xn->ensure_grad();
        double dot = 0.0;
        for (size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * xn->data[i];
        const double c = dot / sum_sq;
        for (size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += alpha * (self.grad[i] - xn->data[i] * c);
    });
}

namespace {

std::vector<double> sample_noise(size_t n_reals, double snr_db, uint64_t seed) {
    const double sigma2 = noise_power(snr_db);
    std::vector<double> noise(n_reals, 0.0);
    if (sigma2 > 0.0) {
        Rng rng(seed);
        const double s = std::sqrt(sigma2 / 2.0);  // per real dimension
        for (auto& v : noise) v = s * rng.normal();
    }
    return noise;
}

}  // namespace

Tensor awgn(const Tensor& x_pairs, double snr_db, uint64_t seed) {
    if (x_pairs.numel() % 2)
        throw DimensionError("awgn: real pair vector has odd length " +
                             std::to_string(x_pairs.numel()));
    auto noise = sample_noise(x_pairs.numel(), snr_db, seed);
    return add(x_pairs, Tensor::from_data(x_pairs.shape(), std::move(noise)));
}

ChannelFrame make_channel_frame(const std::vector<double>& reals, double snr_db,
                                double norm_scale) {
    ChannelFrame frame;
    frame.symbols = pair_to_complex(reals);
    frame.snr_db = snr_db;
    frame.sigma2 = noise_power(snr_db);
    frame.norm_scale = norm_scale;
    return frame;
}

ChannelFrame awgn(const ChannelFrame& frame, double snr_db, uint64_t seed) {
    ChannelFrame out = frame;
    out.snr_db = snr_db;
    out.sigma2 = noise_power(snr_db);
    const auto noise = sample_noise(frame.symbols.size() * 2, snr_db, seed);
    for (size_t i = 0; i < out.symbols.size(); ++i)
        out.symbols[i] += std::complex<double>(noise[2 * i], noise[2 * i + 1]);
    return out;
}

RateReport rate_report(double gamma, size_t m_tokens, size_t channel_dim, size_t source_numel) {
    if (m_tokens == 0 || source_numel == 0)
        throw DimensionError("rate_report: token and source counts must be positive");
    if (channel_dim % 2)
        throw ConfigError("rate_report: channel dimension must be even, got " +
                          std::to_string(channel_dim));
    RateReport r;
    r.token_payload_symbols = kept_count_for(gamma, m_tokens) * channel_dim / 2;
    r.n_complex_symbols = r.token_payload_symbols;
    r.mask_side_info_bits = m_tokens;
    r.cbr = static_cast<double>(r.n_complex_symbols) / static_cast<double>(source_numel);
    return r;
}

}  // namespace vjscc
