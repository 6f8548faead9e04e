#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "vjscc/tensor.hpp"

namespace vjscc {

// Power-normalized complex symbol vector. The real pair layout (even index =
// real part, odd = imaginary part) is the wire convention throughout.
struct ChannelFrame {
    std::vector<std::complex<double>> symbols;
    double snr_db = 0.0;
    double sigma2 = 0.0;      // noise power per complex symbol
    double norm_scale = 1.0;  // multiplier that was applied to reach unit power
};

struct RateReport {
    size_t n_complex_symbols = 0;
    size_t token_payload_symbols = 0;
    size_t mask_side_info_bits = 0;
    double cbr = 0.0;
};

// sigma^2 = 10^(-snr_db/10) under unit signal power; +inf -> 0.
double noise_power(double snr_db);

std::vector<std::complex<double>> pair_to_complex(const std::vector<double>& reals);
std::vector<double> complex_to_pairs(const std::vector<std::complex<double>>& symbols);

// Differentiable: scales x so that sum(x^2) / n_groups == 1 (unit mean power
// over n_groups complex symbols when x is the real pair vector). The applied
// multiplier is written to scale_out when given. An all-zero input is
// returned unchanged with scale 1.
Tensor power_normalize(const Tensor& x, size_t n_groups, double* scale_out = nullptr);

// Adds complex Gaussian noise of per-symbol power sigma^2 = 10^(-snr_db/10)
// to the real pair vector (sigma^2/2 per real dimension). Deterministic in
// seed; the noise does not depend on the signal values.
Tensor awgn(const Tensor& x_pairs, double snr_db, uint64_t seed);

// Frame-level view of the same channel, for tests and reporting.
ChannelFrame make_channel_frame(const std::vector<double>& reals, double snr_db,
                                double norm_scale);
ChannelFrame awgn(const ChannelFrame& frame, double snr_db, uint64_t seed);

// n_complex_symbols = ceil(gamma*M) * c/2, cbr = n_complex_symbols / N,
// mask side information = M bits (uncompressed indicator).
RateReport rate_report(double gamma, size_t m_tokens, size_t channel_dim, size_t source_numel);

}  // namespace vjscc
