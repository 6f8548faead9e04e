#pragma once

#include <vector>

#include "vjscc/video_io.hpp"

namespace vjscc {

struct MetricReport {
    double psnr_db = 0.0;   // mean over frames
    double ms_ssim = 0.0;   // mean over frames
    std::vector<double> frame_psnr_db;
    std::vector<double> frame_ms_ssim;
};

inline constexpr double kPsnrCapDb = 100.0;

// 10*log10(max^2/mse), capped at kPsnrCapDb (zero MSE hits the cap).
double psnr_from_mse(double mse, double max_val);

// Elementwise PSNR over two equal-length buffers.
double psnr(const std::vector<double>& x, const std::vector<double>& xhat, double max_val);

// Plain single-scale SSIM over one plane: Gaussian window 11, sigma 1.5,
// valid positions only, k1 = 0.01, k2 = 0.03.
double ssim_plane(const double* a, const double* b, size_t h, size_t w, double max_val);

// Multiscale SSIM: contrast/structure means per scale combined with the
// standard exponent weights, luminance applied at the coarsest scale, 2x2
// mean pooling between scales. scales = 0 selects the largest feasible count
// (at most 5); explicit requests are reduced to what the plane supports.
// Per-scale means are clamped at zero so the result stays in [0, 1].
double ms_ssim_plane(const double* a, const double* b, size_t h, size_t w, double max_val,
                     size_t scales = 0);

// Frame-level metrics: computed per channel and averaged.
double psnr_frame(const VideoClip& x, const VideoClip& xhat, size_t t, double max_val = 1.0);
double ms_ssim_frame(const VideoClip& x, const VideoClip& xhat, size_t t, size_t scales = 0);

// Per-frame metrics plus their means over the clip.
MetricReport clip_metrics(const VideoClip& x, const VideoClip& xhat);

}  // namespace vjscc
