#include "vjscc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vjscc/errors.hpp"

namespace vjscc {

namespace {

constexpr size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kScaleWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

const std::vector<double>& gaussian_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(kWindow);
        double sum = 0.0;
        for (size_t i = 0; i < kWindow; ++i) {
            const double d = static_cast<double>(i) - (kWindow - 1) / 2.0;
            t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += t[i];
        }
        for (auto& v : t) v /= sum;
        return t;
    }();
    return taps;
}

// Valid-region separable Gaussian filter: [h, w] -> [h-10, w-10].
std::vector<double> gauss_filter(const std::vector<double>& img, size_t h, size_t w) {
    const auto& taps = gaussian_taps();
    const size_t wh = h, ww = w - kWindow + 1;
    std::vector<double> rows(wh * ww, 0.0);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < ww; ++x) {
            double acc = 0.0;
            for (size_t i = 0; i < kWindow; ++i) acc += taps[i] * img[y * w + x + i];
            rows[y * ww + x] = acc;
        }
    const size_t oh = h - kWindow + 1;
    std::vector<double> out(oh * ww, 0.0);
    for (size_t y = 0; y < oh; ++y)
        for (size_t x = 0; x < ww; ++x) {
            double acc = 0.0;
            for (size_t i = 0; i < kWindow; ++i) acc += taps[i] * rows[(y + i) * ww + x];
            out[y * ww + x] = acc;
        }
    return out;
}

std::vector<double> downsample2(const std::vector<double>& img, size_t h, size_t w, size_t& oh,
                                size_t& ow) {
    oh = h / 2;
    ow = w / 2;
    std::vector<double> out(oh * ow);
    for (size_t y = 0; y < oh; ++y)
        for (size_t x = 0; x < ow; ++x)
            out[y * ow + x] = 0.25 * (img[(2 * y) * w + 2 * x] + img[(2 * y) * w + 2 * x + 1] +
                                      img[(2 * y + 1) * w + 2 * x] + img[(2 * y + 1) * w + 2 * x + 1]);
    return out;
}

// Mean luminance*cs (full SSIM) and mean cs over all valid windows.
void ssim_means(const std::vector<double>& a, const std::vector<double>& b, size_t h, size_t w,
                double max_val, double& mean_ssim, double& mean_cs) {
    const double c1 = kK1 * max_val * kK1 * max_val;
    const double c2 = kK2 * max_val * kK2 * max_val;
    std::vector<double> a2(a.size()), b2(a.size()), ab(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto mu1 = gauss_filter(a, h, w);
    const auto mu2 = gauss_filter(b, h, w);
    const auto raw_s11 = gauss_filter(a2, h, w);
    const auto raw_s22 = gauss_filter(b2, h, w);
    const auto raw_s12 = gauss_filter(ab, h, w);
    double sum_ssim = 0.0, sum_cs = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double s11 = raw_s11[i] - m1 * m1;
        const double s22 = raw_s22[i] - m2 * m2;
        const double s12 = raw_s12[i] - m1 * m2;
        const double lum = (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
        const double cs = (2.0 * s12 + c2) / (s11 + s22 + c2);
        sum_ssim += lum * cs;
        sum_cs += cs;
    }
    mean_ssim = sum_ssim / static_cast<double>(mu1.size());
    mean_cs = sum_cs / static_cast<double>(mu1.size());
}

size_t feasible_scales(size_t h, size_t w) {
    size_t count = 0;
    while (count < 5 && std::min(h, w) >= kWindow) {
        ++count;
        h /= 2;
        w /= 2;
    }
    return count;
}

}  // namespace

double psnr_from_mse(double mse, double max_val) {
    if (max_val <= 0.0) throw DimensionError("psnr: max_val must be positive");
    if (mse <= 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(max_val * max_val / mse));
}

double psnr(const std::vector<double>& x, const std::vector<double>& xhat, double max_val) {
    if (x.size() != xhat.size() || x.empty())
        throw DimensionError("psnr: buffers of " + std::to_string(x.size()) + " and " +
                             std::to_string(xhat.size()) + " values");
    double mse = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - xhat[i];
        mse += d * d;
    }
    return psnr_from_mse(mse / static_cast<double>(x.size()), max_val);
}

double ssim_plane(const double* a, const double* b, size_t h, size_t w, double max_val) {
    if (h < kWindow || w < kWindow)
        throw DimensionError("ssim: plane " + std::to_string(h) + "x" + std::to_string(w) +
                             " smaller than the 11x11 window");
    std::vector<double> va(a, a + h * w), vb(b, b + h * w);
    double mean_ssim = 0.0, mean_cs = 0.0;
    ssim_means(va, vb, h, w, max_val, mean_ssim, mean_cs);
    return mean_ssim;
}

double ms_ssim_plane(const double* a, const double* b, size_t h, size_t w, double max_val,
                     size_t scales) {
    const size_t max_scales = feasible_scales(h, w);
    if (max_scales == 0)
        throw DimensionError("ms_ssim: plane " + std::to_string(h) + "x" + std::to_string(w) +
                             " too small for a single 11x11 scale");
    const size_t used = scales == 0 ? max_scales : std::min(scales, max_scales);
    double weight_sum = 0.0;
    for (size_t s = 0; s < used; ++s) weight_sum += kScaleWeights[s];

    std::vector<double> va(a, a + h * w), vb(b, b + h * w);
    double result = 1.0;
    size_t ch = h, cw = w;
    for (size_t s = 0; s < used; ++s) {
        double mean_ssim = 0.0, mean_cs = 0.0;
        ssim_means(va, vb, ch, cw, max_val, mean_ssim, mean_cs);
        const double weight = kScaleWeights[s] / weight_sum;
        const double term = s + 1 == used ? std::max(mean_ssim, 0.0) : std::max(mean_cs, 0.0);
        result *= std::pow(term, weight);
        if (s + 1 < used) {
            size_t nh = 0, nw = 0;
            va = downsample2(va, ch, cw, nh, nw);
            vb = downsample2(vb, ch, cw, nh, nw);
            ch = nh;
            cw = nw;
        }
    }
    return result;
}

namespace {

void check_same_dims(const VideoClip& x, const VideoClip& xhat) {
    if (x.t_frames != xhat.t_frames || x.channels != xhat.channels || x.height != xhat.height ||
        x.width != xhat.width)
        throw DimensionError("metrics: clip dims differ");
}

}  // namespace

double psnr_frame(const VideoClip& x, const VideoClip& xhat, size_t t, double max_val) {
    check_same_dims(x, xhat);
    const size_t plane = x.height * x.width;
    double acc = 0.0;
    for (size_t c = 0; c < x.channels; ++c) {
        double mse = 0.0;
        const size_t base = x.flat(t, c, 0, 0);
        for (size_t i = 0; i < plane; ++i) {
            const double d = x.data[base + i] - xhat.data[base + i];
            mse += d * d;
        }
        acc += psnr_from_mse(mse / static_cast<double>(plane), max_val);
    }
    return acc / static_cast<double>(x.channels);
}

double ms_ssim_frame(const VideoClip& x, const VideoClip& xhat, size_t t, size_t scales) {
    check_same_dims(x, xhat);
    double acc = 0.0;
    for (size_t c = 0; c < x.channels; ++c)
        acc += ms_ssim_plane(x.data.data() + x.flat(t, c, 0, 0),
                             xhat.data.data() + x.flat(t, c, 0, 0), x.height, x.width, 1.0, scales);
    return acc / static_cast<double>(x.channels);
}

MetricReport clip_metrics(const VideoClip& x, const VideoClip& xhat) {
    check_same_dims(x, xhat);
    MetricReport report;
    report.frame_psnr_db.resize(x.t_frames);
    report.frame_ms_ssim.resize(x.t_frames);
    for (size_t t = 0; t < x.t_frames; ++t) {
        report.frame_psnr_db[t] = psnr_frame(x, xhat, t);
        report.frame_ms_ssim[t] = ms_ssim_frame(x, xhat, t);
        report.psnr_db += report.frame_psnr_db[t];
        report.ms_ssim += report.frame_ms_ssim[t];
    }
    report.psnr_db /= static_cast<double>(x.t_frames);
    report.ms_ssim /= static_cast<double>(x.t_frames);
    return report;
}

}  // namespace vjscc
