#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwsr/image.hpp"

namespace nwsr {

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1 — the standard SSIM
// window; local statistics are computed in 'valid' mode (no padding).
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

inline const std::array<double, kSsimWindow * kSsimWindow>& ssim_window() {
    static const auto win = [] {
        std::array<double, kSsimWindow * kSsimWindow> w{};
        const int half = kSsimWindow / 2;
        double sum = 0.0;
        for (int y = 0; y < kSsimWindow; ++y)
            for (int x = 0; x < kSsimWindow; ++x) {
                const double dy = y - half, dx = x - half;
                w[y * kSsimWindow + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
                sum += w[y * kSsimWindow + x];
            }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

// 10*log10(range^2 / MSE); identical images report the +infinity sentinel.
inline double psnr(const CartesianImage& pred, const CartesianImage& ref, double data_range = 1.0) {
    if (!pred.same_shape(ref)) throw std::invalid_argument("psnr: shape mismatch");
    if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be > 0");
    double mse = 0.0;
    for (std::size_t i = 0; i < pred.pix.size(); ++i) {
        const double d = pred.pix[i] - ref.pix[i];
        mse += d * d;
    }
    mse /= static_cast<double>(pred.pix.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

// Mean local SSIM over all valid window positions.
inline double ssim(const CartesianImage& pred, const CartesianImage& ref, double data_range = 1.0) {
    if (!pred.same_shape(ref)) throw std::invalid_argument("ssim: shape mismatch");
    if (pred.width < kSsimWindow || pred.height < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
    const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
    const auto& win = ssim_window();
    const int w = pred.width, h = pred.height;
    double acc = 0.0;
    std::int64_t count = 0;
    for (int y0 = 0; y0 + kSsimWindow <= h; ++y0)
        for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
            double m1x = 0, m1y = 0, m2x = 0, m2y = 0, mxy = 0;
            for (int j = 0; j < kSsimWindow; ++j) {
                const double* px = pred.pix.data() + static_cast<std::size_t>(y0 + j) * w + x0;
                const double* py = ref.pix.data() + static_cast<std::size_t>(y0 + j) * w + x0;
                const double* ww = win.data() + j * kSsimWindow;
                for (int i = 0; i < kSsimWindow; ++i) {
                    m1x += ww[i] * px[i];
                    m1y += ww[i] * py[i];
                    m2x += ww[i] * px[i] * px[i];
                    m2y += ww[i] * py[i] * py[i];
                    mxy += ww[i] * px[i] * py[i];
                }
            }
            const double sx2 = m2x - m1x * m1x;
            const double sy2 = m2y - m1y * m1y;
            const double sxy = mxy - m1x * m1y;
            const double a1 = 2.0 * m1x * m1y + c1;
            const double b1 = m1x * m1x + m1y * m1y + c1;
            const double a2 = 2.0 * sxy + c2;
            const double b2 = sx2 + sy2 + c2;
            acc += (a1 * a2) / (b1 * b2);
            ++count;
        }
    return acc / static_cast<double>(count);
}

// Per-video IQA mirroring the reporting format: per-frame PSNR and SSIM with
// per-video mean and (population) standard deviation. Frames with infinite
// PSNR are excluded from the PSNR mean/std and counted separately.
struct IQAReport {
    std::vector<double> frame_psnr;
    std::vector<double> frame_ssim;
    double psnr_mean = 0.0, psnr_std = 0.0;
    double ssim_mean = 0.0, ssim_std = 0.0;
    int inf_psnr_frames = 0;
};

inline IQAReport evaluate_video(const std::vector<CartesianImage>& sr,
                                const std::vector<CartesianImage>& hr, double data_range = 1.0) {
    if (sr.size() != hr.size() || sr.empty())
        throw std::invalid_argument("evaluate_video: mismatched or empty sequences");
    IQAReport rep;
    for (std::size_t i = 0; i < sr.size(); ++i) {
        rep.frame_psnr.push_back(psnr(sr[i], hr[i], data_range));
        rep.frame_ssim.push_back(ssim(sr[i], hr[i], data_range));
    }
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd, bool skip_inf,
                       int* inf_count) {
        double acc = 0.0;
        std::int64_t n = 0;
        for (double x : v) {
            if (skip_inf && std::isinf(x)) {
                if (inf_count) ++*inf_count;
                continue;
            }
            acc += x;
            ++n;
        }
        if (n == 0) {
            mean = std::numeric_limits<double>::infinity();
            sd = 0.0;
            return;
        }
        mean = acc / static_cast<double>(n);
        double var = 0.0;
        for (double x : v) {
            if (skip_inf && std::isinf(x)) continue;
            var += (x - mean) * (x - mean);
        }
        sd = std::sqrt(var / static_cast<double>(n));
    };
    mean_std(rep.frame_psnr, rep.psnr_mean, rep.psnr_std, true, &rep.inf_psnr_frames);
    mean_std(rep.frame_ssim, rep.ssim_mean, rep.ssim_std, false, nullptr);
    return rep;
}

}  // namespace nwsr
