#pragma once

#include <cmath>
#include <stdexcept>

#include "nwsr/iqa.hpp"
#include "nwsr/tensor.hpp"

namespace nwsr {

constexpr double kLossAlpha = 0.84;  // SSIM weight in the mixed loss

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // d loss / d pred, same shape as pred
};

// Mixed restoration loss: alpha * (1 - SSIM) + (1 - alpha) * L1, with the
// analytic gradient w.r.t. the prediction. SSIM uses the same 11x11
// Gaussian window as the IQA metric ('valid' positions only); intensities
// are expected in the normalized domain, data range 1.
//
// Per window the gradient of the local SSIM value S = (A1*A2)/(B1*B2) in a
// prediction pixel q (window weight w_q) is
//   dS/dx_q = w_q * (c1 + c2*(x_q - mu_x) + c3*(y_q - mu_y)),
//   c1 = 2*mu_y*A2/(B1*B2) - 2*mu_x*S/B1,  c2 = -2*S/B2,  c3 = 2*A1/(B1*B2),
// which follows from d(mu_x)/dx_q = w_q, d(sigma_x^2)/dx_q = 2w_q(x_q-mu_x),
// d(sigma_xy)/dx_q = w_q(y_q - mu_y).
inline LossResult ssim_l1_loss(const Tensor& pred, const Tensor& target,
                               double alpha = kLossAlpha) {
    if (!pred.same_shape(target)) throw std::invalid_argument("ssim_l1_loss: shape mismatch");
    if (pred.c != 1) throw std::invalid_argument("ssim_l1_loss: expected a single channel");
    const int w = pred.w, h = pred.h;
    if (w < kSsimWindow || h < kSsimWindow)
        throw std::invalid_argument("ssim_l1_loss: image smaller than the 11x11 window");

    LossResult res;
    res.grad = Tensor(1, h, w);
    const double* x = pred.plane(0);
    const double* y = target.plane(0);
    double* g = res.grad.plane(0);

    // L1 term
    const double npix = static_cast<double>(pred.plane_size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < pred.plane_size(); ++i) {
        const double d = x[i] - y[i];
        l1 += std::abs(d);
        g[i] = (1.0 - alpha) * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / npix;
    }
    l1 /= npix;

    // SSIM term
    const double c1 = kSsimK1 * kSsimK1;
    const double c2 = kSsimK2 * kSsimK2;
    const auto& win = ssim_window();
    const int ny = h - kSsimWindow + 1, nx = w - kSsimWindow + 1;
    const double nwin = static_cast<double>(ny) * nx;
    double ssim_acc = 0.0;
    for (int y0 = 0; y0 < ny; ++y0)
        for (int x0 = 0; x0 < nx; ++x0) {
            double m1x = 0, m1y = 0, m2x = 0, m2y = 0, mxy = 0;
            for (int j = 0; j < kSsimWindow; ++j) {
                const double* px = x + static_cast<std::size_t>(y0 + j) * w + x0;
                const double* py = y + static_cast<std::size_t>(y0 + j) * w + x0;
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
            const double s = (a1 * a2) / (b1 * b2);
            ssim_acc += s;

            const double f1 = 2.0 * m1y * a2 / (b1 * b2) - 2.0 * m1x * s / b1;
            const double f2 = -2.0 * s / b2;
            const double f3 = 2.0 * a1 / (b1 * b2);
            const double scale = -alpha / nwin;  // loss carries (1 - mean SSIM)
            for (int j = 0; j < kSsimWindow; ++j) {
                const double* px = x + static_cast<std::size_t>(y0 + j) * w + x0;
                const double* py = y + static_cast<std::size_t>(y0 + j) * w + x0;
                double* pg = g + static_cast<std::size_t>(y0 + j) * w + x0;
                const double* ww = win.data() + j * kSsimWindow;
                for (int i = 0; i < kSsimWindow; ++i)
                    pg[i] += scale * ww[i] * (f1 + f2 * (px[i] - m1x) + f3 * (py[i] - m1y));
            }
        }
    res.loss = alpha * (1.0 - ssim_acc / nwin) + (1.0 - alpha) * l1;
    return res;
}

inline LossResult ssim_l1_loss(const CartesianImage& pred, const CartesianImage& target,
                               double alpha = kLossAlpha) {
    return ssim_l1_loss(to_tensor(pred), to_tensor(target), alpha);
}

}  // namespace nwsr
