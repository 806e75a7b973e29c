#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nwsr/tensor.hpp"

namespace nwsr {

// Scale each output channel's weights by its inverse L1 norm, preserving
// signs, so that sum |w| = 1 per channel.
inline void normalize_kernel(std::vector<double>& W, int t_out, int per_channel) {
    for (int t = 0; t < t_out; ++t) {
        double l1 = 0.0;
        double* w = W.data() + static_cast<std::size_t>(t) * per_channel;
        for (int i = 0; i < per_channel; ++i) l1 += std::abs(w[i]);
        if (!(l1 > 0.0))
            throw std::runtime_error("normalize_kernel: all-zero output channel");
        for (int i = 0; i < per_channel; ++i) w[i] /= l1;
    }
}

// Trainable Nadaraya-Watson convolution: the signed kernel runs over the
// certainty-weighted signal, its absolute value over the mask, and the
// pointwise quotient plus bias is the reconstructed feature map. The
// pre-epsilon denominator is the updated (probabilistic) sparsity mask
// handed to the next layer.
//
//   R[t](p)    = sum_{c,o} (S*M)[c](p+o) w[t,c,o]
//                / (sum_{c,o} M[c](p+o) |w[t,c,o]| + eps) + b[t]
//   Mup[t](p)  = sum_{c,o} M[c](p+o) |w[t,c,o]|
//
// On a binary-masked sparse input (S zero at non-informative pixels) the
// S*M weighting is the identity, so this is exactly the classical quotient.
// For the probabilistic masks of deeper layers the weighting is what keeps
// a stack bounded: without it, a pixel whose window sees only low-certainty
// neighbours divides an O(1) feature by a near-zero mask sum and the head
// amplifies rim values without limit.
//
// S and M are zero-padded at the borders; padded mask zeros correctly mark
// out-of-image pixels as non-informative. Multi-channel inputs share one
// normalizing denominator (numerator and denominator both sum over c).
class NWConvLayer {
public:
    int t_out = 0, c_in = 0, k = 0;
    double eps = 1e-8;
    std::vector<double> W, b;    // W: [t][c][2k+1][2k+1]
    std::vector<double> gW, gb;

    NWConvLayer() = default;
    NWConvLayer(int t, int c, int half_width, double eps_ = 1e-8)
        : t_out(t), c_in(c), k(half_width), eps(eps_) {
        const std::size_t n = static_cast<std::size_t>(t) * c * window() * window();
        W.assign(n, 0.0);
        b.assign(t, 0.0);
        gW.assign(n, 0.0);
        gb.assign(t, 0.0);
    }

    int window() const { return 2 * k + 1; }
    int weights_per_channel() const { return c_in * window() * window(); }

    double& weight(int t, int c, int dy, int dx) {
        return W[(((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) * window() +
                 (dx + k)];
    }

    void normalize() { normalize_kernel(W, t_out, weights_per_channel()); }

    FeatureStack forward(const FeatureStack& in) {
        if (!in.has_mask()) throw std::invalid_argument("nw_forward: input mask required");
        if (in.signal.c != c_in || !in.signal.same_shape(in.mask))
            throw std::invalid_argument("nw_forward: input shape mismatch");
        S_ = in.signal;
        M_ = in.mask;
        const int h = in.signal.h, w = in.signal.w;
        num_ = Tensor(t_out, h, w);
        den_ = Tensor(t_out, h, w);
        FeatureStack out;
        out.signal = Tensor(t_out, h, w);
        out.mask = Tensor(t_out, h, w);
        for (int t = 0; t < t_out; ++t) {
            double* num = num_.plane(t);
            double* den = den_.plane(t);
            for (int c = 0; c < c_in; ++c) {
                const double* sp = S_.plane(c);
                const double* mp = M_.plane(c);
                for (int dy = -k; dy <= k; ++dy)
                    for (int dx = -k; dx <= k; ++dx) {
                        const double wgt =
                            W[(((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) *
                                  window() +
                              (dx + k)];
                        if (wgt == 0.0) continue;
                        const double awgt = std::abs(wgt);
                        const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                        const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                        for (int y = y0; y < y1; ++y) {
                            const double* srow = sp + static_cast<std::size_t>(y + dy) * w + dx;
                            const double* mrow = mp + static_cast<std::size_t>(y + dy) * w + dx;
                            double* nrow = num + static_cast<std::size_t>(y) * w;
                            double* drow = den + static_cast<std::size_t>(y) * w;
                            for (int x = x0; x < x1; ++x) {
                                nrow[x] += srow[x] * mrow[x] * wgt;
                                drow[x] += mrow[x] * awgt;
                            }
                        }
                    }
            }
            double* r = out.signal.plane(t);
            double* m = out.mask.plane(t);
            const double bias = b[t];
            for (std::size_t i = 0; i < out.signal.plane_size(); ++i) {
                r[i] = num[i] / (den[i] + eps) + bias;
                m[i] = den[i];
            }
        }
        return out;
    }

    // grad.signal = dL/dR, grad.mask = dL/dMup (empty when masks were
    // discarded after this layer). Accumulates gW/gb, returns dL/dS, dL/dM.
    FeatureStack backward(const FeatureStack& grad) {
        if (S_.empty()) throw std::runtime_error("nw_backward: no cached forward state");
        if (grad.signal.c != t_out || grad.signal.h != S_.h || grad.signal.w != S_.w)
            throw std::invalid_argument("nw_backward: gradient shape mismatch");
        const int h = S_.h, w = S_.w;
        FeatureStack gin;
        gin.signal = Tensor(c_in, h, w);
        gin.mask = Tensor(c_in, h, w);
        Tensor gnum(1, h, w), gden(1, h, w);
        for (int t = 0; t < t_out; ++t) {
            const double* gr = grad.signal.plane(t);
            const double* gm = grad.has_mask() ? grad.mask.plane(t) : nullptr;
            const double* num = num_.plane(t);
            const double* den = den_.plane(t);
            double* gn = gnum.plane(0);
            double* gd = gden.plane(0);
            double gbias = 0.0;
            for (std::size_t i = 0; i < gnum.plane_size(); ++i) {
                const double d = den[i] + eps;
                gn[i] = gr[i] / d;
                gd[i] = -gr[i] * num[i] / (d * d);
                if (gm) gd[i] += gm[i];
                gbias += gr[i];
            }
            gb[t] += gbias;
            for (int c = 0; c < c_in; ++c) {
                const double* sp = S_.plane(c);
                const double* mp = M_.plane(c);
                double* gsp = gin.signal.plane(c);
                double* gmp = gin.mask.plane(c);
                for (int dy = -k; dy <= k; ++dy)
                    for (int dx = -k; dx <= k; ++dx) {
                        const std::size_t wi =
                            (((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) *
                                window() +
                            (dx + k);
                        const double wgt = W[wi];
                        const double awgt = std::abs(wgt);
                        const double sgn = (wgt > 0.0) ? 1.0 : (wgt < 0.0 ? -1.0 : 0.0);
                        const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                        const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                        double acc_s = 0.0, acc_m = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            const double* srow = sp + static_cast<std::size_t>(y + dy) * w + dx;
                            const double* mrow = mp + static_cast<std::size_t>(y + dy) * w + dx;
                            double* gsrow = gsp + static_cast<std::size_t>(y + dy) * w + dx;
                            double* gmrow = gmp + static_cast<std::size_t>(y + dy) * w + dx;
                            const double* gnrow = gn + static_cast<std::size_t>(y) * w;
                            const double* gdrow = gd + static_cast<std::size_t>(y) * w;
                            for (int x = x0; x < x1; ++x) {
                                acc_s += gnrow[x] * srow[x] * mrow[x];
                                acc_m += gdrow[x] * mrow[x];
                                gsrow[x] += gnrow[x] * wgt * mrow[x];
                                gmrow[x] += gdrow[x] * awgt + gnrow[x] * wgt * srow[x];
                            }
                        }
                        gW[wi] += acc_s + sgn * acc_m;
                    }
            }
        }
        return gin;
    }

    void zero_grad() {
        std::fill(gW.begin(), gW.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
    }

    // Forward state needed by backward; exposed for cache-management tests.
    bool has_cache() const { return !S_.empty(); }
    void drop_cache() {
        S_ = Tensor{};
        M_ = Tensor{};
        num_ = Tensor{};
        den_ = Tensor{};
    }

private:
    Tensor S_, M_, num_, den_;
};

}  // namespace nwsr
