#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nwsr/tensor.hpp"

namespace nwsr {

// Plain 2-D cross-correlation with bias and zero padding; spatial size is
// preserved (no striding, no upsampling anywhere in these networks).
class ConvLayer {
public:
    int t_out = 0, c_in = 0, k = 0;
    std::vector<double> W, b;    // W: [t][c][2k+1][2k+1]
    std::vector<double> gW, gb;

    ConvLayer() = default;
    ConvLayer(int t, int c, int half_width) : t_out(t), c_in(c), k(half_width) {
        const std::size_t n = static_cast<std::size_t>(t) * c * window() * window();
        W.assign(n, 0.0);
        b.assign(t, 0.0);
        gW.assign(n, 0.0);
        gb.assign(t, 0.0);
    }

    int window() const { return 2 * k + 1; }

    double& weight(int t, int c, int dy, int dx) {
        return W[(((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) * window() +
                 (dx + k)];
    }

    Tensor forward(const Tensor& in) {
        if (in.c != c_in) throw std::invalid_argument("conv_forward: channel mismatch");
        x_ = in;
        const int h = in.h, w = in.w;
        Tensor out(t_out, h, w);
        for (int t = 0; t < t_out; ++t) {
            double* op = out.plane(t);
            for (int c = 0; c < c_in; ++c) {
                const double* xp = x_.plane(c);
                for (int dy = -k; dy <= k; ++dy)
                    for (int dx = -k; dx <= k; ++dx) {
                        const double wgt =
                            W[(((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) *
                                  window() +
                              (dx + k)];
                        if (wgt == 0.0) continue;
                        const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                        const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                        for (int y = y0; y < y1; ++y) {
                            const double* xrow = xp + static_cast<std::size_t>(y + dy) * w + dx;
                            double* orow = op + static_cast<std::size_t>(y) * w;
                            for (int x = x0; x < x1; ++x) orow[x] += xrow[x] * wgt;
                        }
                    }
            }
            const double bias = b[t];
            for (std::size_t i = 0; i < out.plane_size(); ++i) op[i] += bias;
        }
        return out;
    }

    Tensor backward(const Tensor& gy) {
        if (x_.empty()) throw std::runtime_error("conv_backward: no cached forward state");
        if (gy.c != t_out || gy.h != x_.h || gy.w != x_.w)
            throw std::invalid_argument("conv_backward: gradient shape mismatch");
        const int h = x_.h, w = x_.w;
        Tensor gx(c_in, h, w);
        for (int t = 0; t < t_out; ++t) {
            const double* gp = gy.plane(t);
            double gbias = 0.0;
            for (std::size_t i = 0; i < gy.plane_size(); ++i) gbias += gp[i];
            gb[t] += gbias;
            for (int c = 0; c < c_in; ++c) {
                const double* xp = x_.plane(c);
                double* gxp = gx.plane(c);
                for (int dy = -k; dy <= k; ++dy)
                    for (int dx = -k; dx <= k; ++dx) {
                        const std::size_t wi =
                            (((static_cast<std::size_t>(t) * c_in + c) * window()) + (dy + k)) *
                                window() +
                            (dx + k);
                        const double wgt = W[wi];
                        const int y0 = std::max(0, -dy), y1 = h - std::max(0, dy);
                        const int x0 = std::max(0, -dx), x1 = w - std::max(0, dx);
                        double acc = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            const double* xrow = xp + static_cast<std::size_t>(y + dy) * w + dx;
                            double* gxrow = gxp + static_cast<std::size_t>(y + dy) * w + dx;
                            const double* grow = gp + static_cast<std::size_t>(y) * w;
                            for (int x = x0; x < x1; ++x) {
                                acc += grow[x] * xrow[x];
                                gxrow[x] += grow[x] * wgt;
                            }
                        }
                        gW[wi] += acc;
                    }
            }
        }
        return gx;
    }

    void zero_grad() {
        std::fill(gW.begin(), gW.end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
    }

private:
    Tensor x_;
};

class ReluLayer {
public:
    Tensor forward(const Tensor& in) {
        y_ = in;
        for (double& v : y_.v) v = v > 0.0 ? v : 0.0;
        return y_;
    }

    Tensor backward(const Tensor& gy) {
        if (y_.empty()) throw std::runtime_error("relu backward: no cached forward state");
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.v.size(); ++i)
            if (y_.v[i] <= 0.0) gx.v[i] = 0.0;
        return gx;
    }

private:
    Tensor y_;
};

}  // namespace nwsr
