#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nwsr/conv.hpp"
#include "nwsr/loss.hpp"
#include "nwsr/network.hpp"
#include "nwsr/nw_layer.hpp"
#include "nwsr/rng.hpp"

namespace nwsr {

// Central-difference verification of analytic gradients, 64-bit throughout.
// Relative error uses a small floor so coordinates whose true gradient is
// near zero are judged against absolute finite-difference noise instead of
// blowing up the ratio.
constexpr double kGradCheckStep = 1e-5;

inline double grad_rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

namespace detail {

// max relative error between analytic[] and central differences of f()
// under perturbation of coords[i].
inline GradCheckResult fd_check(double* coords, const double* analytic, std::size_t n,
                                const std::function<double()>& f, double h = kGradCheckStep) {
    GradCheckResult r;
    for (std::size_t i = 0; i < n; ++i) {
        const double keep = coords[i];
        coords[i] = keep + h;
        const double up = f();
        coords[i] = keep - h;
        const double dn = f();
        coords[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        r.max_rel_err = std::max(r.max_rel_err, grad_rel_err(analytic[i], fd));
        ++r.checked;
    }
    return r;
}

// random sparse stack: binary mask (~40% filled), signals at mask pixels
inline FeatureStack random_sparse_stack(Rng& rng, int c, int h, int w) {
    FeatureStack fs;
    fs.signal = Tensor(c, h, w);
    fs.mask = Tensor(c, h, w);
    for (std::size_t i = 0; i < fs.signal.v.size(); ++i) {
        if (rng.uniform() < 0.4) {
            fs.mask.v[i] = 1.0;
            fs.signal.v[i] = rng.uniform(-1.0, 1.0);
        }
    }
    return fs;
}

// weights with |w| bounded away from zero so sign(w) cannot flip under the
// finite-difference step
inline void random_bounded_weights(Rng& rng, std::vector<double>& W, double lo = 0.1,
                                   double hi = 1.0) {
    for (double& w : W) {
        const double mag = rng.uniform(lo, hi);
        w = (rng.uniform() < 0.5) ? -mag : mag;
    }
}

}  // namespace detail

// NW layer: checks dL/dW, dL/db, dL/dS and dL/dM for L = sum(R .* G) with a
// fixed random G; the deeper-layer path through the updated mask is checked
// by also feeding a random dL/dMup.
inline GradCheckResult gradcheck_nw(int c_in, int t_out, int k, std::uint64_t seed, int h = 8,
                                    int w = 8) {
    Rng rng = Rng::stream(seed, 0x6c1u);
    NWConvLayer layer(t_out, c_in, k, /*eps=*/1e-8);
    detail::random_bounded_weights(rng, layer.W);
    layer.normalize();
    for (double& bb : layer.b) bb = rng.uniform(-0.5, 0.5);
    FeatureStack in = detail::random_sparse_stack(rng, c_in, h, w);

    FeatureStack gout;
    gout.signal = Tensor(t_out, h, w);
    gout.mask = Tensor(t_out, h, w);
    for (double& g : gout.signal.v) g = rng.uniform(-1.0, 1.0);
    for (double& g : gout.mask.v) g = rng.uniform(-1.0, 1.0);

    const auto scalar_loss = [&]() {
        NWConvLayer probe = layer;  // forward-only evaluation at the current coords
        FeatureStack out = probe.forward(in);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.signal.v.size(); ++i)
            acc += out.signal.v[i] * gout.signal.v[i] + out.mask.v[i] * gout.mask.v[i];
        return acc;
    };

    layer.zero_grad();
    layer.forward(in);
    const FeatureStack gin = layer.backward(gout);

    GradCheckResult r;
    auto merge = [&r](const GradCheckResult& o) {
        r.max_rel_err = std::max(r.max_rel_err, o.max_rel_err);
        r.checked += o.checked;
    };
    merge(detail::fd_check(layer.W.data(), layer.gW.data(), layer.W.size(), scalar_loss));
    merge(detail::fd_check(layer.b.data(), layer.gb.data(), layer.b.size(), scalar_loss));
    merge(detail::fd_check(in.signal.v.data(), gin.signal.v.data(), in.signal.v.size(),
                           scalar_loss));
    merge(detail::fd_check(in.mask.v.data(), gin.mask.v.data(), in.mask.v.size(), scalar_loss));
    return r;
}

inline GradCheckResult gradcheck_conv(int c_in, int t_out, int k, std::uint64_t seed, int h = 8,
                                      int w = 8) {
    Rng rng = Rng::stream(seed, 0xc0417u);
    ConvLayer layer(t_out, c_in, k);
    for (double& wv : layer.W) wv = rng.uniform(-0.5, 0.5);
    for (double& bb : layer.b) bb = rng.uniform(-0.5, 0.5);
    Tensor in(c_in, h, w);
    for (double& x : in.v) x = rng.uniform(-1.0, 1.0);
    Tensor gout(t_out, h, w);
    for (double& g : gout.v) g = rng.uniform(-1.0, 1.0);

    const auto scalar_loss = [&]() {
        ConvLayer probe = layer;
        const Tensor out = probe.forward(in);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * gout.v[i];
        return acc;
    };

    layer.zero_grad();
    layer.forward(in);
    const Tensor gin = layer.backward(gout);

    GradCheckResult r;
    auto merge = [&r](const GradCheckResult& o) {
        r.max_rel_err = std::max(r.max_rel_err, o.max_rel_err);
        r.checked += o.checked;
    };
    merge(detail::fd_check(layer.W.data(), layer.gW.data(), layer.W.size(), scalar_loss));
    merge(detail::fd_check(layer.b.data(), layer.gb.data(), layer.b.size(), scalar_loss));
    merge(detail::fd_check(in.v.data(), gin.v.data(), in.v.size(), scalar_loss));
    return r;
}

// SSIM+L1 loss gradient w.r.t. the prediction. Pixels where pred == target
// would sit on the L1 kink, so the random pair keeps them apart.
inline GradCheckResult gradcheck_loss(std::uint64_t seed, int h = 16, int w = 16) {
    Rng rng = Rng::stream(seed, 0x1055u);
    Tensor pred(1, h, w), target(1, h, w);
    for (double& x : pred.v) x = rng.uniform(0.0, 1.0);
    for (double& x : target.v) x = rng.uniform(0.0, 1.0);
    const LossResult lr = ssim_l1_loss(pred, target);
    const auto f = [&]() { return ssim_l1_loss(pred, target).loss; };
    return detail::fd_check(pred.v.data(), lr.grad.v.data(), pred.v.size(), f);
}

// Whole network, a random subset of parameter coordinates.
inline GradCheckResult gradcheck_network(const NetworkDescriptor& desc, std::uint64_t seed,
                                         std::size_t coords = 200, int h = 16, int w = 16) {
    Rng rng = Rng::stream(seed, 0x6e7u);
    Network net = build_network(desc);
    net.init_params(rng);

    FeatureStack in;
    if (desc.arch == Arch::nwnet_sr) {
        in = detail::random_sparse_stack(rng, 1, h, w);
    } else {
        in.signal = Tensor(1, h, w);
        for (double& x : in.signal.v) x = rng.uniform(-1.0, 1.0);
    }
    Tensor gout(1, h, w);
    for (double& g : gout.v) g = rng.uniform(-1.0, 1.0);

    const auto scalar_loss = [&]() {
        Network probe = net;
        const Tensor out = probe.forward(in);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * gout.v[i];
        return acc;
    };

    net.zero_grad();
    net.forward(in);
    net.backward(gout);

    // sample without replacement from the flat parameter index space
    auto blocks = net.params();
    std::size_t total = 0;
    for (const auto& p : blocks) total += p.n;
    coords = std::min(coords, total);
    std::vector<std::size_t> picks(total);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    rng.shuffle(picks);
    picks.resize(coords);

    GradCheckResult r;
    for (std::size_t flat : picks) {
        std::size_t off = flat;
        for (const auto& p : blocks) {
            if (off < p.n) {
                const GradCheckResult one =
                    detail::fd_check(p.w + off, p.g + off, 1, scalar_loss);
                r.max_rel_err = std::max(r.max_rel_err, one.max_rel_err);
                ++r.checked;
                break;
            }
            off -= p.n;
        }
    }
    return r;
}

}  // namespace nwsr
