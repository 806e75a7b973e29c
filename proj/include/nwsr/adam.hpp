#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nwsr/network.hpp"

namespace nwsr {

// Adam with bias correction; moments are stored flat across the network's
// parameter registry order.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::vector<double> m, v;
    long step = 0;

    AdamState() = default;
    AdamState(std::size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(double* w, const double* g, std::size_t n, AdamState& st,
                      std::size_t offset) {
    if (offset + n > st.m.size()) throw std::invalid_argument("adam_step: state too small");
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    double* m = st.m.data() + offset;
    double* v = st.v.data() + offset;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
        v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps_adam);
    }
}

// One optimizer step over plain parameter/gradient vectors.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& st) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    ++st.step;
    adam_step(params.data(), grads.data(), params.size(), st, 0);
}

// One optimizer step over a network's registered parameters, followed by the
// NW kernel L1 re-projection.
inline void adam_step(Network& net, AdamState& st) {
    ++st.step;
    std::size_t offset = 0;
    for (const ParamBlock& p : net.params()) {
        adam_step(p.w, p.g, p.n, st, offset);
        offset += p.n;
    }
    if (offset != st.m.size()) throw std::invalid_argument("adam_step: state/network mismatch");
    net.project_kernel_constraints();
}

}  // namespace nwsr
