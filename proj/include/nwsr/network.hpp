#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nwsr/conv.hpp"
#include "nwsr/nw_layer.hpp"
#include "nwsr/rng.hpp"
#include "nwsr/tensor.hpp"

namespace nwsr {

// EDSR-style residual block: conv-relu-conv plus identity skip, no batch
// norm, no residual scaling.
class ResidualBlock {
public:
    ConvLayer conv1, conv2;

    ResidualBlock() = default;
    ResidualBlock(int filters, int half_width)
        : conv1(filters, filters, half_width), conv2(filters, filters, half_width) {}

    Tensor forward(const Tensor& x) {
        Tensor t = conv2.forward(relu_.forward(conv1.forward(x)));
        t += x;
        return t;
    }

    Tensor backward(const Tensor& gy) {
        Tensor gx = conv1.backward(relu_.backward(conv2.backward(gy)));
        gx += gy;  // identity path
        return gx;
    }

    void zero_grad() {
        conv1.zero_grad();
        conv2.zero_grad();
    }

private:
    ReluLayer relu_;
};

enum class Arch { cnnnet_sr, nwnet_sr };

inline std::string arch_name(Arch a) { return a == Arch::cnnnet_sr ? "cnnnet_sr" : "nwnet_sr"; }

inline Arch arch_from_name(const std::string& s) {
    if (s == "cnnnet_sr") return Arch::cnnnet_sr;
    if (s == "nwnet_sr") return Arch::nwnet_sr;
    throw std::invalid_argument("unknown architecture '" + s + "'");
}

struct NetworkDescriptor {
    Arch arch = Arch::cnnnet_sr;
    int blocks = 16;     // residual blocks
    int filters = 64;    // trunk width
    int nw_depth = 3;    // NW head layers (nwnet only)
    double eps = 1e-8;   // NW denominator stabilizer

    bool operator==(const NetworkDescriptor&) const = default;
};

// A named view over one parameter array and its gradient, in the fixed
// serialization order of the network.
struct ParamBlock {
    std::string name;
    double* w = nullptr;
    double* g = nullptr;
    std::size_t n = 0;
};

// Size-preserving super-resolution network. Both architectures share the
// trunk: residual blocks, a global skip over them, a 3x3 conv with 32
// filters standing in for the (absent) upsampler, and a linear 1x1 fusion
// conv down to one channel. They differ only in the head: a single 3x3 conv
// for cnnnet_sr, a stack of NW layers (first 9x9, deeper 3x3) for nwnet_sr
// whose masks are propagated between NW layers and discarded after the last.
class Network {
public:
    NetworkDescriptor desc;
    std::vector<NWConvLayer> nw_head;
    ConvLayer head;
    std::vector<ResidualBlock> body;
    ConvLayer fuse;  // 3x3, 32 filters
    ConvLayer out;   // 1x1, 1 channel, linear

    Tensor forward(const FeatureStack& in) {
        if (desc.arch == Arch::nwnet_sr && !in.has_mask())
            throw std::invalid_argument("net_forward: nwnet_sr needs a sparse image + mask");
        if (desc.arch == Arch::cnnnet_sr && in.has_mask())
            throw std::invalid_argument("net_forward: cnnnet_sr takes a dense image, no mask");
        Tensor trunk_in;
        if (desc.arch == Arch::nwnet_sr) {
            FeatureStack cur = in;
            for (auto& layer : nw_head) cur = layer.forward(cur);
            trunk_in = std::move(cur.signal);  // masks end here
        } else {
            trunk_in = head.forward(in.signal);
        }
        Tensor t = trunk_in;
        for (auto& block : body) t = block.forward(t);
        t += trunk_in;  // global skip
        return out.forward(fuse.forward(t));
    }

    // Accumulates parameter gradients; returns the gradient w.r.t. the input
    // stack (mask gradient populated only for nwnet_sr).
    FeatureStack backward(const Tensor& gy) {
        Tensor g = fuse.backward(out.backward(gy));
        Tensor g_skip = g;  // global skip contribution to the trunk input
        for (auto it = body.rbegin(); it != body.rend(); ++it) g = it->backward(g);
        g += g_skip;
        if (desc.arch == Arch::nwnet_sr) {
            FeatureStack gs{std::move(g), Tensor{}};
            for (auto it = nw_head.rbegin(); it != nw_head.rend(); ++it) gs = it->backward(gs);
            return gs;
        }
        return FeatureStack{head.backward(g), Tensor{}};
    }

    std::vector<ParamBlock> params() {
        std::vector<ParamBlock> blocks;
        auto add = [&blocks](const std::string& name, std::vector<double>& w,
                             std::vector<double>& g) {
            blocks.push_back(ParamBlock{name, w.data(), g.data(), w.size()});
        };
        for (std::size_t i = 0; i < nw_head.size(); ++i) {
            add("nw" + std::to_string(i) + ".W", nw_head[i].W, nw_head[i].gW);
            add("nw" + std::to_string(i) + ".b", nw_head[i].b, nw_head[i].gb);
        }
        if (desc.arch == Arch::cnnnet_sr) {
            add("head.W", head.W, head.gW);
            add("head.b", head.b, head.gb);
        }
        for (std::size_t i = 0; i < body.size(); ++i) {
            const std::string p = "block" + std::to_string(i);
            add(p + ".conv1.W", body[i].conv1.W, body[i].conv1.gW);
            add(p + ".conv1.b", body[i].conv1.b, body[i].conv1.gb);
            add(p + ".conv2.W", body[i].conv2.W, body[i].conv2.gW);
            add(p + ".conv2.b", body[i].conv2.b, body[i].conv2.gb);
        }
        add("fuse.W", fuse.W, fuse.gW);
        add("fuse.b", fuse.b, fuse.gb);
        add("out.W", out.W, out.gW);
        add("out.b", out.b, out.gb);
        return blocks;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : params()) n += p.n;
        return n;
    }

    void zero_grad() {
        for (auto& l : nw_head) l.zero_grad();
        head.zero_grad();
        for (auto& b : body) b.zero_grad();
        fuse.zero_grad();
        out.zero_grad();
    }

    // He-normal for convs; truncated normal(0.2, 0.05) then L1 projection
    // for NW kernels; zero biases.
    void init_params(Rng& rng) {
        for (auto& l : nw_head) {
            for (double& w : l.W) w = rng.truncated_normal(0.2, 0.05);
            l.normalize();
        }
        auto he = [&rng](ConvLayer& c) {
            const double sd = std::sqrt(2.0 / (static_cast<double>(c.c_in) * c.window() * c.window()));
            for (double& w : c.W) w = rng.normal(0.0, sd);
        };
        if (desc.arch == Arch::cnnnet_sr) he(head);
        for (auto& b : body) {
            he(b.conv1);
            he(b.conv2);
        }
        he(fuse);
        he(out);
    }

    // Re-establish the per-output-channel L1 = 1 constraint on NW kernels;
    // called after every optimizer step (projection, not reparameterization).
    void project_kernel_constraints() {
        for (auto& l : nw_head) l.normalize();
    }
};

inline Network build_cnnnet_sr(int blocks, int filters) {
    if (blocks < 1 || filters < 1)
        throw std::invalid_argument("build_cnnnet_sr: blocks and filters must be >= 1");
    Network net;
    net.desc = NetworkDescriptor{Arch::cnnnet_sr, blocks, filters, 0, 0.0};
    net.head = ConvLayer(filters, 1, 1);
    net.body.assign(blocks, ResidualBlock(filters, 1));
    net.fuse = ConvLayer(32, filters, 1);
    net.out = ConvLayer(1, 32, 0);
    return net;
}

inline Network build_nwnet_sr(int blocks, int filters, int nw_depth, double eps = 1e-8) {
    if (blocks < 1 || filters < 1)
        throw std::invalid_argument("build_nwnet_sr: blocks and filters must be >= 1");
    if (nw_depth < 1) throw std::invalid_argument("build_nwnet_sr: nw_depth must be >= 1");
    Network net;
    net.desc = NetworkDescriptor{Arch::nwnet_sr, blocks, filters, nw_depth, eps};
    net.nw_head.emplace_back(filters, 1, 4, eps);  // 9x9 window over the raw sparse image
    for (int i = 1; i < nw_depth; ++i) net.nw_head.emplace_back(filters, filters, 1, eps);
    net.body.assign(blocks, ResidualBlock(filters, 1));
    net.fuse = ConvLayer(32, filters, 1);
    net.out = ConvLayer(1, 32, 0);
    return net;
}

inline Network build_network(const NetworkDescriptor& d) {
    return d.arch == Arch::cnnnet_sr ? build_cnnnet_sr(d.blocks, d.filters)
                                     : build_nwnet_sr(d.blocks, d.filters, d.nw_depth, d.eps);
}

}  // namespace nwsr
