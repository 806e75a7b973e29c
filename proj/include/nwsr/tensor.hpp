#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nwsr/image.hpp"

namespace nwsr {

// Channel-major (c, h, w) tensor of doubles; the working currency of layer
// forward/backward passes. Spatial layout matches CartesianImage (row-major,
// v = row, u = column).
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0) : c(c_), h(h_), w(w_) {
        if (c_ < 0 || h_ < 0 || w_ < 0) throw std::invalid_argument("Tensor: negative dims");
        v.assign(static_cast<std::size_t>(c_) * h_ * w_, fill);
    }

    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    double* plane(int ci) { return v.data() + plane_size() * ci; }
    const double* plane(int ci) const { return v.data() + plane_size() * ci; }
    double& at(int ci, int y, int x) { return v[plane_size() * ci + static_cast<std::size_t>(y) * w + x]; }
    double at(int ci, int y, int x) const {
        return v[plane_size() * ci + static_cast<std::size_t>(y) * w + x];
    }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
    bool empty() const { return v.empty(); }

    Tensor& operator+=(const Tensor& o) {
        if (!same_shape(o)) throw std::invalid_argument("Tensor +=: shape mismatch");
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
        return *this;
    }
};

// t feature channels plus (while inside an NW head) t companion masks.
// The mask tensor is empty once masks have been discarded.
struct FeatureStack {
    Tensor signal;
    Tensor mask;

    bool has_mask() const { return !mask.empty(); }
};

inline Tensor to_tensor(const CartesianImage& img) {
    Tensor t(1, img.height, img.width);
    t.v = img.pix;
    return t;
}

inline Tensor to_tensor(const Mask& m) {
    Tensor t(1, m.height, m.width);
    t.v = m.val;
    return t;
}

inline CartesianImage to_image(const Tensor& t, int channel = 0) {
    if (channel < 0 || channel >= t.c) throw std::invalid_argument("to_image: bad channel");
    CartesianImage img(t.w, t.h);
    const double* p = t.plane(channel);
    img.pix.assign(p, p + t.plane_size());
    return img;
}

inline FeatureStack stack_from(const SparseImage& sp) {
    return FeatureStack{to_tensor(sp.S), to_tensor(sp.M)};
}

inline FeatureStack stack_from(const CartesianImage& img) {
    return FeatureStack{to_tensor(img), Tensor{}};
}

}  // namespace nwsr
