#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "nwsr/image.hpp"
#include "nwsr/tensor.hpp"

namespace nwsr {

// Which input representation a model trains on: the Delaunay-reconstructed
// Cartesian LR image, the bare sparse image, or the sparse image with its
// mask for the NW head.
enum class TrainMode { cart, sparse, nw };

inline std::string train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::cart: return "cart";
        case TrainMode::sparse: return "sparse";
        default: return "nw";
    }
}

inline TrainMode train_mode_from_name(const std::string& s) {
    if (s == "cart") return TrainMode::cart;
    if (s == "sparse") return TrainMode::sparse;
    if (s == "nw") return TrainMode::nw;
    throw std::invalid_argument("unknown train mode '" + s + "'");
}

// One frame of a simulated video in the normalized domain.
struct FrameData {
    CartesianImage lr;   // Delaunay reconstruction, normalized
    SparseImage sparse;  // normalized signals at fibre pixels, zeros elsewhere
    CartesianImage hr;   // target, normalized with the LR statistics
    NormStats stats;
};

struct PatchPair {
    FeatureStack input;
    Tensor target;  // single channel
};

struct PatchSet {
    std::vector<PatchPair> items;
    int patch = 64;
};

// Non-overlapping patch tiles at stride `patch` from (0,0); partial border
// tiles are dropped. Dense and sparse modes produce identical tile origins.
inline PatchSet extract_patches(const std::vector<FrameData>& frames, TrainMode mode,
                                int patch = 64) {
    if (patch < 1) throw std::invalid_argument("extract_patches: patch size must be >= 1");
    PatchSet set;
    set.patch = patch;
    for (const FrameData& fr : frames) {
        const int w = fr.hr.width, h = fr.hr.height;
        if (w < patch || h < patch)
            throw std::invalid_argument("extract_patches: frame smaller than the patch size");
        for (int y0 = 0; y0 + patch <= h; y0 += patch)
            for (int x0 = 0; x0 + patch <= w; x0 += patch) {
                PatchPair pp;
                pp.target = Tensor(1, patch, patch);
                pp.input.signal = Tensor(1, patch, patch);
                if (mode == TrainMode::nw) pp.input.mask = Tensor(1, patch, patch);
                for (int y = 0; y < patch; ++y)
                    for (int x = 0; x < patch; ++x) {
                        pp.target.at(0, y, x) = fr.hr.at(x0 + x, y0 + y);
                        switch (mode) {
                            case TrainMode::cart:
                                pp.input.signal.at(0, y, x) = fr.lr.at(x0 + x, y0 + y);
                                break;
                            case TrainMode::sparse:
                                pp.input.signal.at(0, y, x) = fr.sparse.S.at(x0 + x, y0 + y);
                                break;
                            case TrainMode::nw:
                                pp.input.signal.at(0, y, x) = fr.sparse.S.at(x0 + x, y0 + y);
                                pp.input.mask.at(0, y, x) = fr.sparse.M.at(x0 + x, y0 + y);
                                break;
                        }
                    }
                set.items.push_back(std::move(pp));
            }
    }
    return set;
}

// Model input for a full-size frame (used at evaluation time).
inline FeatureStack frame_input(const FrameData& fr, TrainMode mode) {
    switch (mode) {
        case TrainMode::cart: return stack_from(fr.lr);
        case TrainMode::sparse: return stack_from(fr.sparse.S);
        default: return stack_from(fr.sparse);
    }
}

}  // namespace nwsr
