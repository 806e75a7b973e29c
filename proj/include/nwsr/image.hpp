#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace nwsr {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Dense grayscale field on a regular pixel grid, row-major (v = row,
// u = column). Pixel (u, v) has its centre at grid coordinates (u, v);
// intensities are nominally in [0, 1] after normalization but are not
// clamped internally.
struct CartesianImage {
    int width = 0;
    int height = 0;
    std::vector<double> pix;

    CartesianImage() = default;
    CartesianImage(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("CartesianImage: non-positive size");
        pix.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int u, int v) { return pix[static_cast<std::size_t>(v) * width + u]; }
    double at(int u, int v) const { return pix[static_cast<std::size_t>(v) * width + u]; }
    std::size_t size() const { return pix.size(); }
    bool same_shape(const CartesianImage& o) const {
        return width == o.width && height == o.height;
    }

    void check_finite(const char* who) const {
        for (double p : pix)
            if (!std::isfinite(p)) throw std::runtime_error(std::string(who) + ": non-finite intensity");
    }
};

// Sparsity map companion to a CartesianImage. Binary {0,1} at input,
// probabilistic (non-negative reals) after NW mask updates.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<double> val;

    Mask() = default;
    Mask(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("Mask: non-positive size");
        val.assign(static_cast<std::size_t>(w) * h, fill);
    }

    double& at(int u, int v) { return val[static_cast<std::size_t>(v) * width + u]; }
    double at(int u, int v) const { return val[static_cast<std::size_t>(v) * width + u]; }

    bool is_binary() const {
        for (double m : val)
            if (m != 0.0 && m != 1.0) return false;
        return true;
    }
};

// Irregular sampling pattern: sub-pixel fibre centre positions plus the
// circular field of view they live in. Coordinates are in grid units.
struct FiberLayout {
    std::vector<Vec2> centres;
    Vec2 fov_centre;
    double fov_radius = 0.0;
};

// Irregularly sampled signal embedded in a Cartesian grid: zeros at
// non-informative pixels, with the matching sparsity mask.
struct SparseImage {
    CartesianImage S;
    Mask M;
};

// Per-frame normalization statistics, kept for exact inversion.
struct NormStats {
    double mean_lr = 0.0;
    double std_lr = 1.0;
    double scale_min = 0.0;
    double scale_max = 1.0;
};

// Nearest pixel under round-half-away-from-zero.
inline int round_to_pixel(double x) { return static_cast<int>(std::lround(x)); }

inline int fov_bbox_side(const FiberLayout& layout) {
    return static_cast<int>(std::ceil(2.0 * layout.fov_radius));
}

inline void validate_layout(const FiberLayout& layout) {
    if (layout.centres.size() < 3)
        throw std::invalid_argument("FiberLayout: fewer than 3 fibre centres");
    if (!(layout.fov_radius > 0.0))
        throw std::invalid_argument("FiberLayout: non-positive FoV radius");
    std::unordered_set<std::int64_t> taken;
    taken.reserve(layout.centres.size() * 2);
    for (const Vec2& c : layout.centres) {
        const double dx = c.x - layout.fov_centre.x;
        const double dy = c.y - layout.fov_centre.y;
        if (!(dx * dx + dy * dy < layout.fov_radius * layout.fov_radius))
            throw std::invalid_argument("FiberLayout: centre not strictly inside the FoV circle");
        const std::int64_t key =
            (static_cast<std::int64_t>(round_to_pixel(c.x)) << 32) ^
            (static_cast<std::int64_t>(round_to_pixel(c.y)) & 0xffffffffll);
        if (!taken.insert(key).second)
            throw std::invalid_argument("FiberLayout: two centres share a nearest pixel");
    }
}

// Mean nearest-neighbour distance between fibre centres; used to derive
// default kernel widths for layouts loaded from file.
inline double mean_nn_spacing(const FiberLayout& layout) {
    const auto& c = layout.centres;
    if (c.size() < 2) throw std::invalid_argument("mean_nn_spacing: need >= 2 centres");
    double acc = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (i == j) continue;
            const double dx = c[i].x - c[j].x, dy = c[i].y - c[j].y;
            best = std::min(best, dx * dx + dy * dy);
        }
        acc += std::sqrt(best);
    }
    return acc / static_cast<double>(c.size());
}

// Embed one signal per fibre centre at its nearest pixel; all other pixels
// are zero with mask zero.
inline SparseImage sparsify(const std::vector<double>& lr_signals, const FiberLayout& layout,
                            int width, int height) {
    if (layout.centres.size() < 3)
        throw std::invalid_argument("sparsify: fewer than 3 fibre centres");
    if (lr_signals.size() != layout.centres.size())
        throw std::invalid_argument("sparsify: signal count does not match fibre count");
    SparseImage out;
    out.S = CartesianImage(width, height);
    out.M = Mask(width, height);
    for (std::size_t f = 0; f < layout.centres.size(); ++f) {
        const int u = round_to_pixel(layout.centres[f].x);
        const int v = round_to_pixel(layout.centres[f].y);
        if (u < 0 || u >= width || v < 0 || v >= height)
            throw std::runtime_error("sparsify: fibre centre rounds out of bounds");
        if (out.M.at(u, v) != 0.0)
            throw std::runtime_error("sparsify: two fibre centres collide at one pixel");
        out.S.at(u, v) = lr_signals[f];
        out.M.at(u, v) = 1.0;
    }
    return out;
}

struct NormalizedPair {
    CartesianImage lr;
    CartesianImage hr;
    NormStats stats;
};

// The affine chain of normalize_frame applied to a raw intensity.
inline double apply_norm(double x, const NormStats& s) {
    return ((x - s.mean_lr) / s.std_lr - s.scale_min) / (s.scale_max - s.scale_min);
}

inline double apply_denorm(double x, const NormStats& s) {
    return (x * (s.scale_max - s.scale_min) + s.scale_min) * s.std_lr + s.mean_lr;
}

inline CartesianImage apply_norm(const CartesianImage& img, const NormStats& s) {
    CartesianImage out = img;
    for (double& p : out.pix) p = apply_norm(p, s);
    return out;
}

// Normalize a sparse image: informative pixels go through the affine chain,
// non-informative pixels stay exactly zero.
inline SparseImage apply_norm(const SparseImage& sp, const NormStats& s) {
    SparseImage out = sp;
    for (std::size_t i = 0; i < out.S.pix.size(); ++i)
        out.S.pix[i] = (sp.M.val[i] != 0.0) ? apply_norm(sp.S.pix[i], s) : 0.0;
    return out;
}

// Standardize by the LR frame's mean/std (population), then map to [0, 1]
// by the standardized LR frame's min/max. HR is transformed with the same
// statistics and the same affine map; its values may leave [0, 1].
inline NormalizedPair normalize_frame(const CartesianImage& lr, const CartesianImage& hr) {
    if (!lr.same_shape(hr)) throw std::invalid_argument("normalize_frame: shape mismatch");
    if (lr.size() == 0) throw std::invalid_argument("normalize_frame: empty frame");
    double mean = 0.0;
    for (double p : lr.pix) mean += p;
    mean /= static_cast<double>(lr.size());
    double var = 0.0;
    for (double p : lr.pix) var += (p - mean) * (p - mean);
    var /= static_cast<double>(lr.size());
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw std::runtime_error("normalize_frame: degenerate frame (zero std)");

    double smin = std::numeric_limits<double>::infinity();
    double smax = -std::numeric_limits<double>::infinity();
    for (double p : lr.pix) {
        const double z = (p - mean) / sd;
        smin = std::min(smin, z);
        smax = std::max(smax, z);
    }
    NormalizedPair out;
    out.stats = NormStats{mean, sd, smin, smax};
    out.lr = apply_norm(lr, out.stats);
    out.hr = apply_norm(hr, out.stats);
    return out;
}

// Exact inverse of the normalization affine chain.
inline CartesianImage denormalize(const CartesianImage& img, const NormStats& stats) {
    CartesianImage out = img;
    for (double& p : out.pix) p = apply_denorm(p, stats);
    return out;
}

// Zero every pixel whose centre lies outside the FoV circle. Synthetic HR
// pCLE frames are masked this way so the ground truth, like a real pCLE
// frame, carries no content beyond the fibre bundle's reach.
inline CartesianImage apply_fov_mask(const CartesianImage& img, const FiberLayout& layout) {
    CartesianImage out = img;
    const double r2 = layout.fov_radius * layout.fov_radius;
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
            const double dx = u - layout.fov_centre.x;
            const double dy = v - layout.fov_centre.y;
            if (dx * dx + dy * dy > r2) out.at(u, v) = 0.0;
        }
    return out;
}

// --- Layout CSV: header line `# fov_cx,fov_cy,fov_r=<cx>,<cy>,<r>`,
// --- then one `x,y` line per fibre.

inline void save_layout_csv(const FiberLayout& layout, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_layout_csv: cannot open " + path);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "# fov_cx,fov_cy,fov_r=%.17g,%.17g,%.17g\n",
                  layout.fov_centre.x, layout.fov_centre.y, layout.fov_radius);
    f << buf;
    for (const Vec2& c : layout.centres) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", c.x, c.y);
        f << buf;
    }
    if (!f) throw std::runtime_error("save_layout_csv: write failed for " + path);
}

inline FiberLayout load_layout_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_layout_csv: cannot open " + path);
    FiberLayout layout;
    std::string line;
    bool have_header = false;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::istringstream ss(line.substr(eq + 1));
            char comma;
            if (!(ss >> layout.fov_centre.x >> comma >> layout.fov_centre.y >> comma >>
                  layout.fov_radius))
                throw std::runtime_error("load_layout_csv: bad FoV header in " + path);
            have_header = true;
            continue;
        }
        std::istringstream ss(line);
        Vec2 c;
        char comma;
        if (!(ss >> c.x >> comma >> c.y))
            throw std::runtime_error("load_layout_csv: bad fibre line '" + line + "'");
        layout.centres.push_back(c);
    }
    if (!have_header) throw std::runtime_error("load_layout_csv: missing FoV header in " + path);
    validate_layout(layout);
    return layout;
}

}  // namespace nwsr
