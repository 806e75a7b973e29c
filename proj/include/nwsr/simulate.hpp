#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nwsr/delaunay.hpp"
#include "nwsr/image.hpp"
#include "nwsr/png_io.hpp"
#include "nwsr/rng.hpp"

namespace nwsr {

struct NoiseParams {
    double sigma_mult = 0.1;   // std of the multiplicative N(1, s^2) factor
    double sigma_add = 0.05;   // std of the additive N(0, s^2) term
    std::uint64_t seed = 0;
};

// Frames cropped from one source image, all sharing a fibre layout.
struct VideoSequence {
    std::vector<CartesianImage> frames;
    FiberLayout layout;
};

inline void validate_video(const VideoSequence& video) {
    if (video.frames.empty()) throw std::invalid_argument("VideoSequence: no frames");
    const int side = fov_bbox_side(video.layout);
    for (const auto& f : video.frames)
        if (f.width != side || f.height != side)
            throw std::invalid_argument("VideoSequence: frame does not match FoV bounding box");
}

// ITU-R BT.601 luma conversion.
inline CartesianImage to_grayscale(const PngImage& rgb) {
    if (rgb.channels != 3) throw std::invalid_argument("to_grayscale: expected 3 channels");
    CartesianImage out(rgb.width, rgb.height);
    for (int v = 0; v < rgb.height; ++v)
        for (int u = 0; u < rgb.width; ++u)
            out.at(u, v) =
                0.299 * rgb.at(u, v, 0) + 0.587 * rgb.at(u, v, 1) + 0.114 * rgb.at(u, v, 2);
    return out;
}

// Crop FoV-bounding-box frames left-to-right, top-to-bottom at a stride of
// half the box side; partial border frames are dropped.
inline VideoSequence crop_frames(const CartesianImage& gray, const FiberLayout& layout) {
    const int side = fov_bbox_side(layout);
    if (gray.width < side || gray.height < side)
        throw std::invalid_argument("crop_frames: source smaller than the FoV bounding box");
    const int stride = std::max(1, side / 2);
    VideoSequence video;
    video.layout = layout;
    for (int y0 = 0; y0 + side <= gray.height; y0 += stride)
        for (int x0 = 0; x0 + side <= gray.width; x0 += stride) {
            CartesianImage frame(side, side);
            for (int v = 0; v < side; ++v)
                for (int u = 0; u < side; ++u) frame.at(u, v) = gray.at(x0 + u, y0 + v);
            video.frames.push_back(std::move(frame));
        }
    return video;
}

inline std::vector<std::int32_t> assign_nearest_centre(const FiberLayout& layout, int width,
                                                       int height);

// Jittered hexagonal packing inside the FoV circle, deterministic per seed.
// Stands in for real bundle metadata: quasi-regular like an actual fibre
// bundle, with sub-pixel irregularity from the jitter.
inline FiberLayout generate_layout(double fov_radius, double mean_spacing, std::uint64_t seed) {
    if (!(fov_radius > mean_spacing && mean_spacing > 0.0))
        throw std::invalid_argument("generate_layout: need fov_radius > mean_spacing > 0");
    FiberLayout layout;
    layout.fov_radius = fov_radius;
    const double half = 0.5 * (fov_bbox_side(layout) - 1);
    layout.fov_centre = {half, half};

    Rng rng = Rng::stream(seed, /*purpose=*/0x1a9c);
    const double s = mean_spacing;
    const double row_h = s * std::sqrt(3.0) / 2.0;
    const double jit = 0.35 * s;
    const double r2 = fov_radius * fov_radius;
    const int jmax = static_cast<int>(std::ceil((fov_radius + s) / row_h));
    const int imax = static_cast<int>(std::ceil((fov_radius + s) / s)) + 1;

    std::unordered_set<std::int64_t> taken;
    for (int j = -jmax; j <= jmax; ++j)
        for (int i = -imax; i <= imax; ++i) {
            const double bx = (i + 0.5 * (j & 1)) * s;
            const double by = j * row_h;
            // re-draw the jitter when the rounded pixel is already taken, so
            // the binary mask stays unambiguous
            for (int attempt = 0; attempt < 10; ++attempt) {
                const double x = layout.fov_centre.x + bx + rng.uniform(-jit, jit);
                const double y = layout.fov_centre.y + by + rng.uniform(-jit, jit);
                const double dx = x - layout.fov_centre.x, dy = y - layout.fov_centre.y;
                if (dx * dx + dy * dy >= r2) break;  // outside: drop the node
                const std::int64_t key = (static_cast<std::int64_t>(round_to_pixel(x)) << 32) ^
                                         (static_cast<std::int64_t>(round_to_pixel(y)) & 0xffffffffll);
                if (taken.insert(key).second) {
                    layout.centres.push_back({x, y});
                    break;
                }
            }
        }
    if (layout.centres.size() < 3)
        throw std::runtime_error("generate_layout: parameters yield fewer than 3 fibres");

    // drop fibres whose Voronoi cell on the bounding-box grid would be empty
    // (rim fibres between the outermost in-circle pixel centres and the
    // circle, or the rare jittered near-coincident pair); keeping them would
    // break the downsampling contract that every fibre owns >= 1 pixel
    const int side = fov_bbox_side(layout);
    const std::vector<std::int32_t> owner = assign_nearest_centre(layout, side, side);
    std::vector<bool> occupied(layout.centres.size(), false);
    for (std::int32_t f : owner)
        if (f >= 0) occupied[f] = true;
    std::vector<Vec2> kept;
    for (std::size_t f = 0; f < layout.centres.size(); ++f)
        if (occupied[f]) kept.push_back(layout.centres[f]);
    layout.centres = std::move(kept);
    if (layout.centres.size() < 3)
        throw std::runtime_error("generate_layout: parameters yield fewer than 3 fibres");
    return layout;
}

// Nearest-centre owner of every in-FoV pixel (-1 outside the FoV circle).
// Distance ties go to the lowest fibre index. Bucketed ring search over the
// fibre set; exact, not approximate.
inline std::vector<std::int32_t> assign_nearest_centre(const FiberLayout& layout, int width,
                                                       int height) {
    const int n = static_cast<int>(layout.centres.size());
    if (n == 0) throw std::invalid_argument("assign_nearest_centre: empty layout");

    // fibre buckets; cell size tracks the mean fibre pitch
    const double cell =
        std::max(0.75, layout.fov_radius * std::sqrt(3.1415926535897932 / n) * 0.9);
    const int nx = static_cast<int>(std::floor(width / cell)) + 1;
    const int ny = static_cast<int>(std::floor(height / cell)) + 1;
    std::vector<std::vector<std::int32_t>> buckets(static_cast<std::size_t>(nx) * ny);
    for (std::int32_t f = 0; f < n; ++f) {
        const int gx = std::clamp(static_cast<int>(std::floor(layout.centres[f].x / cell)), 0, nx - 1);
        const int gy = std::clamp(static_cast<int>(std::floor(layout.centres[f].y / cell)), 0, ny - 1);
        buckets[static_cast<std::size_t>(gy) * nx + gx].push_back(f);
    }

    std::vector<std::int32_t> owner(static_cast<std::size_t>(width) * height, -1);
    const double fov_r2 = layout.fov_radius * layout.fov_radius;
    const int ring_max = std::max(nx, ny);
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            const double fdx = u - layout.fov_centre.x, fdy = v - layout.fov_centre.y;
            if (fdx * fdx + fdy * fdy > fov_r2) continue;  // outside the FoV
            const int gx = std::clamp(static_cast<int>(std::floor(u / cell)), 0, nx - 1);
            const int gy = std::clamp(static_cast<int>(std::floor(v / cell)), 0, ny - 1);
            double best_d2 = std::numeric_limits<double>::infinity();
            std::int32_t best_f = -1;
            for (int ring = 0; ring <= ring_max; ++ring) {
                if (ring > 0 && best_f >= 0) {
                    const double lb = (ring - 1) * cell;
                    if (best_d2 < lb * lb) break;  // no farther ring can beat or tie
                }
                const int y0 = gy - ring, y1 = gy + ring, x0 = gx - ring, x1 = gx + ring;
                for (int by = std::max(0, y0); by <= std::min(ny - 1, y1); ++by)
                    for (int bx = std::max(0, x0); bx <= std::min(nx - 1, x1); ++bx) {
                        if (ring > 0 && by != y0 && by != y1 && bx != x0 && bx != x1)
                            continue;  // interior cells were scanned in earlier rings
                        for (std::int32_t f : buckets[static_cast<std::size_t>(by) * nx + bx]) {
                            const double dx = u - layout.centres[f].x;
                            const double dy = v - layout.centres[f].y;
                            const double d2 = dx * dx + dy * dy;
                            if (d2 < best_d2 || (d2 == best_d2 && f < best_f)) {
                                best_d2 = d2;
                                best_f = f;
                            }
                        }
                    }
            }
            owner[static_cast<std::size_t>(v) * width + u] = best_f;
        }
    return owner;
}

// Per-fibre mean of the HR pixels in the fibre's Voronoi cell, over in-FoV
// pixel centres.
inline std::vector<double> voronoi_downsample(const CartesianImage& hr, const FiberLayout& layout) {
    const int n = static_cast<int>(layout.centres.size());
    for (const Vec2& c : layout.centres)
        if (c.x < -0.5 || c.x > hr.width - 0.5 || c.y < -0.5 || c.y > hr.height - 0.5)
            throw std::invalid_argument("voronoi_downsample: fibre centre outside image bounds");

    const std::vector<std::int32_t> owner = assign_nearest_centre(layout, hr.width, hr.height);
    std::vector<double> sums(n, 0.0);
    std::vector<std::int64_t> counts(n, 0);
    for (std::size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] < 0) continue;
        sums[owner[i]] += hr.pix[i];
        counts[owner[i]] += 1;
    }
    std::vector<double> signals(n);
    for (int f = 0; f < n; ++f) {
        if (counts[f] == 0)
            throw std::runtime_error("voronoi_downsample: fibre with an empty Voronoi cell");
        signals[f] = sums[f] / static_cast<double>(counts[f]);
    }
    return signals;
}

// s' = s*g + a with g ~ N(1, sigma_mult^2), a ~ N(0, sigma_add^2), drawn
// independently per fibre from the seeded stream.
inline std::vector<double> add_noise(const std::vector<double>& signals, const NoiseParams& params) {
    if (params.sigma_mult < 0.0 || params.sigma_add < 0.0)
        throw std::invalid_argument("add_noise: negative sigma");
    Rng rng = Rng::stream(params.seed, /*purpose=*/0x401e);
    std::vector<double> out(signals.size());
    for (std::size_t f = 0; f < signals.size(); ++f) {
        const double g = rng.normal(1.0, params.sigma_mult);
        const double a = rng.normal(0.0, params.sigma_add);
        out[f] = signals[f] * g + a;
    }
    return out;
}

struct LrFrame {
    CartesianImage lr;          // Delaunay-reconstructed noisy LR image
    SparseImage sparse;         // noisy signals embedded at nearest pixels
    std::vector<double> signals;
};

// Physically-inspired LR simulation: Voronoi signal loss, calibration +
// acquisition noise, then the clinical Delaunay reconstruction.
inline LrFrame simulate_lr(const CartesianImage& hr, const FiberLayout& layout,
                           const Triangulation& tri, const NoiseParams& params) {
    LrFrame out;
    out.signals = add_noise(voronoi_downsample(hr, layout), params);
    out.lr = interpolate_linear(out.signals, tri, hr.width, hr.height);
    out.sparse = sparsify(out.signals, layout, hr.width, hr.height);
    return out;
}

inline LrFrame simulate_lr(const CartesianImage& hr, const FiberLayout& layout,
                           const NoiseParams& params) {
    return simulate_lr(hr, layout, delaunay_triangulate(layout), params);
}

}  // namespace nwsr
