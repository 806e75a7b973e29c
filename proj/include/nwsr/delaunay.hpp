#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nwsr/image.hpp"
#include "nwsr/parallel.hpp"

namespace nwsr {

// Delaunay triangulation of fibre centres with cached barycentric transforms
// and a bucket grid for point location. Built once per layout, then shared
// read-only by per-pixel evaluation.
struct Triangulation {
    struct Triangle {
        int a = 0, b = 0, c = 0;  // vertex indices, counter-clockwise
        // circumcircle (for the Delaunay-property validation)
        double ccx = 0, ccy = 0, ccr2 = 0;
        // barycentric transform: l1 = m11*(x-x3) + m12*(y-y3), l2 = m21*.. + m22*..
        double x3 = 0, y3 = 0, m11 = 0, m12 = 0, m21 = 0, m22 = 0;
    };

    std::vector<Vec2> vertices;
    std::vector<Triangle> triangles;

    // point-location grid
    double grid_x0 = 0, grid_y0 = 0, grid_cell = 1;
    int grid_nx = 0, grid_ny = 0;
    std::vector<std::vector<std::int32_t>> grid;

    // Containing triangle for (x, y), ties broken toward the lower triangle
    // index; -1 when outside the convex hull. Barycentric coordinates are
    // returned through l1/l2 (l3 = 1 - l1 - l2).
    int locate(double x, double y, double& l1, double& l2) const {
        constexpr double tol = 1e-9;
        int cx = static_cast<int>(std::floor((x - grid_x0) / grid_cell));
        int cy = static_cast<int>(std::floor((y - grid_y0) / grid_cell));
        if (cx < 0 || cy < 0 || cx >= grid_nx || cy >= grid_ny) return -1;
        for (std::int32_t ti : grid[static_cast<std::size_t>(cy) * grid_nx + cx]) {
            const Triangle& t = triangles[ti];
            const double dx = x - t.x3, dy = y - t.y3;
            const double a = t.m11 * dx + t.m12 * dy;
            const double b = t.m21 * dx + t.m22 * dy;
            if (a >= -tol && b >= -tol && 1.0 - a - b >= -tol) {
                l1 = a;
                l2 = b;
                return ti;
            }
        }
        return -1;
    }
};

namespace detail {

struct BwTriangle {
    int a, b, c;
    double ccx, ccy, ccr2;
    bool alive = true;
};

inline BwTriangle make_bw_triangle(const std::vector<Vec2>& pts, int ia, int ib, int ic) {
    Vec2 A = pts[ia], B = pts[ib], C = pts[ic];
    // counter-clockwise orientation
    const double area2 = (B.x - A.x) * (C.y - A.y) - (B.y - A.y) * (C.x - A.x);
    if (area2 < 0.0) std::swap(ib, ic), std::swap(B, C);
    const double bx = B.x - A.x, by = B.y - A.y;
    const double cx = C.x - A.x, cy = C.y - A.y;
    const double d = 2.0 * (bx * cy - by * cx);
    BwTriangle t{ia, ib, ic, 0, 0, 0};
    if (d == 0.0) {
        // exactly collinear triple: give it an all-consuming circumcircle so
        // any later insertion removes it
        t.ccx = A.x;
        t.ccy = A.y;
        t.ccr2 = std::numeric_limits<double>::infinity();
        return t;
    }
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    const double ux = (cy * b2 - by * c2) / d;
    const double uy = (bx * c2 - cx * b2) / d;
    t.ccx = A.x + ux;
    t.ccy = A.y + uy;
    t.ccr2 = ux * ux + uy * uy;
    return t;
}

inline bool in_circumcircle(const BwTriangle& t, const Vec2& p) {
    if (std::isinf(t.ccr2)) return true;
    const double dx = p.x - t.ccx, dy = p.y - t.ccy;
    // strictly inside, with a relative guard so cocircular points are not
    // treated as violations (either square diagonal is then acceptable)
    return dx * dx + dy * dy < t.ccr2 * (1.0 - 1e-12);
}

}  // namespace detail

inline Triangulation delaunay_triangulate(const std::vector<Vec2>& points) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw std::invalid_argument("delaunay_triangulate: need >= 3 points");

    // working vertex list with the three super-triangle corners appended
    std::vector<Vec2> pts = points;
    double minx = points[0].x, maxx = points[0].x, miny = points[0].y, maxy = points[0].y;
    for (const Vec2& p : points) {
        minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1.0});
    const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
    const double big = 1e4 * span;
    pts.push_back({cx - big, cy - 0.6 * big});
    pts.push_back({cx + big, cy - 0.6 * big});
    pts.push_back({cx, cy + big});

    std::vector<detail::BwTriangle> tris;
    tris.push_back(detail::make_bw_triangle(pts, n, n + 1, n + 2));

    std::vector<int> bad;
    std::map<std::pair<int, int>, std::pair<int, int>> boundary;  // undirected -> directed
    for (int ip = 0; ip < n; ++ip) {
        const Vec2 p = pts[ip];
        bad.clear();
        for (int ti = 0; ti < static_cast<int>(tris.size()); ++ti)
            if (tris[ti].alive && detail::in_circumcircle(tris[ti], p)) bad.push_back(ti);
        if (bad.empty())
            throw std::runtime_error("delaunay_triangulate: duplicate or degenerate input point");

        // cavity boundary: edges of bad triangles not shared by two of them
        boundary.clear();
        auto toggle = [&boundary](int u, int v) {
            const auto key = std::minmax(u, v);
            auto it = boundary.find(key);
            if (it == boundary.end())
                boundary.emplace(key, std::make_pair(u, v));
            else
                boundary.erase(it);
        };
        for (int ti : bad) {
            toggle(tris[ti].a, tris[ti].b);
            toggle(tris[ti].b, tris[ti].c);
            toggle(tris[ti].c, tris[ti].a);
            tris[ti].alive = false;
        }
        for (const auto& [key, edge] : boundary)
            tris.push_back(detail::make_bw_triangle(pts, edge.first, edge.second, ip));
    }

    Triangulation out;
    out.vertices = points;
    for (const detail::BwTriangle& t : tris) {
        if (!t.alive || t.a >= n || t.b >= n || t.c >= n) continue;
        Triangulation::Triangle tri;
        tri.a = t.a;
        tri.b = t.b;
        tri.c = t.c;
        tri.ccx = t.ccx;
        tri.ccy = t.ccy;
        tri.ccr2 = t.ccr2;
        const Vec2 &A = points[t.a], &B = points[t.b], &C = points[t.c];
        const double det = (B.y - C.y) * (A.x - C.x) + (C.x - B.x) * (A.y - C.y);
        if (det == 0.0) continue;  // zero-area sliver cannot contain any pixel
        tri.x3 = C.x;
        tri.y3 = C.y;
        tri.m11 = (B.y - C.y) / det;
        tri.m12 = (C.x - B.x) / det;
        tri.m21 = (C.y - A.y) / det;
        tri.m22 = (A.x - C.x) / det;
        out.triangles.push_back(tri);
    }
    if (out.triangles.empty())
        throw std::runtime_error("delaunay_triangulate: degenerate (collinear) input");

    // bucket grid over the triangle bounding boxes; candidate lists stay in
    // ascending triangle order so the lower index wins containment ties
    out.grid_x0 = minx;
    out.grid_y0 = miny;
    const double target_cells = 2.0 * static_cast<double>(out.triangles.size());
    const double area = std::max((maxx - minx) * (maxy - miny), 1e-12);
    out.grid_cell = std::max(std::sqrt(area / target_cells), 1e-6);
    out.grid_nx = static_cast<int>(std::floor((maxx - minx) / out.grid_cell)) + 1;
    out.grid_ny = static_cast<int>(std::floor((maxy - miny) / out.grid_cell)) + 1;
    out.grid.assign(static_cast<std::size_t>(out.grid_nx) * out.grid_ny, {});
    for (std::int32_t ti = 0; ti < static_cast<std::int32_t>(out.triangles.size()); ++ti) {
        const auto& t = out.triangles[ti];
        const Vec2 &A = points[t.a], &B = points[t.b], &C = points[t.c];
        const int x0 = std::clamp(
            static_cast<int>(std::floor((std::min({A.x, B.x, C.x}) - minx) / out.grid_cell)), 0,
            out.grid_nx - 1);
        const int x1 = std::clamp(
            static_cast<int>(std::floor((std::max({A.x, B.x, C.x}) - minx) / out.grid_cell)), 0,
            out.grid_nx - 1);
        const int y0 = std::clamp(
            static_cast<int>(std::floor((std::min({A.y, B.y, C.y}) - miny) / out.grid_cell)), 0,
            out.grid_ny - 1);
        const int y1 = std::clamp(
            static_cast<int>(std::floor((std::max({A.y, B.y, C.y}) - miny) / out.grid_cell)), 0,
            out.grid_ny - 1);
        for (int gy = y0; gy <= y1; ++gy)
            for (int gx = x0; gx <= x1; ++gx)
                out.grid[static_cast<std::size_t>(gy) * out.grid_nx + gx].push_back(ti);
    }
    return out;
}

inline Triangulation delaunay_triangulate(const FiberLayout& layout) {
    return delaunay_triangulate(layout.centres);
}

// Piecewise-linear reconstruction: each pixel centre inside the convex hull
// gets the barycentric combination of its triangle's vertex signals; pixels
// outside the hull are 0.
inline CartesianImage interpolate_linear(const std::vector<double>& signals,
                                         const Triangulation& tri, int width, int height) {
    if (signals.size() != tri.vertices.size())
        throw std::invalid_argument("interpolate_linear: one signal per vertex required");
    CartesianImage out(width, height);
    parallel_for(0, height, [&](std::int64_t v) {
        for (int u = 0; u < width; ++u) {
            double l1, l2;
            const int ti = tri.locate(u, v, l1, l2);
            if (ti < 0) continue;
            const auto& t = tri.triangles[ti];
            out.at(u, static_cast<int>(v)) =
                l1 * signals[t.a] + l2 * signals[t.b] + (1.0 - l1 - l2) * signals[t.c];
        }
    });
    return out;
}

// Classical Nadaraya-Watson reconstruction with one handcrafted Gaussian
// kernel, truncated at 3*sigma. Pixels with no fibre in range are 0.
inline CartesianImage nw_gaussian_reconstruct(const std::vector<double>& signals,
                                              const FiberLayout& layout, double sigma, int width,
                                              int height) {
    if (!(sigma > 0.0)) throw std::invalid_argument("nw_gaussian_reconstruct: sigma must be > 0");
    if (signals.size() != layout.centres.size())
        throw std::invalid_argument("nw_gaussian_reconstruct: one signal per fibre required");
    const double reach = 3.0 * sigma;
    const double reach2 = reach * reach;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

    // fibre bucket grid with cell size = reach, so a pixel only scans the
    // 3x3 cell neighbourhood around it
    const double cell = reach;
    const int nx = static_cast<int>(std::floor(width / cell)) + 1;
    const int ny = static_cast<int>(std::floor(height / cell)) + 1;
    std::vector<std::vector<std::int32_t>> buckets(static_cast<std::size_t>(nx) * ny);
    for (std::int32_t f = 0; f < static_cast<std::int32_t>(layout.centres.size()); ++f) {
        const int gx = std::clamp(static_cast<int>(std::floor(layout.centres[f].x / cell)), 0, nx - 1);
        const int gy = std::clamp(static_cast<int>(std::floor(layout.centres[f].y / cell)), 0, ny - 1);
        buckets[static_cast<std::size_t>(gy) * nx + gx].push_back(f);
    }

    CartesianImage out(width, height);
    parallel_for(0, height, [&](std::int64_t vv) {
        const int v = static_cast<int>(vv);
        for (int u = 0; u < width; ++u) {
            const int gx = std::clamp(static_cast<int>(std::floor(u / cell)), 0, nx - 1);
            const int gy = std::clamp(static_cast<int>(std::floor(v / cell)), 0, ny - 1);
            double num = 0.0, den = 0.0;
            for (int by = std::max(0, gy - 1); by <= std::min(ny - 1, gy + 1); ++by)
                for (int bx = std::max(0, gx - 1); bx <= std::min(nx - 1, gx + 1); ++bx)
                    for (std::int32_t f : buckets[static_cast<std::size_t>(by) * nx + bx]) {
                        const double dx = u - layout.centres[f].x;
                        const double dy = v - layout.centres[f].y;
                        const double d2 = dx * dx + dy * dy;
                        if (d2 > reach2) continue;
                        const double k = std::exp(-d2 * inv2s2);
                        num += signals[f] * k;
                        den += k;
                    }
            if (den > 0.0) out.at(u, v) = num / den;
        }
    });
    return out;
}

}  // namespace nwsr
