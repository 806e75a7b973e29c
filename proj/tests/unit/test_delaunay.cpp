#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "nwsr/delaunay.hpp"
#include "nwsr/rng.hpp"
#include "nwsr/simulate.hpp"
#include "oracles.hpp"

using namespace nwsr;

TEST_CASE("three non-collinear points give one triangle", "[delaunay]") {
    const Triangulation tri = delaunay_triangulate({{0, 0}, {4, 0}, {1, 3}});
    CHECK(tri.triangles.size() == 1);
}

TEST_CASE("a square gives two triangles sharing a diagonal", "[delaunay]") {
    const Triangulation tri = delaunay_triangulate({{0, 0}, {2, 0}, {2, 2}, {0, 2}});
    CHECK(tri.triangles.size() == 2);  // cocircular: either diagonal is valid
}

TEST_CASE("collinear input is rejected", "[delaunay]") {
    CHECK_THROWS(delaunay_triangulate({{0, 0}, {1, 1}, {2, 2}, {3, 3}}));
}

TEST_CASE("planar Euler identity holds for 200 random points", "[delaunay]") {
    Rng rng(61);
    std::vector<Vec2> pts;
    for (int i = 0; i < 200; ++i) pts.push_back({rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)});
    const Triangulation tri = delaunay_triangulate(pts);
    const int hull = oracle::brute_hull_size(pts);
    CHECK(static_cast<int>(tri.triangles.size()) == 2 * 200 - 2 - hull);
}

TEST_CASE("no vertex lies strictly inside any circumcircle", "[delaunay]") {
    const FiberLayout layout = generate_layout(20.0, 2.5, 3);
    const Triangulation tri = delaunay_triangulate(layout);
    double worst = 0.0;
    for (const auto& t : tri.triangles)
        for (std::size_t i = 0; i < tri.vertices.size(); ++i) {
            if (static_cast<int>(i) == t.a || static_cast<int>(i) == t.b ||
                static_cast<int>(i) == t.c)
                continue;
            const double dx = tri.vertices[i].x - t.ccx, dy = tri.vertices[i].y - t.ccy;
            worst = std::max(worst, (t.ccr2 - (dx * dx + dy * dy)) / t.ccr2);
        }
    CHECK(worst < 1e-9);
}

TEST_CASE("linear interpolation is exact on affine fields", "[delaunay]") {
    const FiberLayout layout = generate_layout(15.0, 2.0, 5);
    const Triangulation tri = delaunay_triangulate(layout);
    std::vector<double> sig(layout.centres.size());
    for (std::size_t i = 0; i < sig.size(); ++i)
        sig[i] = 0.3 * layout.centres[i].x + 0.1 * layout.centres[i].y + 0.2;
    const int side = fov_bbox_side(layout);
    const CartesianImage rec = interpolate_linear(sig, tri, side, side);
    double max_err = 0.0;
    int in_hull = 0;
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) {
            double l1, l2;
            if (tri.locate(u, v, l1, l2) < 0) {
                CHECK(rec.at(u, v) == 0.0);  // outside the hull
                continue;
            }
            ++in_hull;
            max_err = std::max(max_err, std::abs(rec.at(u, v) - (0.3 * u + 0.1 * v + 0.2)));
        }
    CHECK(in_hull > 100);
    CHECK(max_err < 1e-9);
}

TEST_CASE("interpolation stays inside its triangle's signal range", "[delaunay]") {
    const FiberLayout layout = generate_layout(12.0, 2.0, 8);
    const Triangulation tri = delaunay_triangulate(layout);
    Rng rng(9);
    std::vector<double> sig(layout.centres.size());
    for (double& s : sig) s = rng.uniform(0.0, 1.0);
    const int side = fov_bbox_side(layout);
    const CartesianImage rec = interpolate_linear(sig, tri, side, side);
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) {
            double l1, l2;
            const int ti = tri.locate(u, v, l1, l2);
            if (ti < 0) continue;
            const auto& t = tri.triangles[ti];
            const double lo = std::min({sig[t.a], sig[t.b], sig[t.c]});
            const double hi = std::max({sig[t.a], sig[t.b], sig[t.c]});
            CHECK(rec.at(u, v) >= lo - 1e-9);
            CHECK(rec.at(u, v) <= hi + 1e-9);
        }
}

TEST_CASE("constant signals reconstruct to the constant in the hull", "[delaunay]") {
    const FiberLayout layout = generate_layout(10.0, 2.0, 2);
    const Triangulation tri = delaunay_triangulate(layout);
    const std::vector<double> sig(layout.centres.size(), 0.7);
    const int side = fov_bbox_side(layout);
    const CartesianImage rec = interpolate_linear(sig, tri, side, side);
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) {
            double l1, l2;
            if (tri.locate(u, v, l1, l2) >= 0)
                CHECK(rec.at(u, v) == Catch::Approx(0.7).margin(1e-12));
        }
}

TEST_CASE("a pixel coincident with a vertex returns that vertex's signal", "[delaunay]") {
    // centres include exact integer positions
    const std::vector<Vec2> pts = {{3, 3}, {9, 4}, {5, 9}, {2, 7}, {8, 8}};
    const Triangulation tri = delaunay_triangulate(pts);
    const std::vector<double> sig = {0.11, 0.42, 0.73, 0.24, 0.95};
    const CartesianImage rec = interpolate_linear(sig, tri, 12, 12);
    CHECK(rec.at(3, 3) == sig[0]);
    CHECK(rec.at(9, 4) == sig[1]);
    CHECK(rec.at(5, 9) == sig[2]);
}

TEST_CASE("both reconstructors are invariant to fibre permutation", "[delaunay]") {
    const FiberLayout layout = generate_layout(10.0, 2.0, 13);
    Rng rng(14);
    std::vector<double> sig(layout.centres.size());
    for (double& s : sig) s = rng.uniform(0.0, 1.0);

    std::vector<std::size_t> perm(layout.centres.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    FiberLayout shuffled = layout;
    std::vector<double> sig_shuffled(sig.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.centres[i] = layout.centres[perm[i]];
        sig_shuffled[i] = sig[perm[i]];
    }

    const int side = fov_bbox_side(layout);
    const CartesianImage a =
        interpolate_linear(sig, delaunay_triangulate(layout), side, side);
    const CartesianImage b =
        interpolate_linear(sig_shuffled, delaunay_triangulate(shuffled), side, side);
    for (std::size_t i = 0; i < a.pix.size(); ++i)
        CHECK(a.pix[i] == Catch::Approx(b.pix[i]).margin(1e-9));

    const CartesianImage ga = nw_gaussian_reconstruct(sig, layout, 1.4, side, side);
    const CartesianImage gb = nw_gaussian_reconstruct(sig_shuffled, shuffled, 1.4, side, side);
    for (std::size_t i = 0; i < ga.pix.size(); ++i)
        CHECK(ga.pix[i] == Catch::Approx(gb.pix[i]).margin(1e-12));
}

TEST_CASE("Gaussian NW reconstruction basics", "[delaunay]") {
    FiberLayout layout;
    layout.fov_centre = {8, 8};
    layout.fov_radius = 8;
    layout.centres = {{4, 8}, {12, 8}};
    // constant signals reproduce the constant wherever a fibre is in range
    CartesianImage rec = nw_gaussian_reconstruct({0.6, 0.6}, layout, 1.5, 16, 16);
    int covered = 0;
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) {
            if (rec.at(u, v) == 0.0) continue;
            CHECK(rec.at(u, v) == Catch::Approx(0.6).margin(1e-12));
            ++covered;
        }
    CHECK(covered > 0);

    // a pixel equidistant from two fibres averages their signals
    rec = nw_gaussian_reconstruct({0.2, 0.8}, layout, 2.0, 16, 16);
    CHECK(rec.at(8, 8) == Catch::Approx(0.5).margin(1e-12));

    // single fibre: its signal everywhere within 3 sigma, zero beyond
    FiberLayout one;
    one.fov_centre = {8, 8};
    one.fov_radius = 8;
    one.centres = {{8.0, 8.0}};
    rec = nw_gaussian_reconstruct({0.37}, one, 1.0, 16, 16);
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) {
            const double d2 = (u - 8.0) * (u - 8.0) + (v - 8.0) * (v - 8.0);
            if (d2 <= 9.0)
                CHECK(rec.at(u, v) == Catch::Approx(0.37).margin(1e-12));
            else
                CHECK(rec.at(u, v) == 0.0);
        }

    // reconstruction never leaves the signal range
    const FiberLayout big = generate_layout(10.0, 2.0, 4);
    Rng rng(77);
    std::vector<double> sig(big.centres.size());
    for (double& s : sig) s = rng.uniform(0.2, 0.9);
    rec = nw_gaussian_reconstruct(sig, big, 1.4, fov_bbox_side(big), fov_bbox_side(big));
    const double lo = *std::min_element(sig.begin(), sig.end());
    const double hi = *std::max_element(sig.begin(), sig.end());
    for (double p : rec.pix) {
        if (p == 0.0) continue;
        CHECK(p >= lo - 1e-12);
        CHECK(p <= hi + 1e-12);
    }

    CHECK_THROWS(nw_gaussian_reconstruct(sig, big, 0.0, 8, 8));
}
