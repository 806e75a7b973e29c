#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nwsr/rng.hpp"
#include "nwsr/simulate.hpp"
#include "oracles.hpp"

using namespace nwsr;

namespace {
PngImage solid_rgb(int w, int h, double r, double g, double b) {
    PngImage img;
    img.width = w;
    img.height = h;
    img.channels = 3;
    img.data.resize(static_cast<std::size_t>(w) * h * 3);
    for (int i = 0; i < w * h; ++i) {
        img.data[3 * i] = r;
        img.data[3 * i + 1] = g;
        img.data[3 * i + 2] = b;
    }
    return img;
}

FiberLayout box_layout(double radius) {
    FiberLayout l;
    l.fov_radius = radius;
    const double half = 0.5 * (fov_bbox_side(l) - 1);
    l.fov_centre = {half, half};
    return l;
}
}  // namespace

TEST_CASE("grayscale conversion uses the 601 luma weights", "[simulate]") {
    CHECK(to_grayscale(solid_rgb(2, 2, 1, 1, 1)).at(0, 0) == Catch::Approx(1.0));
    CHECK(to_grayscale(solid_rgb(2, 2, 1, 0, 0)).at(0, 0) == Catch::Approx(0.299));
    CHECK(to_grayscale(solid_rgb(2, 2, 0.5, 0.5, 0.5)).at(0, 0) == Catch::Approx(0.5));
    PngImage gray;
    gray.width = gray.height = 2;
    gray.channels = 1;
    gray.data = {0, 0, 0, 0};
    CHECK_THROWS(to_grayscale(gray));
}

TEST_CASE("frame cropping counts match the per-axis formula", "[simulate]") {
    FiberLayout layout = box_layout(20.0);  // bounding box 40, stride 20

    const CartesianImage src100(100, 100, 0.3);
    CHECK(crop_frames(src100, layout).frames.size() == 16);  // 4 positions per axis

    const CartesianImage src_box(40, 40, 0.3);
    const VideoSequence one = crop_frames(src_box, layout);
    REQUIRE(one.frames.size() == 1);
    for (std::size_t i = 0; i < src_box.pix.size(); ++i)
        CHECK(one.frames[0].pix[i] == src_box.pix[i]);

    const CartesianImage src_tall(50, 100, 0.1);
    CHECK(crop_frames(src_tall, layout).frames.size() == 4);  // 1 x 4

    CHECK_THROWS(crop_frames(CartesianImage(39, 100), layout));

    // generic closed form on a random size
    const CartesianImage src(170, 130, 0.2);
    const auto frames = crop_frames(src, layout).frames.size();
    const auto per_axis = [](int len) { return (len - 40) / 20 + 1; };
    CHECK(frames == static_cast<std::size_t>(per_axis(170)) * per_axis(130));
}

TEST_CASE("generated layouts have hex-packing density and are reproducible", "[simulate]") {
    const FiberLayout a = generate_layout(30.0, 2.5, 7);
    CHECK(a.centres.size() >= 444);  // pi*30^2 / ((sqrt(3)/2)*2.5^2) ~ 522, +/- 15%
    CHECK(a.centres.size() <= 600);
    validate_layout(a);

    const FiberLayout b = generate_layout(30.0, 2.5, 7);
    REQUIRE(b.centres.size() == a.centres.size());
    for (std::size_t i = 0; i < a.centres.size(); ++i) {
        CHECK(a.centres[i].x == b.centres[i].x);
        CHECK(a.centres[i].y == b.centres[i].y);
    }

    const FiberLayout c = generate_layout(30.0, 2.5, 8);
    bool differs = c.centres.size() != a.centres.size();
    for (std::size_t i = 0; !differs && i < a.centres.size(); ++i)
        differs = a.centres[i].x != c.centres[i].x;
    CHECK(differs);

    CHECK_THROWS(generate_layout(2.0, 2.5, 1));
}

TEST_CASE("voronoi downsampling reduces constants to the constant", "[simulate]") {
    const FiberLayout layout = generate_layout(10.0, 2.0, 21);
    const int side = fov_bbox_side(layout);
    const CartesianImage hr(side, side, 0.4);
    for (double s : voronoi_downsample(hr, layout)) CHECK(s == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("two-fibre voronoi signals match the exhaustive partition means", "[simulate]") {
    FiberLayout layout;
    layout.fov_centre = {3.5, 2.0};
    layout.fov_radius = 20.0;  // covers the whole 8x5 grid
    layout.centres = {{1, 2}, {6, 2}};
    CartesianImage hr(8, 5);
    for (int v = 0; v < 5; ++v)
        for (int u = 0; u < 8; ++u) hr.at(u, v) = u / 7.0;
    const std::vector<double> got = voronoi_downsample(hr, layout);
    const std::vector<double> want = oracle::brute_voronoi_means(hr, layout);
    REQUIRE(got.size() == 2);
    CHECK(got[0] == want[0]);
    CHECK(got[1] == want[1]);
}

TEST_CASE("single-fibre voronoi signal is the in-FoV mean", "[simulate]") {
    FiberLayout layout;
    layout.fov_centre = {7.5, 7.5};
    layout.fov_radius = 6.0;
    layout.centres = {{7.0, 7.0}};
    CartesianImage hr(16, 16);
    Rng rng(2);
    for (double& p : hr.pix) p = rng.uniform(0.0, 1.0);
    double sum = 0.0;
    long n = 0;
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) {
            const double dx = u - 7.5, dy = v - 7.5;
            if (dx * dx + dy * dy <= 36.0) {
                sum += hr.at(u, v);
                ++n;
            }
        }
    const std::vector<double> got = voronoi_downsample(hr, layout);
    CHECK(got[0] == Catch::Approx(sum / n).margin(1e-12));
}

TEST_CASE("bucketed voronoi equals the brute-force oracle exactly on 64x64", "[simulate]") {
    const FiberLayout layout = generate_layout(30.0, 3.5, 17);
    CartesianImage hr(64, 64);
    Rng rng(18);
    for (double& p : hr.pix) p = rng.uniform(0.0, 1.0);
    // the oracle scans the same 64x64 grid; the layout's bbox is 60, inside
    const std::vector<double> got = voronoi_downsample(hr, layout);
    const std::vector<double> want = oracle::brute_voronoi_means(hr, layout);
    REQUIRE(got.size() == want.size());
    for (std::size_t f = 0; f < got.size(); ++f) CHECK(got[f] == want[f]);
}

TEST_CASE("voronoi cells partition the in-FoV pixels", "[simulate]") {
    const FiberLayout layout = generate_layout(14.0, 2.5, 5);
    const int side = fov_bbox_side(layout);
    const std::vector<int> owner = oracle::brute_nearest_centre(layout, side, side);
    long in_fov = 0;
    std::vector<long> cell_counts(layout.centres.size(), 0);
    for (int o : owner)
        if (o >= 0) {
            ++in_fov;
            ++cell_counts[o];
        }
    long total = 0;
    for (long c : cell_counts) {
        CHECK(c >= 1);
        total += c;
    }
    CHECK(total == in_fov);
}

TEST_CASE("zero-sigma noise is the identity and seeds are reproducible", "[simulate]") {
    const std::vector<double> s = {0.1, 0.5, 0.9, 0.0, 0.77};
    const std::vector<double> out = add_noise(s, NoiseParams{0.0, 0.0, 123});
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(out[i] == s[i]);

    const std::vector<double> a = add_noise(s, NoiseParams{0.1, 0.05, 9});
    const std::vector<double> b = add_noise(s, NoiseParams{0.1, 0.05, 9});
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(a[i] == b[i]);
    const std::vector<double> c = add_noise(s, NoiseParams{0.1, 0.05, 10});
    CHECK(a != c);
}

TEST_CASE("noise sample statistics sit inside the CLT bounds", "[simulate]") {
    const std::vector<double> ones(100000, 1.0);
    const std::vector<double> noisy = add_noise(ones, NoiseParams{0.1, 0.0, 2024});
    double mean = 0.0;
    for (double x : noisy) mean += x;
    mean /= noisy.size();
    double var = 0.0;
    for (double x : noisy) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / noisy.size());
    CHECK(std::abs(mean - 1.0) < 0.002);  // 5 sigma of 0.1/sqrt(1e5)
    CHECK(std::abs(sd - 0.1) < 0.005);
}

TEST_CASE("simulate_lr composes the pipeline and preserves constants", "[simulate]") {
    const FiberLayout layout = generate_layout(12.0, 2.0, 31);
    const Triangulation tri = delaunay_triangulate(layout);
    const int side = fov_bbox_side(layout);
    const CartesianImage hr(side, side, 0.55);

    const LrFrame f = simulate_lr(hr, layout, tri, NoiseParams{0.0, 0.0, 1});
    CHECK(f.lr.width == hr.width);
    CHECK(f.lr.height == hr.height);
    // constants survive averaging + linear interpolation inside the hull
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) {
            double l1, l2;
            if (tri.locate(u, v, l1, l2) >= 0)
                CHECK(f.lr.at(u, v) == Catch::Approx(0.55).margin(1e-9));
        }
    // the sparse image carries exactly one signal per fibre
    double msum = 0.0;
    for (double m : f.sparse.M.val) msum += m;
    CHECK(msum == static_cast<double>(layout.centres.size()));

    // determinism: the full frame is a pure function of the seed
    const LrFrame g = simulate_lr(hr, layout, tri, NoiseParams{0.1, 0.05, 5});
    const LrFrame h = simulate_lr(hr, layout, tri, NoiseParams{0.1, 0.05, 5});
    CHECK(g.lr.pix == h.lr.pix);
    CHECK(g.signals == h.signals);
}

TEST_CASE("zero-noise LR tracks HR at fibre pixels within the cell-size bound", "[simulate]") {
    const FiberLayout layout = generate_layout(12.0, 2.0, 31);
    const Triangulation tri = delaunay_triangulate(layout);
    const int side = fov_bbox_side(layout);
    CartesianImage hr(side, side);
    const double ax = 0.02, ay = 0.013;
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) hr.at(u, v) = 0.1 + ax * u + ay * v;

    const LrFrame f = simulate_lr(hr, layout, tri, NoiseParams{0.0, 0.0, 0});
    // Voronoi cell radius is bounded by the largest pixel-to-owner distance
    const std::vector<int> owner = oracle::brute_nearest_centre(layout, side, side);
    double max_cell_radius = 0.0;
    for (int v = 0; v < side; ++v)
        for (int u = 0; u < side; ++u) {
            const int o = owner[static_cast<std::size_t>(v) * side + u];
            if (o < 0) continue;
            const double dx = u - layout.centres[o].x, dy = v - layout.centres[o].y;
            max_cell_radius = std::max(max_cell_radius, std::sqrt(dx * dx + dy * dy));
        }
    const double bound = 2.0 * (ax + ay) * max_cell_radius;  // averaging + interpolation slack
    for (std::size_t i = 0; i < layout.centres.size(); ++i) {
        const int u = round_to_pixel(layout.centres[i].x);
        const int v = round_to_pixel(layout.centres[i].y);
        double l1, l2;
        if (tri.locate(u, v, l1, l2) < 0) continue;
        CHECK(std::abs(f.lr.at(u, v) - hr.at(u, v)) <= bound);
    }
}
