#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "nwsr/adam.hpp"
#include "nwsr/gradcheck.hpp"
#include "nwsr/patches.hpp"
#include "nwsr/rng.hpp"
#include "nwsr/simulate.hpp"
#include "nwsr/train.hpp"

using namespace nwsr;

TEST_CASE("first Adam step moves each coordinate by about lr", "[train]") {
    std::vector<double> params = {1.0, -2.0, 0.5};
    const std::vector<double> grads = {0.3, -4.0, 1e-3};
    AdamState st(3, 0.01);
    adam_step(params, grads, st);
    // bias-corrected m/sqrt(v) is sign(g) at step one
    CHECK(params[0] == Catch::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(params[1] == Catch::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(params[2] == Catch::Approx(0.5 - 0.01).epsilon(1e-4));
}

TEST_CASE("zero gradients leave parameters unchanged while moments decay", "[train]") {
    // fresh state: zero gradient means zero update
    std::vector<double> params = {0.7, -0.1};
    AdamState st(2, 0.05);
    adam_step(params, {0.0, 0.0}, st);
    CHECK(params[0] == 0.7);
    CHECK(params[1] == -0.1);

    // once moments exist, zero-gradient steps decay them geometrically
    adam_step(params, {0.2, -0.4}, st);
    const std::vector<double> m1 = st.m;
    adam_step(params, {0.0, 0.0}, st);
    CHECK(st.m[0] == Catch::Approx(0.9 * m1[0]));
    CHECK(st.m[1] == Catch::Approx(0.9 * m1[1]));
    CHECK(std::abs(st.m[0]) < std::abs(m1[0]));
}

TEST_CASE("network Adam steps are deterministic and keep NW kernels L1-normalized",
          "[train]") {
    auto run = [](std::uint64_t seed) {
        Network net = build_nwnet_sr(1, 4, 2);
        Rng rng(seed);
        net.init_params(rng);
        AdamState st(net.param_count(), 1e-3);
        FeatureStack in = nwsr::detail::random_sparse_stack(rng, 1, 16, 16);
        Tensor g(1, 16, 16);
        for (double& x : g.v) x = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < 3; ++i) {
            net.zero_grad();
            net.forward(in);
            net.backward(g);
            adam_step(net, st);
        }
        return dump_params(net);
    };
    const std::vector<double> a = run(11), b = run(11), c = run(12);
    CHECK(a == b);
    CHECK(a != c);

    Network net = build_nwnet_sr(1, 4, 2);
    restore_params(net, a);
    for (const auto& layer : net.nw_head) {
        const int per = layer.weights_per_channel();
        for (int t = 0; t < layer.t_out; ++t) {
            double l1 = 0.0;
            for (int i = 0; i < per; ++i) l1 += std::abs(layer.W[t * per + i]);
            CHECK(l1 == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

namespace {
std::vector<FrameData> synthetic_frames(int count, int side, std::uint64_t seed) {
    const FiberLayout layout = generate_layout(side / 2.0, 2.5, seed);
    const Triangulation tri = delaunay_triangulate(layout);
    std::vector<FrameData> frames;
    Rng rng(seed + 1);
    for (int i = 0; i < count; ++i) {
        CartesianImage hr(fov_bbox_side(layout), fov_bbox_side(layout));
        for (double& p : hr.pix) p = rng.uniform(0.0, 1.0);
        hr = apply_fov_mask(hr, layout);
        const LrFrame lf = simulate_lr(hr, layout, tri, NoiseParams{0.1, 0.05, seed + 10 + i});
        FrameData fd;
        NormalizedPair np = normalize_frame(lf.lr, hr);
        fd.stats = np.stats;
        fd.lr = std::move(np.lr);
        fd.hr = std::move(np.hr);
        fd.sparse = apply_norm(lf.sparse, fd.stats);
        frames.push_back(std::move(fd));
    }
    return frames;
}
}  // namespace

TEST_CASE("patch extraction tiles without overlap and drops partial tiles", "[train]") {
    std::vector<FrameData> frames;
    FrameData fd;
    fd.hr = CartesianImage(128, 128, 0.5);
    fd.lr = CartesianImage(128, 128, 0.25);
    fd.sparse.S = CartesianImage(128, 128);
    fd.sparse.M = Mask(128, 128);
    frames.push_back(fd);
    CHECK(extract_patches(frames, TrainMode::cart, 64).items.size() == 4);

    frames[0].hr = CartesianImage(100, 100, 0.5);
    frames[0].lr = CartesianImage(100, 100, 0.25);
    frames[0].sparse.S = CartesianImage(100, 100);
    frames[0].sparse.M = Mask(100, 100);
    CHECK(extract_patches(frames, TrainMode::cart, 64).items.size() == 1);

    frames[0].hr = CartesianImage(63, 63);
    frames[0].lr = CartesianImage(63, 63);
    frames[0].sparse.S = CartesianImage(63, 63);
    frames[0].sparse.M = Mask(63, 63);
    CHECK_THROWS(extract_patches(frames, TrainMode::cart, 64));
}

TEST_CASE("sparse patches carry exactly the fibres that fall in each tile", "[train]") {
    const FiberLayout layout = generate_layout(40.0, 3.0, 3);
    const int side = fov_bbox_side(layout);
    std::vector<double> sig(layout.centres.size(), 1.0);
    FrameData fd;
    fd.sparse = sparsify(sig, layout, side, side);
    fd.hr = CartesianImage(side, side, 0.5);
    fd.lr = CartesianImage(side, side, 0.25);
    const PatchSet set = extract_patches({fd}, TrainMode::nw, 64);

    // recount fibres per tile from the layout
    const int tiles_per_axis = side / 64;
    std::map<std::pair<int, int>, int> tile_count;
    for (const Vec2& c : layout.centres) {
        const int tx = round_to_pixel(c.x) / 64;
        const int ty = round_to_pixel(c.y) / 64;
        if (tx < tiles_per_axis && ty < tiles_per_axis) ++tile_count[{ty, tx}];
    }
    REQUIRE(set.items.size() == static_cast<std::size_t>(tiles_per_axis * tiles_per_axis));
    std::size_t idx = 0;
    for (int ty = 0; ty < tiles_per_axis; ++ty)
        for (int tx = 0; tx < tiles_per_axis; ++tx, ++idx) {
            double ones = 0.0;
            for (double m : set.items[idx].input.mask.v) ones += m;
            CHECK(ones == static_cast<double>(tile_count[{ty, tx}]));
        }
}

TEST_CASE("dense and sparse extraction share tile origins", "[train]") {
    const std::vector<FrameData> frames = synthetic_frames(1, 140, 5);
    const PatchSet dense = extract_patches(frames, TrainMode::cart, 64);
    const PatchSet sparse = extract_patches(frames, TrainMode::nw, 64);
    REQUIRE(dense.items.size() == sparse.items.size());
    for (std::size_t i = 0; i < dense.items.size(); ++i)
        CHECK(dense.items[i].target.v == sparse.items[i].target.v);
}

TEST_CASE("PBT mechanics: history, bitwise exploit copies, monotone minimum", "[train]") {
    const std::vector<FrameData> frames = synthetic_frames(3, 80, 7);
    const PatchSet train_set = extract_patches(frames, TrainMode::cart, 32);
    const PatchSet val_set = extract_patches({frames.back()}, TrainMode::cart, 32);

    PBTConfig cfg;
    cfg.population = 4;
    cfg.iterations = 4;
    cfg.perturbation_interval = 2;
    cfg.lr_grid = {1e-2, 1e-3, 1e-4, 1e-5};
    cfg.batch = 4;
    cfg.seed = 99;
    const NetworkDescriptor desc{Arch::cnnnet_sr, 1, 4, 0, 0.0};

    int exploit_checks = 0;
    const ExploitObserver observer = [&](const ExploitEvent& ev,
                                         const std::vector<double>& member,
                                         const std::vector<double>& source) {
        CHECK(member == source);  // copy semantics are bitwise
        CHECK(ev.member != ev.source);
        ++exploit_checks;
    };
    const PBTResult res = pbt_run(cfg, desc, train_set, val_set, observer);

    CHECK(res.history.size() == static_cast<std::size_t>(cfg.iterations * cfg.population));
    std::map<int, int> per_member;
    for (const auto& h : res.history) ++per_member[h.member];
    for (const auto& [member, count] : per_member) CHECK(count == cfg.iterations);

    CHECK(exploit_checks > 0);
    REQUIRE(!res.events.empty());
    for (const auto& ev : res.events) CHECK(ev.post_min_val <= ev.pre_min_val + 1e-15);

    // learning rates only ever move by the explore factors
    for (const auto& ev : res.events) {
        CHECK(ev.iteration % cfg.perturbation_interval == 0);
        CHECK(ev.iteration < cfg.iterations);
    }
}

TEST_CASE("PBT is a pure function of its seed", "[train]") {
    const std::vector<FrameData> frames = synthetic_frames(2, 64, 13);
    const PatchSet train_set = extract_patches(frames, TrainMode::cart, 32);
    PBTConfig cfg;
    cfg.population = 2;
    cfg.iterations = 2;
    cfg.perturbation_interval = 1;
    cfg.lr_grid = {1e-3, 1e-4};
    cfg.batch = 2;
    cfg.seed = 5;
    const NetworkDescriptor desc{Arch::cnnnet_sr, 1, 4, 0, 0.0};
    const PBTResult a = pbt_run(cfg, desc, train_set, train_set);
    const PBTResult b = pbt_run(cfg, desc, train_set, train_set);
    CHECK(a.best_params == b.best_params);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
        CHECK(a.history[i].lr == b.history[i].lr);
    }
}

TEST_CASE("a population of one degenerates to plain training", "[train]") {
    const std::vector<FrameData> frames = synthetic_frames(2, 64, 17);
    const PatchSet train_set = extract_patches(frames, TrainMode::cart, 32);
    PBTConfig cfg;
    cfg.population = 1;
    cfg.iterations = 2;
    cfg.perturbation_interval = 1;
    cfg.lr_grid = {1e-3};
    cfg.batch = 4;
    cfg.seed = 21;
    const NetworkDescriptor desc{Arch::cnnnet_sr, 1, 4, 0, 0.0};
    const PBTResult res = pbt_run(cfg, desc, train_set, train_set);
    CHECK(res.events.empty());
    CHECK(res.history.size() == 2);
    CHECK(res.best_member == 0);

    PatchSet empty;
    CHECK_THROWS(pbt_run(cfg, desc, empty, train_set));
    cfg.perturbation_interval = 3;  // does not divide iterations
    CHECK_THROWS(pbt_run(cfg, desc, train_set, train_set));
}
