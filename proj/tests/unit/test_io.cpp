#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "nwsr/checkpoint.hpp"
#include "nwsr/config.hpp"
#include "nwsr/image.hpp"
#include "nwsr/network.hpp"
#include "nwsr/png_io.hpp"
#include "nwsr/rng.hpp"
#include "nwsr/simulate.hpp"

using namespace nwsr;
namespace fs = std::filesystem;

namespace {
std::string tmp_dir() {
    static int counter = 0;
    const std::string d = (fs::temp_directory_path() / ("nwsr_io_" + std::to_string(counter++))).string();
    fs::create_directories(d);
    return d;
}
}  // namespace

TEST_CASE("16-bit grayscale PNG round trip is exact at quantization level", "[io]") {
    const std::string dir = tmp_dir();
    Rng rng(5);
    CartesianImage img(20, 13);
    for (double& p : img.pix) p = rng.uniform(0.0, 1.0);
    save_png(img, dir + "/x.png", 16);
    const CartesianImage back = load_png_gray(dir + "/x.png");
    REQUIRE(back.width == 20);
    REQUIRE(back.height == 13);
    for (std::size_t i = 0; i < img.pix.size(); ++i)
        CHECK(back.pix[i] == Catch::Approx(img.pix[i]).margin(0.5 / 65535.0 + 1e-12));
}

TEST_CASE("PNG writer clamps only at the file boundary", "[io]") {
    const std::string dir = tmp_dir();
    CartesianImage img(12, 12, 0.5);
    img.at(0, 0) = -0.25;
    img.at(1, 0) = 1.75;
    save_png(img, dir + "/c.png", 16);
    const CartesianImage back = load_png_gray(dir + "/c.png");
    CHECK(back.at(0, 0) == 0.0);
    CHECK(back.at(1, 0) == 1.0);
    CHECK(back.at(5, 5) == Catch::Approx(0.5).margin(1e-4));
}

TEST_CASE("layout CSV round trip preserves every centre bit-exactly", "[io]") {
    const std::string dir = tmp_dir();
    const FiberLayout layout = generate_layout(12.0, 2.0, 9);
    save_layout_csv(layout, dir + "/layout.csv");
    const FiberLayout back = load_layout_csv(dir + "/layout.csv");
    REQUIRE(back.centres.size() == layout.centres.size());
    CHECK(back.fov_radius == layout.fov_radius);
    CHECK(back.fov_centre.x == layout.fov_centre.x);
    for (std::size_t i = 0; i < layout.centres.size(); ++i) {
        CHECK(back.centres[i].x == layout.centres[i].x);
        CHECK(back.centres[i].y == layout.centres[i].y);
    }
}

TEST_CASE("checkpoint round trip restores parameters bit-exactly", "[io]") {
    const std::string dir = tmp_dir();
    Network net = build_nwnet_sr(2, 6, 2);
    Rng rng(33);
    net.init_params(rng);
    save_checkpoint(net, dir + "/model");

    Network back = load_checkpoint(dir + "/model");
    CHECK(back.desc == net.desc);
    const std::vector<double> a = dump_params(net);
    const std::vector<double> b = dump_params(back);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("run config parses keys, lists and comments", "[io]") {
    const RunConfig cfg = RunConfig::parse(
        "# run profile\n"
        "blocks = 4\n"
        "filters=16\n"
        "lr_grid = 1e-2, 1e-3 ,1e-4\n"
        "train_dirs = a/b, c/d\n"
        "alpha = 0.84\n");
    CHECK(cfg.get_int("blocks", 0) == 4);
    CHECK(cfg.get_int("filters", 0) == 16);
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK(cfg.get_double("alpha", 0) == 0.84);
    const auto grid = cfg.get_double_list("lr_grid");
    REQUIRE(grid.size() == 3);
    CHECK(grid[1] == 1e-3);
    const auto dirs = cfg.get_list("train_dirs");
    REQUIRE(dirs.size() == 2);
    CHECK(dirs[0] == "a/b");
    CHECK_THROWS(RunConfig::parse("not a key value line\n"));
}
