#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nwsr/checkpoint.hpp"
#include "nwsr/config.hpp"
#include "nwsr/delaunay.hpp"
#include "nwsr/image.hpp"
#include "nwsr/iqa.hpp"
#include "nwsr/patches.hpp"
#include "nwsr/png_io.hpp"
#include "nwsr/rng.hpp"
#include "nwsr/simulate.hpp"
#include "nwsr/train.hpp"

namespace nwsr {

namespace fs = std::filesystem;

inline std::string fmt_num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

inline std::string frame_name(const char* prefix, int i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.png", prefix, i);
    return buf;
}

inline std::vector<fs::path> list_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

// Deterministic multi-scale test texture: smooth sinusoidal bands plus
// Gaussian blobs, min-max scaled into [0.05, 0.95]. Stands in for a source
// photograph when none is at hand.
inline CartesianImage synth_texture(int width, int height, std::uint64_t seed) {
    if (width < 8 || height < 8) throw std::invalid_argument("synth_texture: size too small");
    Rng rng = Rng::stream(seed, 0x7e47u);
    CartesianImage img(width, height);

    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < 10; ++k) {
        const double wavelength = rng.uniform(6.0, 64.0);
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        waves.push_back(Wave{std::cos(angle) / wavelength, std::sin(angle) / wavelength,
                             rng.uniform(0.0, 6.28318530717958648), rng.uniform(0.2, 1.0)});
    }
    struct Blob {
        double x, y, r, amp;
    };
    std::vector<Blob> blobs;
    for (int k = 0; k < 24; ++k)
        blobs.push_back(Blob{rng.uniform(0.0, width - 1.0), rng.uniform(0.0, height - 1.0),
                             rng.uniform(3.0, 22.0),
                             rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0)});

    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u) {
            double x = 0.0;
            for (const Wave& wv : waves)
                x += wv.amp * std::sin(6.28318530717958648 * (wv.fx * u + wv.fy * v) + wv.phase);
            for (const Blob& b : blobs) {
                const double dx = u - b.x, dy = v - b.y;
                x += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.r * b.r));
            }
            img.at(u, v) = x;
        }
    const auto [mn, mx] = std::minmax_element(img.pix.begin(), img.pix.end());
    const double lo = *mn, hi = *mx;
    for (double& p : img.pix) p = 0.05 + 0.9 * (p - lo) / (hi - lo);
    return img;
}

struct SimulateSummary {
    int frames = 0;
    int side = 0;
    std::size_t fibres = 0;
    std::vector<std::string> artifacts;
};

// Full simulation of one source image into a video directory:
// grayscale source -> FoV-bounding-box crops -> FoV-masked HR frames ->
// Voronoi signal loss + noise -> Delaunay LR + sparse/mask artifacts.
// Per-frame noise streams are derived from (seed, frame index).
inline SimulateSummary simulate_video_to_dir(const CartesianImage& gray,
                                             const FiberLayout& layout,
                                             const NoiseParams& noise,
                                             const std::string& out_dir) {
    validate_layout(layout);
    fs::create_directories(out_dir);
    VideoSequence video = crop_frames(gray, layout);
    const Triangulation tri = delaunay_triangulate(layout);

    SimulateSummary sum;
    sum.side = fov_bbox_side(layout);
    sum.fibres = layout.centres.size();
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        const CartesianImage hr = apply_fov_mask(video.frames[i], layout);
        NoiseParams frame_noise = noise;
        frame_noise.seed = Rng::stream(noise.seed, 0xf7a3eu, i).next_u64();
        const LrFrame lr = simulate_lr(hr, layout, tri, frame_noise);

        const int fi = static_cast<int>(i);
        const auto save = [&](const CartesianImage& img, const char* prefix) {
            const std::string name = frame_name(prefix, fi);
            save_png(img, out_dir + "/" + name, 16);
            sum.artifacts.push_back(name);
        };
        save(hr, "hr");
        save(lr.lr, "lr");
        save(lr.sparse.S, "sparse");
        CartesianImage mask_img(lr.sparse.M.width, lr.sparse.M.height);
        mask_img.pix = lr.sparse.M.val;
        const std::string mask_name = frame_name("mask", fi);
        save_png(mask_img, out_dir + "/" + mask_name, 8);
        sum.artifacts.push_back(mask_name);
        ++sum.frames;
    }
    save_layout_csv(layout, out_dir + "/layout.csv");
    sum.artifacts.push_back("layout.csv");
    return sum;
}

// Load a simulated video directory back into normalized frames.
inline std::vector<FrameData> load_frames(const std::string& data_dir, FiberLayout* layout_out = nullptr) {
    const FiberLayout layout = load_layout_csv(data_dir + "/layout.csv");
    if (layout_out) *layout_out = layout;
    std::vector<FrameData> frames;
    for (int i = 0;; ++i) {
        const std::string hr_path = data_dir + "/" + frame_name("hr", i);
        if (!fs::exists(hr_path)) break;
        const CartesianImage hr_raw = load_png_gray(hr_path);
        const CartesianImage lr_raw = load_png_gray(data_dir + "/" + frame_name("lr", i));
        const CartesianImage sp_raw = load_png_gray(data_dir + "/" + frame_name("sparse", i));
        const CartesianImage mk_raw = load_png_gray(data_dir + "/" + frame_name("mask", i));

        FrameData fd;
        NormalizedPair np = normalize_frame(lr_raw, hr_raw);
        fd.stats = np.stats;
        fd.lr = std::move(np.lr);
        fd.hr = std::move(np.hr);
        SparseImage sp;
        sp.S = sp_raw;
        sp.M = Mask(mk_raw.width, mk_raw.height);
        for (std::size_t p = 0; p < mk_raw.pix.size(); ++p)
            sp.M.val[p] = mk_raw.pix[p] >= 0.5 ? 1.0 : 0.0;
        fd.sparse = apply_norm(sp, fd.stats);
        frames.push_back(std::move(fd));
    }
    if (frames.empty()) throw std::runtime_error("load_frames: no frames in " + data_dir);
    return frames;
}

inline std::vector<FrameData> load_frames_multi(const std::vector<std::string>& dirs) {
    std::vector<FrameData> all;
    for (const std::string& d : dirs) {
        std::vector<FrameData> part = load_frames(d);
        for (auto& f : part) all.push_back(std::move(f));
    }
    return all;
}

struct TrainSummary {
    NetworkDescriptor desc;
    int best_member = 0;
    double best_val = 0.0;
    std::size_t train_patches = 0, val_patches = 0;
    int test_frames = 0;
    std::vector<std::string> artifacts;
};

inline void write_history_csv(const std::vector<HistoryEntry>& history, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_history_csv: cannot open " + path);
    f << "iteration,member,lr,train_loss,val_loss\n";
    for (const HistoryEntry& h : history)
        f << h.iteration << ',' << h.member << ',' << fmt_num(h.lr) << ','
          << fmt_num(h.train_loss) << ',' << fmt_num(h.val_loss) << "\n";
}

// Train one model variant with PBT per the run config, then render the test
// frames with the best member. Artifacts: model.{json,bin}, history.csv,
// sr/*.png (model outputs) and ref/*.png (normalized HR targets).
inline TrainSummary train_run(const RunConfig& cfg, TrainMode mode, const std::string& out_dir,
                              PBTResult* result_out = nullptr) {
    const int patch = static_cast<int>(cfg.get_int("patch", 64));

    NetworkDescriptor desc;
    desc.arch = (mode == TrainMode::nw) ? Arch::nwnet_sr : Arch::cnnnet_sr;
    desc.blocks = static_cast<int>(cfg.get_int("blocks", 16));
    desc.filters = static_cast<int>(cfg.get_int("filters", 64));
    desc.nw_depth = (mode == TrainMode::nw) ? static_cast<int>(cfg.get_int("nw_depth", 3)) : 0;
    desc.eps = cfg.get_double("eps", 1e-8);

    PBTConfig pbt;
    pbt.population = static_cast<int>(cfg.get_int("population", 6));
    pbt.iterations = static_cast<int>(cfg.get_int("iterations", 100));
    pbt.perturbation_interval = static_cast<int>(cfg.get_int("interval", 20));
    pbt.epochs_per_iteration = static_cast<int>(cfg.get_int("epochs_per_iteration", 1));
    pbt.batch = static_cast<int>(cfg.get_int("batch", 16));
    pbt.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    if (cfg.has("lr_grid")) pbt.lr_grid = cfg.get_double_list("lr_grid");

    const std::vector<FrameData> train_frames = load_frames_multi(cfg.get_list("train_dirs"));
    const std::vector<FrameData> val_frames = load_frames_multi(cfg.get_list("val_dirs"));
    const PatchSet train_set = extract_patches(train_frames, mode, patch);
    const PatchSet val_set = extract_patches(val_frames, mode, patch);

    PBTResult result = pbt_run(pbt, desc, train_set, val_set);

    fs::create_directories(out_dir);
    write_history_csv(result.history, out_dir + "/history.csv");
    Network best = build_network(desc);
    restore_params(best, result.best_params);
    save_checkpoint(best, out_dir + "/model");

    TrainSummary sum;
    sum.desc = desc;
    sum.best_member = result.best_member;
    sum.best_val = result.best_val;
    sum.train_patches = train_set.items.size();
    sum.val_patches = val_set.items.size();
    sum.artifacts = {"history.csv", "model.json", "model.bin"};

    const std::vector<std::string> test_dirs = cfg.get_list("test_dirs");
    if (!test_dirs.empty()) {
        fs::create_directories(out_dir + "/sr");
        fs::create_directories(out_dir + "/ref");
        int i = 0;
        for (const FrameData& fd : load_frames_multi(test_dirs)) {
            const Tensor y = best.forward(frame_input(fd, mode));
            save_png(to_image(y), out_dir + "/sr/" + frame_name("sr", i), 16);
            save_png(fd.hr, out_dir + "/ref/" + frame_name("hr", i), 16);
            ++i;
        }
        sum.test_frames = i;
        sum.artifacts.push_back("sr/");
        sum.artifacts.push_back("ref/");
    }
    if (result_out) *result_out = std::move(result);
    return sum;
}

// Reconstruct one frame from a signals CSV (one value per line, fibre order)
// and a layout; raw intensity domain.
inline std::vector<double> load_signals_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_signals_csv: cannot open " + path);
    std::vector<double> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(std::stod(line));
    }
    return out;
}

inline double default_nw_sigma(const FiberLayout& layout) {
    return 0.7 * mean_nn_spacing(layout);
}

// Batch baseline reconstruction over simulated video directories, in the
// normalized evaluation domain: sr/*.png (reconstruction) and ref/*.png
// (normalized HR), mirroring train_run's layout so `eval` treats trained
// models and baselines uniformly.
inline int reconstruct_batch(const std::vector<std::string>& data_dirs, const std::string& method,
                             double sigma, const std::string& out_dir) {
    if (data_dirs.empty()) throw std::invalid_argument("reconstruct_batch: no data directories");
    const bool gauss = method == "nwgauss";
    if (!gauss && method != "delaunay")
        throw std::invalid_argument("reconstruct_batch: unknown method '" + method + "'");
    fs::create_directories(out_dir + "/sr");
    fs::create_directories(out_dir + "/ref");

    int i = 0;
    for (const std::string& data_dir : data_dirs) {
        FiberLayout layout;
        const std::vector<FrameData> frames = load_frames(data_dir, &layout);
        const double sg = sigma > 0.0 ? sigma : default_nw_sigma(layout);
        for (const FrameData& fd : frames) {
            CartesianImage recon;
            if (gauss) {
                // recover the per-fibre signals from the (normalized) sparse image
                std::vector<double> signals(layout.centres.size());
                for (std::size_t f = 0; f < layout.centres.size(); ++f)
                    signals[f] = fd.sparse.S.at(round_to_pixel(layout.centres[f].x),
                                                round_to_pixel(layout.centres[f].y));
                recon = nw_gaussian_reconstruct(signals, layout, sg, fd.hr.width, fd.hr.height);
            } else {
                recon = fd.lr;  // the Delaunay reconstruction, already normalized
            }
            save_png(recon, out_dir + "/sr/" + frame_name("sr", i), 16);
            save_png(fd.hr, out_dir + "/ref/" + frame_name("hr", i), 16);
            ++i;
        }
    }
    return i;
}

inline int reconstruct_batch(const std::string& data_dir, const std::string& method, double sigma,
                             const std::string& out_dir) {
    return reconstruct_batch(std::vector<std::string>{data_dir}, method, sigma, out_dir);
}

// Evaluate an SR directory against a reference directory (paired by sorted
// file order) and write the report CSV.
inline IQAReport eval_run(const std::string& sr_dir, const std::string& hr_dir,
                          const std::string& out_csv) {
    const std::vector<fs::path> sr_files = list_pngs(sr_dir);
    const std::vector<fs::path> hr_files = list_pngs(hr_dir);
    if (sr_files.empty() || sr_files.size() != hr_files.size())
        throw std::runtime_error("eval: directories are empty or frame counts differ");
    std::vector<CartesianImage> sr, hr;
    for (std::size_t i = 0; i < sr_files.size(); ++i) {
        sr.push_back(load_png_gray(sr_files[i].string()));
        hr.push_back(load_png_gray(hr_files[i].string()));
    }
    const IQAReport rep = evaluate_video(sr, hr, 1.0);

    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("eval: cannot open " + out_csv);
    f << "frame,psnr_db,ssim\n";
    for (std::size_t i = 0; i < sr.size(); ++i)
        f << sr_files[i].stem().string() << ',' << fmt_num(rep.frame_psnr[i]) << ','
          << fmt_num(rep.frame_ssim[i]) << "\n";
    f << "mean," << fmt_num(rep.psnr_mean) << ',' << fmt_num(rep.ssim_mean) << "\n";
    f << "std," << fmt_num(rep.psnr_std) << ',' << fmt_num(rep.ssim_std) << "\n";
    f << "inf_psnr_frames," << rep.inf_psnr_frames << ",\n";
    return rep;
}

struct MethodScore {
    std::string name;
    double ssim_mean = 0.0, ssim_std = 0.0;
    double psnr_mean = 0.0, psnr_std = 0.0;
};

inline MethodScore parse_report_summary(const std::string& name, const std::string& report_csv) {
    std::ifstream f(report_csv);
    if (!f) throw std::runtime_error("compare: cannot open " + report_csv);
    MethodScore s;
    s.name = name;
    std::string line;
    bool have_mean = false, have_std = false;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        if (field != "mean" && field != "std") continue;
        std::string p, q;
        std::getline(ss, p, ',');
        std::getline(ss, q, ',');
        if (field == "mean") {
            s.psnr_mean = std::stod(p);
            s.ssim_mean = std::stod(q);
            have_mean = true;
        } else {
            s.psnr_std = std::stod(p);
            s.ssim_std = std::stod(q);
            have_std = true;
        }
    }
    if (!have_mean || !have_std)
        throw std::runtime_error("compare: no summary rows in " + report_csv);
    return s;
}

// Method comparison table (one row per method, SSIM and PSNR as mean +/- std).
inline std::string compare_run(const std::vector<std::pair<std::string, std::string>>& reports,
                               const std::string& out_csv) {
    if (reports.size() < 2) throw std::invalid_argument("compare: need at least two reports");
    std::vector<MethodScore> scores;
    for (const auto& [name, path] : reports) scores.push_back(parse_report_summary(name, path));

    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("compare: cannot open " + out_csv);
    f << "method,ssim_mean,ssim_std,psnr_mean,psnr_std\n";
    for (const MethodScore& s : scores)
        f << s.name << ',' << fmt_num(s.ssim_mean) << ',' << fmt_num(s.ssim_std) << ','
          << fmt_num(s.psnr_mean) << ',' << fmt_num(s.psnr_std) << "\n";

    std::ostringstream table;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s  %-18s  %-18s\n", "model name", "SSIM", "PSNR");
    table << buf;
    for (const MethodScore& s : scores) {
        std::snprintf(buf, sizeof(buf), "%-12s  %6.3f +/- %-7.3f  %6.2f +/- %-7.2f\n",
                      s.name.c_str(), s.ssim_mean, s.ssim_std, s.psnr_mean, s.psnr_std);
        table << buf;
    }
    return table.str();
}

// Side-by-side qualitative grid (e.g. HR | LR | INTER | NWGAUSS | model) for
// one frame index from each directory.
inline void write_grid_png(const std::vector<std::string>& dirs, int frame_index,
                           const std::string& out_png) {
    if (dirs.empty()) throw std::invalid_argument("grid: no input directories");
    std::vector<CartesianImage> tiles;
    for (const std::string& d : dirs) {
        const auto files = list_pngs(d);
        if (frame_index < 0 || frame_index >= static_cast<int>(files.size()))
            throw std::runtime_error("grid: frame index out of range for " + d);
        tiles.push_back(load_png_gray(files[frame_index].string()));
    }
    const int h = tiles[0].height;
    int w_total = 0;
    for (const auto& t : tiles) {
        if (t.height != h) throw std::runtime_error("grid: tile heights differ");
        w_total += t.width + 2;
    }
    w_total -= 2;
    CartesianImage grid(w_total, h, 1.0);
    int x0 = 0;
    for (const auto& t : tiles) {
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < t.width; ++u) grid.at(x0 + u, v) = t.at(u, v);
        x0 += t.width + 2;
    }
    save_png(grid, out_png, 8);
}

}  // namespace nwsr
