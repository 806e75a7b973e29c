// Command-line front end: simulate synthetic endomicroscopy data, run the
// baseline reconstructions, train the SR models with PBT, evaluate, and
// compare. Every artifact-producing command records a manifest that `rerun`
// can replay byte-identically.

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nwsr/gradcheck.hpp"
#include "nwsr/manifest.hpp"
#include "nwsr/parallel.hpp"
#include "nwsr/pipeline.hpp"
#include "nwsr/version.hpp"

namespace {

using nwsr::RunManifest;

// flag combinations CLI11 cannot express; reported with usage exit status 2
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run_cli(const std::vector<std::string>& args);

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

nwsr::FiberLayout resolve_layout(const std::string& spec) {
    if (spec.rfind("gen:", 0) == 0) {
        double radius = 0, spacing = 0;
        unsigned long long seed = 0;
        if (std::sscanf(spec.c_str(), "gen:%lf,%lf,%llu", &radius, &spacing, &seed) != 3)
            throw std::runtime_error("layout spec must be gen:radius,spacing,seed or a CSV path");
        return nwsr::generate_layout(radius, spacing, seed);
    }
    return nwsr::load_layout_csv(spec);
}

void parse_size(const std::string& s, int& w, int& h) {
    if (std::sscanf(s.c_str(), "%dx%d", &w, &h) != 2 || w < 1 || h < 1)
        throw std::runtime_error("size must be WxH");
}

int cmd_simulate(const std::string& input, const std::string& layout_spec, double sigma_mult,
                 double sigma_add, std::uint64_t seed, const std::string& out_dir,
                 const std::vector<std::string>& argv) {
    Timer timer;
    const nwsr::PngImage src = nwsr::load_png(input);
    nwsr::CartesianImage gray;
    if (src.channels == 3) {
        gray = nwsr::to_grayscale(src);
    } else {
        gray = nwsr::CartesianImage(src.width, src.height);
        gray.pix = src.data;
    }
    const nwsr::FiberLayout layout = resolve_layout(layout_spec);
    nwsr::NoiseParams noise{sigma_mult, sigma_add, seed};
    const nwsr::SimulateSummary sum = nwsr::simulate_video_to_dir(gray, layout, noise, out_dir);

    RunManifest m;
    m.command = "simulate";
    m.argv = argv;
    m.extra["seed"] = seed;
    m.extra["sigma_mult"] = sigma_mult;
    m.extra["sigma_add"] = sigma_add;
    m.extra["frames"] = sum.frames;
    m.extra["fibres"] = sum.fibres;
    m.extra["frame_side"] = sum.side;
    m.extra["artifacts"] = sum.artifacts;
    m.wall_clock_sec = timer.seconds();
    nwsr::write_manifest(m, out_dir + "/manifest.json");
    std::cout << "simulate: " << sum.frames << " frames of " << sum.side << "x" << sum.side
              << " from " << sum.fibres << " fibres -> " << out_dir << "\n";
    return 0;
}

int cmd_reconstruct_single(const std::string& method, const std::string& signals_csv,
                           const std::string& layout_csv, const std::string& size,
                           double sigma, const std::string& out_png) {
    const nwsr::FiberLayout layout = nwsr::load_layout_csv(layout_csv);
    const std::vector<double> signals = nwsr::load_signals_csv(signals_csv);
    int w = 0, h = 0;
    parse_size(size, w, h);
    nwsr::CartesianImage recon;
    if (method == "delaunay") {
        recon = nwsr::interpolate_linear(signals, nwsr::delaunay_triangulate(layout), w, h);
    } else if (method == "nwgauss") {
        const double sg = sigma > 0.0 ? sigma : nwsr::default_nw_sigma(layout);
        recon = nwsr::nw_gaussian_reconstruct(signals, layout, sg, w, h);
    } else {
        throw std::runtime_error("method must be delaunay or nwgauss");
    }
    nwsr::save_png(recon, out_png, 16);
    std::cout << "reconstruct: " << method << " -> " << out_png << "\n";
    return 0;
}

int cmd_reconstruct_batch(const std::string& method, const std::string& data_dir, double sigma,
                          const std::string& out_dir, const std::vector<std::string>& argv) {
    Timer timer;
    std::vector<std::string> dirs;
    std::istringstream ss(data_dir);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) dirs.push_back(item);
    const int frames = nwsr::reconstruct_batch(dirs, method, sigma, out_dir);
    RunManifest m;
    m.command = "reconstruct";
    m.argv = argv;
    m.extra["method"] = method;
    m.extra["frames"] = frames;
    m.extra["artifacts"] = {"sr/", "ref/"};
    m.wall_clock_sec = timer.seconds();
    nwsr::write_manifest(m, out_dir + "/manifest.json");
    std::cout << "reconstruct: " << method << " over " << frames << " frames -> " << out_dir
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& mode_name,
              const std::string& out_dir, const std::vector<std::string>& argv) {
    Timer timer;
    const nwsr::RunConfig cfg = nwsr::RunConfig::load(config_path);
    const nwsr::TrainMode mode = nwsr::train_mode_from_name(mode_name);
    const nwsr::TrainSummary sum = nwsr::train_run(cfg, mode, out_dir);

    RunManifest m;
    m.command = "train";
    m.argv = argv;
    m.extra["mode"] = mode_name;
    m.extra["config_file"] = config_path;
    m.extra["config_snapshot"] = cfg.raw_text();
    m.extra["seed"] = cfg.get_int("seed", 0);
    m.extra["arch"] = nwsr::arch_name(sum.desc.arch);
    m.extra["best_member"] = sum.best_member;
    m.extra["best_val_loss"] = sum.best_val;
    m.extra["train_patches"] = sum.train_patches;
    m.extra["val_patches"] = sum.val_patches;
    m.extra["test_frames"] = sum.test_frames;
    m.extra["artifacts"] = sum.artifacts;
    m.wall_clock_sec = timer.seconds();
    nwsr::write_manifest(m, out_dir + "/manifest.json");
    std::cout << "train: mode=" << mode_name << " best_member=" << sum.best_member
              << " best_val_loss=" << nwsr::fmt_num(sum.best_val) << " -> " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& sr_dir, const std::string& hr_dir, const std::string& out_csv,
             const std::vector<std::string>& argv) {
    Timer timer;
    const nwsr::IQAReport rep = nwsr::eval_run(sr_dir, hr_dir, out_csv);
    RunManifest m;
    m.command = "eval";
    m.argv = argv;
    m.extra["frames"] = rep.frame_psnr.size();
    m.extra["psnr_mean"] = rep.psnr_mean;
    m.extra["ssim_mean"] = rep.ssim_mean;
    m.extra["artifacts"] = {out_csv};
    m.wall_clock_sec = timer.seconds();
    nwsr::write_manifest(m, out_csv + ".manifest.json");
    std::cout << "eval: " << rep.frame_psnr.size() << " frames, PSNR "
              << nwsr::fmt_num(rep.psnr_mean) << " +/- " << nwsr::fmt_num(rep.psnr_std)
              << " dB, SSIM " << nwsr::fmt_num(rep.ssim_mean) << " +/- "
              << nwsr::fmt_num(rep.ssim_std) << " -> " << out_csv << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& entries, const std::string& out_csv,
                const std::vector<std::string>& argv) {
    Timer timer;
    std::vector<std::pair<std::string, std::string>> reports;
    for (const std::string& e : entries) {
        const auto eq = e.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("compare entries must be NAME=report.csv");
        reports.emplace_back(e.substr(0, eq), e.substr(eq + 1));
    }
    const std::string table = nwsr::compare_run(reports, out_csv);
    std::cout << table;
    RunManifest m;
    m.command = "compare";
    m.argv = argv;
    m.extra["methods"] = reports.size();
    m.extra["artifacts"] = {out_csv};
    m.wall_clock_sec = timer.seconds();
    nwsr::write_manifest(m, out_csv + ".manifest.json");
    return 0;
}

int cmd_gradcheck(const std::string& layer, int cin, int t, int k, std::uint64_t seed,
                  const std::string& arch, int blocks, int filters, int nw_depth) {
    nwsr::GradCheckResult r;
    if (layer == "nw") {
        r = nwsr::gradcheck_nw(cin, t, k, seed);
    } else if (layer == "conv") {
        r = nwsr::gradcheck_conv(cin, t, k, seed);
    } else if (layer == "loss") {
        r = nwsr::gradcheck_loss(seed);
    } else if (layer == "network") {
        nwsr::NetworkDescriptor d;
        d.arch = nwsr::arch_from_name(arch);
        d.blocks = blocks;
        d.filters = filters;
        d.nw_depth = nw_depth;
        r = nwsr::gradcheck_network(d, seed);
    } else {
        throw std::runtime_error("layer must be nw, conv, loss or network");
    }
    std::printf("gradcheck %s: max_rel_err=%.3e over %zu coordinates\n", layer.c_str(),
                r.max_rel_err, r.checked);
    return 0;
}

int cmd_synth(const std::string& size, std::uint64_t seed, const std::string& out_png) {
    int w = 0, h = 0;
    parse_size(size, w, h);
    nwsr::save_png(nwsr::synth_texture(w, h, seed), out_png, 16);
    std::cout << "synth: " << w << "x" << h << " seed " << seed << " -> " << out_png << "\n";
    return 0;
}

int cmd_grid(const std::vector<std::string>& dirs, int frame, const std::string& out_png) {
    nwsr::write_grid_png(dirs, frame, out_png);
    std::cout << "grid: frame " << frame << " of " << dirs.size() << " directories -> "
              << out_png << "\n";
    return 0;
}

// Re-execute a recorded command with its output target redirected.
int cmd_rerun(const std::string& manifest_path, const std::string& out_dir,
              const std::string& out_file) {
    const nlohmann::json j = nwsr::load_manifest(manifest_path);
    std::vector<std::string> argv = j.at("argv").get<std::vector<std::string>>();
    auto replace_after = [&argv](const std::string& flag, const std::string& value) {
        for (std::size_t i = 0; i + 1 < argv.size(); ++i)
            if (argv[i] == flag) {
                argv[i + 1] = value;
                return true;
            }
        return false;
    };
    if (!out_dir.empty() && !replace_after("--out-dir", out_dir))
        throw std::runtime_error("rerun: recorded command has no --out-dir to override");
    if (!out_file.empty() && !replace_after("--out", out_file))
        throw std::runtime_error("rerun: recorded command has no --out to override");
    return run_cli(argv);
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Fibre-bundle image reconstruction and super-resolution workbench"};
    app.set_version_flag("--version", std::string(nwsr::kToolName) + " " + nwsr::kVersion);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (default: hardware concurrency)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthesize HR/LR video data from a source image");
    std::string sim_input, sim_layout, sim_out;
    double sim_sm = 0.1, sim_sa = 0.05;
    std::uint64_t sim_seed = 0;
    sim->add_option("--input", sim_input, "source PNG (RGB or grayscale)")->required();
    sim->add_option("--layout", sim_layout, "layout CSV or gen:radius,spacing,seed")->required();
    sim->add_option("--sigma-mult", sim_sm, "multiplicative noise std");
    sim->add_option("--sigma-add", sim_sa, "additive noise std");
    sim->add_option("--seed", sim_seed, "noise seed");
    sim->add_option("--out-dir", sim_out, "output directory")->required();

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "baseline reconstruction (Delaunay / NW Gauss)");
    std::string rec_method, rec_signals, rec_layout, rec_size, rec_out, rec_data, rec_outdir;
    double rec_sigma = 0.0;
    rec->add_option("--method", rec_method, "delaunay | nwgauss")->required();
    rec->add_option("--signals", rec_signals, "signals CSV (one value per fibre line)");
    rec->add_option("--layout", rec_layout, "layout CSV");
    rec->add_option("--size", rec_size, "output size WxH");
    rec->add_option("--out", rec_out, "output PNG (single-frame mode)");
    rec->add_option("--data-dir", rec_data, "simulated video directory (batch mode)");
    rec->add_option("--out-dir", rec_outdir, "output directory (batch mode)");
    rec->add_option("--sigma", rec_sigma, "NW Gaussian sigma (default 0.7 * mean spacing)");

    // train
    auto* trn = app.add_subcommand("train", "train a model variant with PBT");
    std::string trn_cfg, trn_mode, trn_out;
    trn->add_option("--config", trn_cfg, "key = value run configuration")->required();
    trn->add_option("--mode", trn_mode, "cart | sparse | nw")->required();
    trn->add_option("--out-dir", trn_out, "output directory")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "PSNR/SSIM report for an SR directory vs a reference");
    std::string ev_sr, ev_hr, ev_out;
    ev->add_option("--sr-dir", ev_sr, "SR/reconstruction directory")->required();
    ev->add_option("--hr-dir", ev_hr, "reference directory")->required();
    ev->add_option("--out", ev_out, "report CSV path")->required();

    // compare
    auto* cmp = app.add_subcommand("compare", "method comparison table from eval reports");
    std::vector<std::string> cmp_entries;
    std::string cmp_out;
    cmp->add_option("reports", cmp_entries, "NAME=report.csv entries")->required()->expected(-2);
    cmp->add_option("--out", cmp_out, "comparison CSV path")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_layer = "nw", gc_arch = "nwnet_sr";
    int gc_cin = 1, gc_t = 2, gc_k = 1, gc_blocks = 2, gc_filters = 8, gc_depth = 2;
    std::uint64_t gc_seed = 0;
    gc->add_option("--layer", gc_layer, "nw | conv | loss | network")->required();
    gc->add_option("--cin", gc_cin, "input channels");
    gc->add_option("--t", gc_t, "output channels");
    gc->add_option("--k", gc_k, "kernel half width");
    gc->add_option("--seed", gc_seed, "rng seed");
    gc->add_option("--arch", gc_arch, "network arch for --layer network");
    gc->add_option("--blocks", gc_blocks, "residual blocks for --layer network");
    gc->add_option("--filters", gc_filters, "trunk width for --layer network");
    gc->add_option("--nw-depth", gc_depth, "NW head depth for --layer network");

    // synth
    auto* syn = app.add_subcommand("synth", "deterministic test texture PNG");
    std::string syn_size = "256x256", syn_out;
    std::uint64_t syn_seed = 0;
    syn->add_option("--size", syn_size, "WxH");
    syn->add_option("--seed", syn_seed, "texture seed");
    syn->add_option("--out", syn_out, "output PNG")->required();

    // grid
    auto* grd = app.add_subcommand("grid", "side-by-side frame grid from image directories");
    std::vector<std::string> grd_dirs;
    int grd_frame = 0;
    std::string grd_out;
    grd->add_option("dirs", grd_dirs, "image directories, left to right")->required();
    grd->add_option("--frame", grd_frame, "frame index");
    grd->add_option("--out", grd_out, "output PNG")->required();

    // rerun
    auto* rr = app.add_subcommand("rerun", "replay a recorded command from its manifest");
    std::string rr_manifest, rr_outdir, rr_outfile;
    rr->add_option("manifest", rr_manifest, "manifest.json of a previous run")->required();
    rr->add_option("--out-dir", rr_outdir, "override the recorded --out-dir");
    rr->add_option("--out", rr_outfile, "override the recorded --out");

    app.require_subcommand(1);

    std::vector<const char*> argv_c;
    argv_c.push_back("nwsr");
    for (const std::string& a : args) argv_c.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv_c.size()), argv_c.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (threads > 0) nwsr::thread_cap() = threads;

    if (sim->parsed())
        return cmd_simulate(sim_input, sim_layout, sim_sm, sim_sa, sim_seed, sim_out, args);
    if (rec->parsed()) {
        if (!rec_data.empty() || !rec_outdir.empty()) {
            if (rec_data.empty() || rec_outdir.empty())
                throw UsageError("batch reconstruct needs --data-dir and --out-dir");
            return cmd_reconstruct_batch(rec_method, rec_data, rec_sigma, rec_outdir, args);
        }
        if (rec_signals.empty() || rec_layout.empty() || rec_size.empty() || rec_out.empty())
            throw UsageError(
                "reconstruct needs --signals/--layout/--size/--out or --data-dir/--out-dir");
        return cmd_reconstruct_single(rec_method, rec_signals, rec_layout, rec_size, rec_sigma,
                                      rec_out);
    }
    if (trn->parsed()) return cmd_train(trn_cfg, trn_mode, trn_out, args);
    if (ev->parsed()) return cmd_eval(ev_sr, ev_hr, ev_out, args);
    if (cmp->parsed()) return cmd_compare(cmp_entries, cmp_out, args);
    if (gc->parsed())
        return cmd_gradcheck(gc_layer, gc_cin, gc_t, gc_k, gc_seed, gc_arch, gc_blocks,
                             gc_filters, gc_depth);
    if (syn->parsed()) return cmd_synth(syn_size, syn_seed, syn_out);
    if (grd->parsed()) return cmd_grid(grd_dirs, grd_frame, grd_out);
    if (rr->parsed()) return cmd_rerun(rr_manifest, rr_outdir, rr_outfile);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_cli(args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
