// sardine: batch CLI for SAR despeckling with a residual CNN.
// Commands: simulate, build-dataset, train, despeckle, evaluate.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sardine/binio.hpp"
#include "sardine/dataset.hpp"
#include "sardine/metrics.hpp"
#include "sardine/model.hpp"
#include "sardine/parallel.hpp"
#include "sardine/rng.hpp"
#include "sardine/speckle.hpp"

namespace fs = std::filesystem;
using namespace sardine;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void apply_threading(int threads, bool deterministic) {
    if (deterministic) {
        set_thread_count(1);
    } else if (threads > 0) {
        set_thread_count(threads);
    }
}

// Effective config echoed next to the primary output; rerunning the same
// subcommand with --config <sidecar> reproduces the run. The section
// header routes the keys back to the subcommand on reparse.
void write_sidecar(const CLI::App* sub, const std::string& path) {
    std::string text = "# sardine " + sub->get_name() + "\n";
    text += "[" + sub->get_name() + "]\n";
    text += sub->config_to_str(true, false);
    write_text_file(path, text);
}

std::vector<fs::path> list_rasters(const std::string& dir) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".sarf" || ext == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string in_dir, out_dir;
    int looks = 1;
    std::string format = "amplitude";
    std::uint64_t seed = 0;
};

int run_simulate(const CLI::App* sub, const SimulateArgs& args) {
    const std::vector<fs::path> inputs = list_rasters(args.in_dir);
    if (inputs.empty()) throw UsageError("no input rasters");
    fs::create_directories(args.out_dir);
    write_sidecar(sub, (fs::path(args.out_dir) / "simulate.run").string());

    const SpeckleFormat format = parse_format(args.format);
    std::string manifest = "file,seed_offset\n";
    int failures = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const fs::path out_path =
            fs::path(args.out_dir) / (inputs[i].stem().string() + ".sarf");
        try {
            const Raster clean = read_raster(inputs[i].string());
            SpeckleConfig cfg{args.looks, format, rng::derive(args.seed, i)};
            write_raster(simulate_speckle(clean, cfg), out_path.string());
            manifest += out_path.filename().string() + "," + std::to_string(i) + "\n";
        } catch (const std::exception& err) {
            std::cerr << "error: " << inputs[i].string() << ": " << err.what() << "\n";
            ++failures;
        }
    }
    write_text_file((fs::path(args.out_dir) / "manifest.csv").string(), manifest);
    return failures == 0 ? kExitOk : kExitUsage;
}

// --- build-dataset ----------------------------------------------------------

struct BuildDatasetArgs {
    std::string mode;
    std::string images_dir, stack_dir;
    std::string out;
    int count = 0;
    int patch = 40;
    int looks = 1;
    std::string format = "amplitude";
    double threshold = 1.5;
    int noisy_look = 0;
    std::uint64_t seed = 0;
};

int run_build_dataset(const CLI::App* sub, const BuildDatasetArgs& args) {
    write_sidecar(sub, args.out + ".run");
    const SpeckleFormat format = parse_format(args.format);
    PatchSet set;
    DatasetReport report;

    if (args.mode == "synthetic") {
        if (args.images_dir.empty()) throw UsageError("--images is required in synthetic mode");
        const auto files = list_rasters(args.images_dir);
        if (files.empty()) throw UsageError("no input rasters");
        std::vector<Raster> images;
        images.reserve(files.size());
        for (const auto& f : files) images.push_back(read_raster(f.string()));
        SpeckleConfig cfg{args.looks, format, 0};
        set = make_synthetic_set(images, cfg, args.count, args.patch, args.seed, &report);
    } else if (args.mode == "multitemporal") {
        if (args.stack_dir.empty()) throw UsageError("--stack is required in multitemporal mode");
        const auto files = list_rasters(args.stack_dir);
        if (files.size() < 2) throw UsageError("multitemporal mode needs >= 2 stack rasters");
        TemporalStack stack;
        stack.format = format;
        for (const auto& f : files) stack.looks.push_back(read_raster(f.string()));
        if (args.noisy_look < 0 || args.noisy_look >= static_cast<int>(stack.looks.size())) {
            throw UsageError("--noisy-look out of range");
        }
        const ReferenceResult ref = build_reference(stack, args.threshold);
        set = extract_real_patches(ref.reference, stack.looks[args.noisy_look], ref.mask,
                                   format, args.looks, args.count, args.patch, args.seed,
                                   &report);
    } else {
        throw UsageError("--mode must be synthetic or multitemporal");
    }

    write_patch_set(set, args.out);
    write_text_file(args.out + ".report", dataset_report_text(report));
    if (report.shortfall > 0) {
        std::cerr << "warning: shortfall of " << report.shortfall
                  << " patches (see " << args.out << ".report)\n";
    }
    return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string patchset, out;
    int depth = 17;
    int width = 64;
    std::string schedule = "30:0.001,20:0.0001";
    int batch = 128;
    std::uint64_t seed = 0;
    int threads = 0;
    bool deterministic = false;
};

int run_train(const CLI::App* sub, const TrainArgs& args) {
    apply_threading(args.threads, args.deterministic);
    write_sidecar(sub, args.out + ".run");

    const PatchSet patches = read_patch_set(args.patchset);
    const auto schedule = parse_schedule(args.schedule);
    SarCnnF net = build_sar_cnn<float>(args.depth, args.width, args.seed);
    const auto stats = train(net, patches, schedule, args.batch, args.seed);
    save_checkpoint(net, args.out);

    std::string csv = "epoch,learning_rate,mean_loss\n";
    for (const EpochStat& s : stats) {
        csv += std::to_string(s.epoch) + "," + csv_double(s.lr) + "," +
               csv_double(s.mean_loss) + "\n";
    }
    write_text_file(args.out + ".loss.csv", csv);
    return kExitOk;
}

// --- despeckle ---------------------------------------------------------------

struct DespeckleArgs {
    std::string checkpoint, in, out;
    int tile = 256;
    int overlap = 16;
    int looks = 1;
    std::string format = "amplitude";
    double c_override = std::numeric_limits<double>::quiet_NaN();
    int threads = 0;
    bool deterministic = false;
};

int run_despeckle(const CLI::App* sub, const DespeckleArgs& args) {
    apply_threading(args.threads, args.deterministic);
    write_sidecar(sub, args.out + ".run");

    SarCnnF net = load_checkpoint(args.checkpoint);
    const Raster noisy = read_raster(args.in);
    const double c =
        std::isnan(args.c_override)
            ? log_speckle_mean(SpeckleConfig{args.looks, parse_format(args.format), 0})
            : args.c_override;

    const auto t0 = std::chrono::steady_clock::now();
    const Raster filtered = despeckle(net, noisy, c, args.tile, args.overlap);
    const auto t1 = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(t1 - t0).count();

    write_raster(filtered, args.out);
    std::printf("despeckle_seconds=%.3f\n", seconds);
    return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::string filtered, reference, noisy, blocks, out;
    double peak = 255.0;
    int looks = 1;
    std::string format = "amplitude";
};

int run_evaluate(const CLI::App* sub, const EvaluateArgs& args) {
    if (args.reference.empty() && args.noisy.empty() && args.blocks.empty()) {
        throw UsageError("no computable metric requested: give --reference, --noisy and/or --blocks");
    }
    write_sidecar(sub, args.out + ".run");

    const Raster filtered = read_raster(args.filtered);
    const SpeckleFormat format = parse_format(args.format);

    MetricReport report;
    report.image = fs::path(args.filtered).filename().string();
    if (!args.reference.empty()) {
        const Raster reference = read_raster(args.reference);
        report.psnr_db = psnr(reference, filtered, args.peak);
        report.ssim_value = ssim(reference, filtered, args.peak);
    }
    if (!args.blocks.empty()) {
        report.enl_blocks = enl(filtered, read_blocks_file(args.blocks), format);
    }
    if (!args.noisy.empty()) {
        report.ratio = ratio_metrics(read_raster(args.noisy), filtered, format, args.looks);
    }

    const std::string csv = metric_csv_header() + metric_csv_row(report);
    write_text_file(args.out, csv);
    std::fputs(csv.c_str(), stdout);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SAR image despeckling with a residual CNN"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key=value run config (sidecar format); flags win");
    app.fallthrough(); // lets --config appear after the subcommand name

    SimulateArgs sim;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Inject speckle into clean rasters");
    sim_cmd->add_option("--in", sim.in_dir, "Directory of clean rasters (.sarf/.pgm)")
        ->required()->capture_default_str();
    sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required()->capture_default_str();
    sim_cmd->add_option("--looks", sim.looks, "Number of looks L")->capture_default_str();
    sim_cmd->add_option("--format", sim.format, "amplitude|intensity")->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();

    BuildDatasetArgs bld;
    CLI::App* bld_cmd = app.add_subcommand("build-dataset", "Build a clean/noisy patch set");
    bld_cmd->add_option("--mode", bld.mode, "synthetic|multitemporal")->required()->capture_default_str();
    bld_cmd->add_option("--images", bld.images_dir, "Clean image directory (synthetic mode)")
        ->capture_default_str();
    bld_cmd->add_option("--stack", bld.stack_dir, "Temporal stack directory (multitemporal mode)")
        ->capture_default_str();
    bld_cmd->add_option("--out", bld.out, "Output patch-set file (SARP)")->required()->capture_default_str();
    bld_cmd->add_option("--count", bld.count, "Patches per image (synthetic) or total (multitemporal)")
        ->required()->capture_default_str();
    bld_cmd->add_option("--patch", bld.patch, "Patch size in pixels")->capture_default_str();
    bld_cmd->add_option("--looks", bld.looks, "Looks of the noisy patches")->capture_default_str();
    bld_cmd->add_option("--format", bld.format, "amplitude|intensity")->capture_default_str();
    bld_cmd->add_option("--threshold", bld.threshold, "Change-mask CV threshold")->capture_default_str();
    bld_cmd->add_option("--noisy-look", bld.noisy_look, "Stack index used as the noisy source")
        ->capture_default_str();
    bld_cmd->add_option("--seed", bld.seed, "RNG seed")->capture_default_str();

    TrainArgs trn;
    CLI::App* trn_cmd = app.add_subcommand("train", "Train the residual CNN on a patch set");
    trn_cmd->add_option("--patchset", trn.patchset, "Input patch-set file")->required()->capture_default_str();
    trn_cmd->add_option("--out", trn.out, "Output checkpoint file")->required()->capture_default_str();
    trn_cmd->add_option("--depth", trn.depth, "Convolutional layers")->capture_default_str();
    trn_cmd->add_option("--width", trn.width, "Feature maps per hidden layer")->capture_default_str();
    trn_cmd->add_option("--schedule", trn.schedule, "epochs:lr[,epochs:lr...]")->capture_default_str();
    trn_cmd->add_option("--batch", trn.batch, "Minibatch size")->capture_default_str();
    trn_cmd->add_option("--seed", trn.seed, "RNG seed")->capture_default_str();
    trn_cmd->add_option("--threads", trn.threads, "Worker threads (0 = auto)")->capture_default_str();
    trn_cmd->add_flag("--deterministic", trn.deterministic, "Force sequential execution");

    DespeckleArgs dsp;
    CLI::App* dsp_cmd = app.add_subcommand("despeckle", "Despeckle a raster with a checkpoint");
    dsp_cmd->add_option("--checkpoint", dsp.checkpoint, "Trained checkpoint")->required()->capture_default_str();
    dsp_cmd->add_option("--in", dsp.in, "Noisy input raster")->required()->capture_default_str();
    dsp_cmd->add_option("--out", dsp.out, "Filtered output raster")->required()->capture_default_str();
    dsp_cmd->add_option("--tile", dsp.tile, "Tile size in pixels")->capture_default_str();
    dsp_cmd->add_option("--overlap", dsp.overlap, "Tile overlap in pixels")->capture_default_str();
    dsp_cmd->add_option("--looks", dsp.looks, "Looks of the input speckle")->capture_default_str();
    dsp_cmd->add_option("--format", dsp.format, "amplitude|intensity")->capture_default_str();
    dsp_cmd->add_option("--log-speckle-mean", dsp.c_override,
                        "Override the bias constant c (default: derived from looks/format)")
        ->capture_default_str();
    dsp_cmd->add_option("--threads", dsp.threads, "Worker threads (0 = auto)")->capture_default_str();
    dsp_cmd->add_flag("--deterministic", dsp.deterministic, "Force sequential execution");

    EvaluateArgs evl;
    CLI::App* evl_cmd = app.add_subcommand("evaluate", "Quality metrics for a filtered raster");
    evl_cmd->add_option("--filtered", evl.filtered, "Filtered raster")->required()->capture_default_str();
    evl_cmd->add_option("--reference", evl.reference, "Clean reference (enables PSNR/SSIM)")
        ->capture_default_str();
    evl_cmd->add_option("--noisy", evl.noisy, "Noisy input (enables ratio metrics)")->capture_default_str();
    evl_cmd->add_option("--blocks", evl.blocks, "Homogeneous-blocks file (enables ENL)")
        ->capture_default_str();
    evl_cmd->add_option("--out", evl.out, "Output CSV file")->required()->capture_default_str();
    evl_cmd->add_option("--peak", evl.peak, "Dynamic range peak")->capture_default_str();
    evl_cmd->add_option("--looks", evl.looks, "Looks of the noisy input")->capture_default_str();
    evl_cmd->add_option("--format", evl.format, "amplitude|intensity")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(sim_cmd)) return run_simulate(sim_cmd, sim);
        if (app.got_subcommand(bld_cmd)) return run_build_dataset(bld_cmd, bld);
        if (app.got_subcommand(trn_cmd)) return run_train(trn_cmd, trn);
        if (app.got_subcommand(dsp_cmd)) return run_despeckle(dsp_cmd, dsp);
        if (app.got_subcommand(evl_cmd)) return run_evaluate(evl_cmd, evl);
    } catch (const NumericError& err) {
        std::cerr << "numeric error: " << err.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
