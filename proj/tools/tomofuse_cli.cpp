#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tomofuse/error.hpp"
#include "tomofuse/experiments.hpp"
#include "tomofuse/fbp.hpp"
#include "tomofuse/fusion.hpp"
#include "tomofuse/metrics.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/noise.hpp"
#include "tomofuse/parallel.hpp"
#include "tomofuse/phantom.hpp"
#include "tomofuse/projector.hpp"
#include "tomofuse/pwcdemo.hpp"
#include "tomofuse/pwls.hpp"
#include "tomofuse/raster_io.hpp"

namespace fs = std::filesystem;
using namespace tomofuse;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kNumerical = 3 };

void metric(const std::string& key, const std::string& value) { std::cout << "#METRIC " << key << '=' << value << '\n'; }
void metric(const std::string& key, double value) { metric(key, format_double(value)); }

double parse_cutoff(const std::string& text) {
    const double v = parse_double(text);
    if (!(v > 0.0)) throw InputError("cut-off must be positive or 'inf'");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> out;
    for (const auto& s : split_list(text)) {
        const double v = parse_double(s);
        if (v != static_cast<double>(static_cast<int>(v))) throw InputError("expected an integer list, got '" + text + "'");
        out.push_back(static_cast<int>(v));
    }
    if (out.empty()) throw InputError("empty integer list");
    return out;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
    fs::path p = base;
    const std::string ext = p.extension().string();
    p.replace_extension();
    return p.string() + suffix + (ext.empty() ? ".tfr" : ext);
}

fusion::FusionConfig fusion_config(const std::string& radii, int out_radius, std::size_t stride, std::size_t max_examples,
                                   std::uint64_t seed) {
    fusion::FusionConfig c;
    c.radii = parse_ints(radii);
    c.output_radius = out_radius;
    c.stride = stride;
    c.max_examples = max_examples;
    c.seed = seed;
    c.validate();
    return c;
}

struct Options {
    // phantom
    std::string preset = "shepp-logan";
    fs::path phantom_file;
    std::size_t size = 256;
    double pixel_size = 0.08;
    std::uint64_t seed = 1;
    fs::path output;
    // scan
    fs::path input;
    std::size_t views = 360;
    double blank = 2e5;
    bool noiseless = false;
    double mu_water = 0.2;
    // fbp
    std::string cutoff = "inf";
    int order = 3;
    // pwls
    double beta = experiments::PwlsBoostConfig{}.pwls.beta;
    double delta = PwlsParams{}.delta;
    std::size_t iters = PwlsParams{}.max_iters;
    std::size_t snapshot_every = PwlsParams{}.snapshot_every;
    std::size_t memory = PwlsParams{}.lbfgs_memory;
    std::string init_cutoff = "0.4";
    // dataset / fusion
    std::vector<std::string> pairs;
    std::string radii = "3,3,3";
    int out_radius = 3;
    std::size_t stride = 3;
    std::size_t max_examples = 30000;
    std::vector<std::string> stack;
    fs::path model;
    fs::path dataset;
    // train
    std::string hidden = "40";
    std::string trainer = "lm";
    std::size_t epochs = 150;
    std::size_t batch = 120;
    double validation = 0.1;
    std::size_t patience = 25;
    double mu = 1e-2;
    // eval
    fs::path ref;
    fs::path est;
    std::string window;
    bool ssim = false;
    bool fwhm = false;
    std::string fwhm_cutoff = "inf";
    std::size_t probes = 20;
    double offset = experiments::kIntensityOffset;
    // pwc
    std::size_t train_len = 20000;
    std::size_t test_len = 300;
    std::size_t runs = 1;
};

int cmd_phantom(const Options& o) {
    Phantom ph;
    const double fov = 0.5 * static_cast<double>(o.size) * o.pixel_size;
    if (!o.phantom_file.empty()) ph = load_phantom(o.phantom_file);
    else if (o.preset == "shepp-logan") ph = shepp_logan(fov);
    else if (o.preset == "random-tissue") ph = random_tissue(o.seed, fov);
    else throw InputError("unknown preset '" + o.preset + "'");
    const Image im = rasterize_phantom(ph, o.size, o.size, o.pixel_size);
    save_image(o.output, im, {{"units", "hu"}});
    std::cout << "phantom " << o.size << "x" << o.size << " written to " << o.output << '\n';
    return kOk;
}

int cmd_scan(const Options& o) {
    const Image im = load_image(o.input);
    const Calibration cal{o.mu_water};
    const ScanGeometry geometry = geometry_for({im.width(), im.height(), im.pixel_size()}, o.views, o.blank);
    const Sinogram sino = radon_forward(cal.to_attenuation(im), geometry);
    const CountsData counts = simulate_counts(sino, o.seed, o.noiseless);
    save_counts(o.output, counts);
    const double total = std::accumulate(counts.counts.begin(), counts.counts.end(), 0.0);
    std::cout << "scan " << geometry.num_views << " views x " << geometry.num_bins << " bins written to " << o.output << '\n';
    metric("mean_count", total / static_cast<double>(counts.counts.size()));
    return kOk;
}

Grid grid_of(const Options& o) { return {o.size, o.size, o.pixel_size}; }

int cmd_fbp(const Options& o) {
    const CountsData counts = load_counts(o.input);
    const FilterParams params{parse_cutoff(o.cutoff), o.order};
    params.validate();
    const Image hu = fusion::fbp_versions(counts, {params}, grid_of(o), Calibration{o.mu_water})[0];
    save_image(o.output, hu, {{"units", "hu"}});
    std::cout << "fbp cutoff=" << o.cutoff << " order=" << o.order << " written to " << o.output << '\n';
    return kOk;
}

int cmd_pwls(const Options& o) {
    const CountsData counts = load_counts(o.input);
    PwlsParams p;
    p.beta = o.beta;
    p.delta = o.delta;
    p.max_iters = o.iters;
    p.snapshot_every = o.snapshot_every;
    p.lbfgs_memory = o.memory;
    p.validate();
    std::vector<std::size_t> its;
    for (std::size_t k = p.snapshot_every; k <= p.max_iters; k += p.snapshot_every) its.push_back(k);
    PwlsResult run;
    const auto images = fusion::pwls_versions(counts, its, grid_of(o), Calibration{o.mu_water}, p, {parse_cutoff(o.init_cutoff), 3}, &run);
    for (std::size_t i = 0; i < images.size() && i < run.snapshots.size(); ++i) {
        const fs::path path = with_suffix(o.output, "_it" + std::to_string(its[i]));
        save_image(path, images[i], {{"units", "hu"}, {"iteration", std::to_string(its[i])}});
        std::cout << "snapshot " << its[i] << " -> " << path << '\n';
    }
    metric("iterations", static_cast<double>(run.iterations));
    metric("status", to_string(run.status));
    metric("final_objective", run.objective_trace.back());
    if (run.status == LbfgsStatus::LineSearchFailed) {
        std::cerr << "error: line search failed after " << run.iterations << " iterations\n";
        return kNumerical;
    }
    return kOk;
}

int cmd_make_dataset(const Options& o) {
    if (o.pairs.empty()) throw InputError("at least one --pair REF,V1,... is required");
    const fusion::FusionConfig cfg = fusion_config(o.radii, o.out_radius, o.stride, o.max_examples, o.seed);
    std::vector<fusion::TrainingPair> pairs;
    for (const auto& spec : o.pairs) {
        const auto files = split_list(spec);
        if (files.size() != cfg.radii.size() + 1)
            throw DimensionError("--pair '" + spec + "' lists " + std::to_string(files.size() - 1) + " versions, expected " +
                                 std::to_string(cfg.radii.size()));
        fusion::TrainingPair pair;
        pair.reference = load_image(files[0]);
        for (std::size_t i = 1; i < files.size(); ++i) pair.stack.push_back(load_image(files[i]));
        pairs.push_back(std::move(pair));
    }
    const fusion::FusionDataset ds = fusion::build_training_set(pairs, cfg);
    fusion::save_dataset(o.output, ds.set, ds.norm);
    std::cout << "dataset with " << ds.set.size() << " examples (" << cfg.input_size() << " inputs, " << cfg.output_size()
              << " outputs) written to " << o.output << '\n';
    metric("examples", static_cast<double>(ds.set.size()));
    metric("candidates", static_cast<double>(ds.candidates));
    metric("variance_pruned", static_cast<double>(ds.variance_pruned));
    metric("zero_weight", static_cast<double>(ds.zero_weight));
    return kOk;
}

int cmd_train(const Options& o) {
    nn::Normalization norm;
    const nn::TrainingSet set = fusion::load_dataset(o.dataset, norm);
    std::vector<std::size_t> sizes{static_cast<std::size_t>(set.inputs.cols())};
    for (int h : parse_ints(o.hidden)) {
        if (h < 1) throw InputError("hidden layer sizes must be positive");
        sizes.push_back(static_cast<std::size_t>(h));
    }
    sizes.push_back(static_cast<std::size_t>(set.targets.cols()));
    nn::NeuralNet init = nn::NeuralNet::random(sizes, o.seed);
    fusion::attach_normalization(init, norm);
    nn::TrainConfig cfg;
    if (o.trainer == "lm") cfg.trainer = nn::Trainer::LevenbergMarquardt;
    else if (o.trainer == "gd") cfg.trainer = nn::Trainer::GradientDescent;
    else throw InputError("unknown trainer '" + o.trainer + "'");
    cfg.max_epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.validation_fraction = o.validation;
    cfg.patience = o.patience;
    cfg.mu_initial = o.mu;
    cfg.seed = o.seed + 1;
    const nn::TrainResult r = nn::train(init, set, cfg);
    nn::save_model(r.net, o.output);
    std::cout << "trained " << r.history.size() << " epochs (" << r.stop_reason << "), best epoch " << r.best_epoch << ", model written to "
              << o.output << '\n';
    metric("epochs", static_cast<double>(r.history.size()));
    metric("best_epoch", static_cast<double>(r.best_epoch));
    if (!r.history.empty()) {
        const auto& best = r.history[r.best_epoch > 0 ? r.best_epoch - 1 : 0];
        metric("train_loss", best.train_loss);
        metric("validation_loss", best.validation_loss);
    }
    return kOk;
}

int cmd_fuse(const Options& o) {
    const nn::NeuralNet net = nn::load_model(o.model);
    const fusion::FusionConfig cfg = fusion_config(o.radii, o.out_radius, o.stride, o.max_examples, o.seed);
    std::vector<Image> stack;
    for (const auto& f : o.stack) stack.push_back(load_image(f));
    const Image fused = fusion::fuse(stack, net, cfg);
    save_image(o.output, fused, {{"units", "hu"}});
    std::cout << "fused " << stack.size() << " versions into " << o.output << '\n';
    return kOk;
}

int cmd_eval(const Options& o) {
    const Image ref = load_image(o.ref);
    const Image est = load_image(o.est);
    const metrics::ObjectMask mask = metrics::object_mask(ref);
    if (mask.degenerate) std::cerr << "warning: no object found in the reference; using the whole image\n";
    metrics::HuWindow window;
    if (!o.window.empty()) {
        const auto parts = split_list(o.window);
        if (parts.size() != 2) throw InputError("--window expects b1,b2");
        window = {parse_double(parts[0]), parse_double(parts[1])};
    }
    window.validate();
    auto shifted = [&](Image im, bool clip) {
        for (double& v : im.values()) v = (clip ? std::clamp(v, window.low, window.high) : v) + o.offset;
        return im;
    };
    const double snr = metrics::snr(shifted(ref, false), shifted(est, false), mask);
    const double wsnr = metrics::snr(shifted(ref, true), shifted(est, true), mask);
    std::cout << "metric\tvalue\nsnr_db\t" << format_double(snr) << "\nwindowed_snr_db\t" << format_double(wsnr) << '\n';
    metric("snr", snr);
    metric("windowed_snr", wsnr);
    if (o.ssim) {
        const double s = metrics::ssim(ref, est, {.dynamic_range = window.high - window.low});
        std::cout << "ssim\t" << format_double(s) << '\n';
        metric("ssim", s);
    }
    if (o.fwhm) {
        const FilterParams params{parse_cutoff(o.fwhm_cutoff), o.order};
        const Calibration cal{o.mu_water};
        const ScanGeometry geometry = geometry_for({ref.width(), ref.height(), ref.pixel_size()}, o.views, o.blank);
        auto recon = [&](const Image& f) {
            const CountsData counts = simulate_counts(radon_forward(cal.to_attenuation(f), geometry), 0, true);
            return fusion::fbp_versions(counts, {params}, {ref.width(), ref.height(), ref.pixel_size()}, cal)[0];
        };
        const auto probes = metrics::random_probes(mask, o.probes, o.seed, 12);
        const auto widths = metrics::lir_fwhm(recon, ref, probes);
        const double mean = std::accumulate(widths.begin(), widths.end(), 0.0) / static_cast<double>(widths.size());
        std::cout << "fwhm_mean\t" << format_double(mean) << '\n';
        metric("fwhm_mean", mean);
    }
    return kOk;
}

int cmd_pwc_demo(const Options& o) {
    pwc::PwcConfig train;
    train.length = o.train_len;
    pwc::PwcConfig test = train;
    test.length = o.test_len;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < o.runs; ++i) seeds.push_back(o.seed + i);
    const pwc::PwcSummary s = pwc::run_pwc_seeds(train, test, {}, seeds);
    std::cout << "seed\tnoisy_db\tbest_filtered_db\tfused_db\n";
    for (std::size_t i = 0; i < s.runs.size(); ++i)
        std::cout << seeds[i] << '\t' << format_double(s.runs[i].noisy) << '\t' << format_double(s.runs[i].best_filtered) << '\t'
                  << format_double(s.runs[i].fused) << '\n';
    metric("noisy_snr", s.median_noisy);
    metric("best_filtered_snr", s.median_best_filtered);
    metric("fused_snr", s.median_fused);
    if (!o.output.empty()) {
        const auto& r = s.runs.front();
        auto row = [](const std::vector<double>& v) { return Image(v.size(), 1, 1.0, v); };
        save_image(with_suffix(o.output, "_clean"), row(r.test_clean));
        save_image(with_suffix(o.output, "_noisy"), row(r.test_noisy));
        save_image(with_suffix(o.output, "_fused"), row(r.test_fused));
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local fusion of CT reconstructions"};
    app.require_subcommand(1);
    Options o;
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (1 = deterministic single-threaded mode)")->check(CLI::PositiveNumber);

    auto* phantom = app.add_subcommand("phantom", "rasterize a phantom in HU");
    phantom->add_option("--preset", o.preset, "shepp-logan or random-tissue")->check(CLI::IsMember({"shepp-logan", "random-tissue"}));
    phantom->add_option("--file", o.phantom_file, "phantom description file")->check(CLI::ExistingFile);
    phantom->add_option("--size", o.size, "pixels per side")->check(CLI::Range(8, 4096));
    phantom->add_option("--pixel-size", o.pixel_size, "cm per pixel")->check(CLI::PositiveNumber);
    phantom->add_option("--seed", o.seed);
    phantom->add_option("-o,--output", o.output)->required();

    auto* scan = app.add_subcommand("scan", "simulate a parallel-beam scan with Poisson noise");
    scan->add_option("-i,--input", o.input)->required()->check(CLI::ExistingFile);
    scan->add_option("--views", o.views)->check(CLI::Range(1, 100000));
    scan->add_option("--blank", o.blank, "blank-scan photon count")->check(CLI::PositiveNumber);
    scan->add_option("--seed", o.seed);
    scan->add_flag("--noiseless", o.noiseless, "expected counts without Poisson noise");
    scan->add_option("--mu-water", o.mu_water)->check(CLI::PositiveNumber);
    scan->add_option("-o,--output", o.output)->required();

    auto* fbp = app.add_subcommand("fbp", "filtered back-projection");
    fbp->add_option("-i,--input", o.input)->required()->check(CLI::ExistingFile);
    fbp->add_option("--cutoff", o.cutoff, "Butterworth cut-off or 'inf'");
    fbp->add_option("--order", o.order)->check(CLI::PositiveNumber);
    fbp->add_option("--size", o.size)->check(CLI::Range(8, 4096));
    fbp->add_option("--pixel-size", o.pixel_size)->check(CLI::PositiveNumber);
    fbp->add_option("--mu-water", o.mu_water)->check(CLI::PositiveNumber);
    fbp->add_option("-o,--output", o.output)->required();

    auto* pwls = app.add_subcommand("pwls", "penalized weighted least squares with snapshots");
    pwls->add_option("-i,--input", o.input)->required()->check(CLI::ExistingFile);
    pwls->add_option("--beta", o.beta)->check(CLI::PositiveNumber);
    pwls->add_option("--delta", o.delta)->check(CLI::PositiveNumber);
    pwls->add_option("--iters", o.iters)->check(CLI::PositiveNumber);
    pwls->add_option("--snapshot-every", o.snapshot_every)->check(CLI::PositiveNumber);
    pwls->add_option("--memory", o.memory)->check(CLI::PositiveNumber);
    pwls->add_option("--init-cutoff", o.init_cutoff, "cut-off of the initial FBP image");
    pwls->add_option("--size", o.size)->check(CLI::Range(8, 4096));
    pwls->add_option("--pixel-size", o.pixel_size)->check(CLI::PositiveNumber);
    pwls->add_option("--mu-water", o.mu_water)->check(CLI::PositiveNumber);
    pwls->add_option("-o,--output", o.output, "base name; snapshots get an _it<k> suffix")->required();

    auto* make = app.add_subcommand("make-dataset", "extract weighted training examples");
    make->add_option("--pair", o.pairs, "REF,V1,V2,... (repeatable)")->required();
    make->add_option("--radii", o.radii, "neighbourhood radius per version");
    make->add_option("--out-radius", o.out_radius)->check(CLI::NonNegativeNumber);
    make->add_option("--stride", o.stride)->check(CLI::PositiveNumber);
    make->add_option("--max-examples", o.max_examples)->check(CLI::PositiveNumber);
    make->add_option("--seed", o.seed);
    make->add_option("-o,--output", o.output)->required();

    auto* train = app.add_subcommand("train", "train the fusion network");
    train->add_option("-d,--dataset", o.dataset)->required()->check(CLI::ExistingFile);
    train->add_option("--hidden", o.hidden, "hidden layer sizes, comma separated");
    train->add_option("--trainer", o.trainer)->check(CLI::IsMember({"lm", "gd"}));
    train->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
    train->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
    train->add_option("--validation", o.validation)->check(CLI::Range(0.0, 0.5));
    train->add_option("--patience", o.patience);
    train->add_option("--mu", o.mu)->check(CLI::PositiveNumber);
    train->add_option("--seed", o.seed);
    train->add_option("-o,--output", o.output)->required();

    auto* fuse = app.add_subcommand("fuse", "apply a trained network to image versions");
    fuse->add_option("-m,--model", o.model)->required()->check(CLI::ExistingFile);
    fuse->add_option("--stack", o.stack, "version files in training order")->required()->check(CLI::ExistingFile);
    fuse->add_option("--radii", o.radii);
    fuse->add_option("--out-radius", o.out_radius)->check(CLI::NonNegativeNumber);
    fuse->add_option("-o,--output", o.output)->required();

    auto* eval = app.add_subcommand("eval", "compare an estimate with a reference");
    eval->add_option("--ref", o.ref)->required()->check(CLI::ExistingFile);
    eval->add_option("--est", o.est)->required()->check(CLI::ExistingFile);
    eval->add_option("--window", o.window, "b1,b2 (default -220,350)");
    eval->add_option("--offset", o.offset, "added to both images before SNR");
    eval->add_flag("--ssim", o.ssim);
    eval->add_flag("--fwhm", o.fwhm, "local impulse response of noiseless FBP on the reference");
    eval->add_option("--fwhm-cutoff", o.fwhm_cutoff);
    eval->add_option("--order", o.order)->check(CLI::PositiveNumber);
    eval->add_option("--probes", o.probes)->check(CLI::PositiveNumber);
    eval->add_option("--views", o.views)->check(CLI::PositiveNumber);
    eval->add_option("--seed", o.seed);

    auto* demo = app.add_subcommand("pwc-demo", "1-D piecewise-constant fusion demo");
    demo->add_option("--seed", o.seed);
    demo->add_option("--train-len", o.train_len)->check(CLI::Range(60, 10000000));
    demo->add_option("--test-len", o.test_len)->check(CLI::Range(60, 10000000));
    demo->add_option("--runs", o.runs, "consecutive seeds; medians are reported")->check(CLI::PositiveNumber);
    demo->add_option("-o,--output", o.output, "write the first run's test signals as 1-row rasters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    if (threads > 0) set_thread_count(threads);

    try {
        if (*phantom) return cmd_phantom(o);
        if (*scan) return cmd_scan(o);
        if (*fbp) return cmd_fbp(o);
        if (*pwls) return cmd_pwls(o);
        if (*make) return cmd_make_dataset(o);
        if (*train) return cmd_train(o);
        if (*fuse) return cmd_fuse(o);
        if (*eval) return cmd_eval(o);
        if (*demo) return cmd_pwc_demo(o);
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const DimensionError& e) {
        std::cerr << "error: dimension mismatch: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    }
    return kUsage;
}
