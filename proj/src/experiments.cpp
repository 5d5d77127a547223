#include "tomofuse/experiments.hpp"

#include <algorithm>

#include "tomofuse/noise.hpp"
#include "tomofuse/phantom.hpp"
#include "tomofuse/projector.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse::experiments {

Slice make_slice(const ScanProtocol& scan, std::uint64_t seed) {
    const Rng root(seed);
    Slice s;
    s.seed = seed;
    s.reference = rasterize_phantom(random_tissue(root.split(1).seed(), scan.fov_radius()), scan.grid.width, scan.grid.height,
                                    scan.grid.pixel_size);
    const ScanGeometry geometry = geometry_for(scan.grid, scan.views, scan.blank);
    const Sinogram sino = radon_forward(scan.calibration.to_attenuation(s.reference), geometry);
    s.counts = simulate_counts(sino, root.split(2).seed());
    return s;
}

namespace {

Image offset(const Image& im, double by) {
    Image out = im;
    for (double& v : out.values()) v += by;
    return out;
}

Image clip(const Image& im, const metrics::HuWindow& w) {
    Image out = im;
    for (double& v : out.values()) v = std::clamp(v, w.low, w.high);
    return out;
}

}  // namespace

Scores score(const Image& reference, const Image& estimate, const metrics::ObjectMask& mask) {
    const metrics::HuWindow window;
    const Image ref = offset(reference, kIntensityOffset);
    const Image est = offset(estimate, kIntensityOffset);
    return {metrics::snr(ref, est, mask),
            metrics::snr(offset(clip(reference, window), kIntensityOffset), offset(clip(estimate, window), kIntensityOffset), mask),
            metrics::ssim(reference, estimate)};
}

double SliceReport::best_version_snr() const {
    double best = -1e300;
    for (const Scores& s : versions) best = std::max(best, s.snr);
    return best;
}

double SliceReport::best_version_ssim() const {
    double best = -1.0;
    for (const Scores& s : versions) best = std::max(best, s.ssim);
    return best;
}

namespace {

using VersionMaker = std::function<std::vector<Image>(const Slice&, std::vector<double>* trace)>;

BoostReport run_boost(const ScanProtocol& scan, const fusion::FusionConfig& fcfg, std::size_t hidden, const nn::TrainConfig& tcfg,
                      const std::vector<std::uint64_t>& train_seeds, const std::vector<std::uint64_t>& test_seeds,
                      std::uint64_t seed, const VersionMaker& versions, const Progress& progress) {
    auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    const Rng root(seed);
    BoostReport report;

    std::vector<fusion::TrainingPair> pairs;
    for (std::uint64_t s : train_seeds) {
        const Slice slice = make_slice(scan, s);
        std::vector<double> trace;
        pairs.push_back({versions(slice, &trace), slice.reference});
        if (!trace.empty()) report.objective_traces.push_back(std::move(trace));
        note("training slice " + std::to_string(s) + " reconstructed");
    }

    fusion::FusionConfig dcfg = fcfg;
    dcfg.seed = root.split(1).seed();
    const fusion::FusionDataset ds = fusion::build_training_set(pairs, dcfg);
    pairs.clear();
    report.examples = ds.set.size();
    report.zero_weight_examples = ds.zero_weight;
    report.candidates = ds.candidates;
    note("dataset: " + std::to_string(ds.set.size()) + " examples");

    nn::NeuralNet init = nn::NeuralNet::random({fcfg.input_size(), hidden, fcfg.output_size()}, root.split(2).seed());
    fusion::attach_normalization(init, ds.norm);
    nn::TrainConfig t = tcfg;
    t.seed = root.split(3).seed();
    report.training = nn::train(init, ds.set, t);
    note("training stopped after " + std::to_string(report.training.history.size()) + " epochs: " + report.training.stop_reason);

    for (std::uint64_t s : test_seeds) {
        const Slice slice = make_slice(scan, s);
        std::vector<double> trace;
        const std::vector<Image> stack = versions(slice, &trace);
        if (!trace.empty()) report.objective_traces.push_back(std::move(trace));
        const Image fused = fusion::fuse(stack, report.training.net, fcfg);
        const metrics::ObjectMask mask = metrics::object_mask(slice.reference);
        SliceReport sr;
        sr.seed = s;
        for (const Image& v : stack) sr.versions.push_back(score(slice.reference, v, mask));
        sr.fused = score(slice.reference, fused, mask);
        report.slices.push_back(std::move(sr));
        report.fused_images.push_back(fused);
        note("test slice " + std::to_string(s) + " scored");
    }
    return report;
}

}  // namespace

BoostReport run_fbp_boost(const FbpBoostConfig& config, const Progress& progress) {
    auto versions = [&](const Slice& slice, std::vector<double>*) {
        return fusion::fbp_versions(slice.counts, config.bank, config.scan.grid, config.scan.calibration);
    };
    return run_boost(config.scan, config.fusion, config.hidden, config.train, config.train_seeds, config.test_seeds, config.seed,
                     versions, progress);
}

BoostReport run_pwls_boost(const PwlsBoostConfig& config, const Progress& progress) {
    auto versions = [&](const Slice& slice, std::vector<double>* trace) {
        PwlsResult run;
        auto out = fusion::pwls_versions(slice.counts, config.snapshots, config.scan.grid, config.scan.calibration, config.pwls,
                                         config.init_filter, &run);
        if (trace) *trace = run.objective_trace;
        return out;
    };
    return run_boost(config.scan, config.fusion, config.hidden, config.train, config.train_seeds, config.test_seeds, config.seed,
                     versions, progress);
}

}  // namespace tomofuse::experiments
