#include "tomofuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tomofuse/error.hpp"
#include "tomofuse/noise.hpp"
#include "tomofuse/parallel.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse::fusion {

DiskOffsets::DiskOffsets(int radius) : radius_(radius) {
    if (radius < 0) throw InputError("disk radius must be non-negative");
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) offsets_.push_back({dy, dx});
}

std::size_t disk_count(int radius) { return DiskOffsets(radius).size(); }

std::size_t FusionConfig::input_size() const {
    std::size_t n = 0;
    for (int r : radii) n += disk_count(r);
    return n;
}

int FusionConfig::margin() const {
    int m = output_radius;
    for (int r : radii) m = std::max(m, r);
    return m;
}

void FusionConfig::validate() const {
    if (radii.empty()) throw InputError("at least one image version is required");
    for (int r : radii)
        if (r < 0) throw InputError("neighbourhood radii must be non-negative");
    if (output_radius < 0) throw InputError("output radius must be non-negative");
    if (stride < 1) throw InputError("stride must be positive");
    if (!(variance_prune >= 0.0 && variance_prune < 1.0)) throw InputError("variance_prune must lie in [0, 1)");
    if (!(gradient_cap > 0.0 && gradient_cap <= 1.0)) throw InputError("gradient_cap must lie in (0, 1]");
    if (max_examples < 1) throw InputError("max_examples must be positive");
}

FusionConfig FusionConfig::fbp_default() { return {}; }

FusionConfig FusionConfig::pwls_default() {
    FusionConfig c;
    c.radii = {4, 1, 4};
    c.output_radius = 0;
    return c;
}

namespace {

void extract_clamped(const Image& image, long row, long col, const DiskOffsets& disk, double* out) {
    for (const Offset& o : disk.offsets()) *out++ = image.clamped(row + o.dy, col + o.dx);
}

void check_stack(const std::vector<Image>& stack, const FusionConfig& config) {
    if (stack.size() != config.radii.size())
        throw DimensionError("expected " + std::to_string(config.radii.size()) + " image versions, got " + std::to_string(stack.size()));
    for (const Image& im : stack) {
        if (!im.same_shape(stack.front())) throw DimensionError("image versions differ in size");
        if (!im.finite()) throw InputError("image version contains non-finite values");
    }
}

}  // namespace

std::vector<double> extract_disk(const Image& image, Location q, int radius) {
    const auto r = static_cast<std::size_t>(std::max(radius, 0));
    if (q.row < r || q.col < r || q.row + r >= image.height() || q.col + r >= image.width())
        throw std::out_of_range("disk of radius " + std::to_string(radius) + " at (" + std::to_string(q.row) + ", " +
                                std::to_string(q.col) + ") leaves the image");
    const DiskOffsets disk(radius);
    std::vector<double> out;
    out.reserve(disk.size());
    for (const Offset& o : disk.offsets())
        out.push_back(image(static_cast<std::size_t>(static_cast<long>(q.row) + o.dy), static_cast<std::size_t>(static_cast<long>(q.col) + o.dx)));
    return out;
}

std::vector<double> build_features(const std::vector<Image>& stack, Location q, const std::vector<int>& radii) {
    if (stack.size() != radii.size()) throw DimensionError("one radius per image version is required");
    std::vector<double> out;
    for (std::size_t j = 0; j < stack.size(); ++j) {
        const auto part = extract_disk(stack[j], q, radii[j]);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

double feature_variance(std::span<const double> features) {
    if (features.empty()) return 0.0;
    const double n = static_cast<double>(features.size());
    const double mean = std::accumulate(features.begin(), features.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : features) ss += (v - mean) * (v - mean);
    return ss / n;
}

Image gradient_magnitude(const Image& reference) {
    const std::size_t W = reference.width(), H = reference.height();
    Image out(W, H, reference.pixel_size());
    if (W == 0 || H == 0) return out;
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            double gx = 0.0, gy = 0.0;
            if (W > 1) {
                const std::size_t c0 = c == 0 ? 0 : c - 1, c1 = c + 1 == W ? c : c + 1;
                gx = (reference(r, c1) - reference(r, c0)) / static_cast<double>(c1 - c0);
            }
            if (H > 1) {
                const std::size_t r0 = r == 0 ? 0 : r - 1, r1 = r + 1 == H ? r : r + 1;
                gy = (reference(r1, c) - reference(r0, c)) / static_cast<double>(r1 - r0);
            }
            out(r, c) = std::hypot(gx, gy);
        }
    }
    return out;
}

double accumulated_gradient(const Image& gradient, Location q, int output_radius) {
    const auto values = extract_disk(gradient, q, output_radius);
    return std::accumulate(values.begin(), values.end(), 0.0);
}

bool is_low_variance(double variance, const WeightStats& stats, const FusionConfig& config) {
    return variance < config.variance_prune * stats.max_variance || !(stats.max_variance > 0.0);
}

double compute_example_weight(double variance, double gradient, const WeightStats& stats, const FusionConfig& config) {
    if (is_low_variance(variance, stats, config)) return 0.0;
    if (!(stats.max_gradient > 0.0)) return 0.0;
    if (gradient > config.gradient_cap * stats.max_gradient) return 0.0;
    return gradient / stats.max_gradient;
}

FusionDataset build_training_set(const std::vector<TrainingPair>& pairs, const FusionConfig& config) {
    config.validate();
    if (pairs.empty()) throw NumericalError("dataset-empty: no training pairs");
    const auto margin = static_cast<std::size_t>(config.margin());

    std::vector<ExampleRecord> pool;
    std::vector<std::size_t> pool_pair;
    std::vector<double> variance;
    std::vector<double> gradient;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const TrainingPair& pair = pairs[p];
        check_stack(pair.stack, config);
        if (!pair.reference.same_shape(pair.stack.front())) throw DimensionError("reference differs in size from its versions");
        const Image grad = gradient_magnitude(pair.reference);
        const std::size_t W = pair.reference.width(), H = pair.reference.height();
        if (W <= 2 * margin || H <= 2 * margin) continue;
        const std::size_t nr = (H - 2 * margin) / config.stride;
        const std::size_t nc = (W - 2 * margin) / config.stride;
        for (std::size_t i = 0; i < nr; ++i) {
            for (std::size_t j = 0; j < nc; ++j) {
                ExampleRecord ex;
                ex.q = {margin + i * config.stride, margin + j * config.stride};
                ex.features = build_features(pair.stack, ex.q, config.radii);
                ex.target = extract_disk(pair.reference, ex.q, config.output_radius);
                variance.push_back(feature_variance(ex.features));
                gradient.push_back(accumulated_gradient(grad, ex.q, config.output_radius));
                pool.push_back(std::move(ex));
                pool_pair.push_back(p);
            }
        }
    }

    FusionDataset ds;
    ds.candidates = pool.size();
    if (pool.empty()) throw NumericalError("dataset-empty: images are smaller than the sampling margin");

    WeightStats stats;
    stats.max_variance = *std::max_element(variance.begin(), variance.end());
    stats.max_gradient = *std::max_element(gradient.begin(), gradient.end());

    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (is_low_variance(variance[k], stats, config)) {
            ++ds.variance_pruned;
            continue;
        }
        pool[k].weight = compute_example_weight(variance[k], gradient[k], stats, config);
        kept.push_back(k);
    }
    if (kept.empty()) throw NumericalError("dataset-empty: every example was pruned");

    if (kept.size() > config.max_examples) {
        Rng rng(config.seed);
        for (std::size_t i = 0; i < config.max_examples; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(kept.size() - i));
            std::swap(kept[i], kept[j]);
        }
        kept.resize(config.max_examples);
        std::sort(kept.begin(), kept.end());
    }

    const auto K = static_cast<Eigen::Index>(kept.size());
    const auto m = static_cast<Eigen::Index>(config.input_size());
    const auto n = static_cast<Eigen::Index>(config.output_size());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(K, m), Y(K, n);
    ds.set.weights.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const ExampleRecord& ex = pool[kept[static_cast<std::size_t>(k)]];
        std::copy(ex.features.begin(), ex.features.end(), X.row(k).data());
        std::copy(ex.target.begin(), ex.target.end(), Y.row(k).data());
        ds.set.weights(k) = ex.weight;
        if (ex.weight == 0.0) ++ds.zero_weight;
        ds.pair_index.push_back(pool_pair[kept[static_cast<std::size_t>(k)]]);
        ds.locations.push_back(ex.q);
    }
    ds.norm = nn::normalize_fit(std::span<const double>(X.data(), static_cast<std::size_t>(X.size())));
    nn::normalize_apply(std::span<double>(X.data(), static_cast<std::size_t>(X.size())), ds.norm);
    nn::normalize_apply(std::span<double>(Y.data(), static_cast<std::size_t>(Y.size())), ds.norm);
    ds.set.inputs = X;
    ds.set.targets = Y;
    return ds;
}

void attach_normalization(nn::NeuralNet& net, const nn::Normalization& norm) {
    net.norm_shift = norm.shift;
    net.norm_scale = norm.scale;
}

FuseResult fuse_with_coverage(const std::vector<Image>& stack, const nn::NeuralNet& net, const FusionConfig& config) {
    config.validate();
    check_stack(stack, config);
    net.validate();
    if (net.inputs() != config.input_size() || net.outputs() != config.output_size())
        throw DimensionError("network shape " + std::to_string(net.inputs()) + "->" + std::to_string(net.outputs()) +
                             " does not match the fusion configuration " + std::to_string(config.input_size()) + "->" +
                             std::to_string(config.output_size()));

    const std::size_t W = stack.front().width(), H = stack.front().height();
    std::vector<DiskOffsets> disks;
    for (int r : config.radii) disks.emplace_back(r);
    const DiskOffsets out_disk(config.output_radius);
    const auto m = static_cast<Eigen::Index>(config.input_size());
    const auto n = static_cast<Eigen::Index>(config.output_size());

    // Predictions for every pixel, one row per pixel, computed in row blocks.
    Eigen::MatrixXd predictions(static_cast<Eigen::Index>(W * H), n);
    parallel_for(H, [&](std::size_t r0, std::size_t r1) {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(static_cast<Eigen::Index>((r1 - r0) * W), m);
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = 0; c < W; ++c) {
                double* row = X.row(static_cast<Eigen::Index>((r - r0) * W + c)).data();
                for (std::size_t j = 0; j < stack.size(); ++j) {
                    extract_clamped(stack[j], static_cast<long>(r), static_cast<long>(c), disks[j], row);
                    row += disks[j].size();
                }
            }
        }
        predictions.middleRows(static_cast<Eigen::Index>(r0 * W), X.rows()) = nn::predict_raw(net, X);
    });

    FuseResult result{Image(W, H, stack.front().pixel_size()), Image(W, H, stack.front().pixel_size())};
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            const auto row = static_cast<Eigen::Index>(r * W + c);
            for (std::size_t i = 0; i < out_disk.size(); ++i) {
                const long rr = static_cast<long>(r) + out_disk.offsets()[i].dy;
                const long cc = static_cast<long>(c) + out_disk.offsets()[i].dx;
                if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W)) continue;
                result.image(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) += predictions(row, static_cast<Eigen::Index>(i));
                result.coverage(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) += 1.0;
            }
        }
    }
    for (std::size_t k = 0; k < result.image.size(); ++k) result.image.values()[k] /= result.coverage.values()[k];
    return result;
}

Image fuse(const std::vector<Image>& stack, const nn::NeuralNet& net, const FusionConfig& config) {
    return fuse_with_coverage(stack, net, config).image;
}

std::vector<Image> fbp_versions(const CountsData& counts, const FilterBank& bank, const Grid& grid, const Calibration& calibration) {
    validate_bank(bank);
    const Sinogram sino = counts_to_sinogram(counts);
    std::vector<Image> out;
    for (const Image& mu : fbp_sweep(sino, bank, grid.width, grid.height, grid.pixel_size)) out.push_back(calibration.to_hu(mu));
    return out;
}

std::vector<Image> pwls_versions(const CountsData& counts, const std::vector<std::size_t>& iterations, const Grid& grid,
                                 const Calibration& calibration, const PwlsParams& params, const FilterParams& init_filter,
                                 PwlsResult* run) {
    params.validate();
    if (iterations.empty()) throw InputError("no snapshot iterations requested");
    for (std::size_t it : iterations)
        if (it == 0 || it > params.max_iters || it % params.snapshot_every != 0)
            throw InputError("snapshot iteration " + std::to_string(it) + " is not a multiple of snapshot_every within max_iters");
    const Sinogram sino = counts_to_sinogram(counts);
    const Image init = fbp_reconstruct(sino, init_filter, grid.width, grid.height, grid.pixel_size);
    PwlsResult result = pwls_reconstruct(counts, init, params);
    if (result.snapshots.empty()) throw NumericalError("PWLS produced no snapshots");

    std::vector<Image> out;
    for (std::size_t it : iterations) {
        // A run stopped by the line search keeps its last stored iterate.
        std::size_t pick = result.snapshots.size() - 1;
        for (std::size_t s = 0; s < result.snapshot_iterations.size(); ++s)
            if (result.snapshot_iterations[s] == it) pick = s;
        out.push_back(calibration.to_hu(result.snapshots[pick]));
    }
    if (run) *run = std::move(result);
    return out;
}

Image end_to_end_fbp_boost(const CountsData& counts, const FilterBank& bank, const nn::NeuralNet& net,
                           const FusionConfig& config, const Grid& grid, const Calibration& calibration) {
    return fuse(fbp_versions(counts, bank, grid, calibration), net, config);
}

Image end_to_end_pwls_boost(const CountsData& counts, const std::vector<std::size_t>& iterations, const nn::NeuralNet& net,
                            const FusionConfig& config, const Grid& grid, const Calibration& calibration,
                            const PwlsParams& params, const FilterParams& init_filter) {
    return fuse(pwls_versions(counts, iterations, grid, calibration, params, init_filter), net, config);
}

}  // namespace tomofuse::fusion
