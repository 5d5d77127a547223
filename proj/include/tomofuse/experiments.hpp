#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tomofuse/fbp.hpp"
#include "tomofuse/fusion.hpp"
#include "tomofuse/metrics.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/pwls.hpp"

namespace tomofuse::experiments {

/// Desk-scale acquisition: 256x256 slices of 0.08 cm pixels, 360 views and a
/// low-dose blank count.
struct ScanProtocol {
    Grid grid{256, 256, 0.08};
    std::size_t views = 360;
    double blank = 1e4;
    Calibration calibration{};

    double fov_radius() const { return 0.5 * static_cast<double>(std::min(grid.width, grid.height)) * grid.pixel_size; }
};

struct Slice {
    std::uint64_t seed = 0;
    Image reference;  ///< phantom in HU
    CountsData counts;
};

/// Random-tissue phantom from seed, scanned with Poisson noise from a child stream.
Slice make_slice(const ScanProtocol& scan, std::uint64_t seed);

/// Added to HU values before SNR so intensities are proportional to
/// attenuation (air = 0).
inline constexpr double kIntensityOffset = 1000.0;

struct Scores {
    double snr = 0.0;           ///< over the reference object mask, on HU + kIntensityOffset
    double windowed_snr = 0.0;  ///< same, after clipping to the soft-tissue window
    double ssim = 0.0;
};

Scores score(const Image& reference, const Image& estimate, const metrics::ObjectMask& mask);

struct SliceReport {
    std::uint64_t seed = 0;
    std::vector<Scores> versions;
    Scores fused;
    double best_version_snr() const;
    double best_version_ssim() const;
};

struct BoostReport {
    std::vector<SliceReport> slices;
    nn::TrainResult training;
    std::size_t examples = 0;
    std::size_t zero_weight_examples = 0;
    std::size_t candidates = 0;
    std::vector<std::vector<double>> objective_traces;  ///< PWLS runs only
    std::vector<Image> fused_images;
};

using Progress = std::function<void(const std::string&)>;

struct FbpBoostConfig {
    ScanProtocol scan{};
    FilterBank bank = default_filter_bank();
    fusion::FusionConfig fusion = fusion::FusionConfig::fbp_default();
    std::size_t hidden = 40;
    nn::TrainConfig train{.max_epochs = 150, .batch_size = 120, .mu_initial = 1e-2, .validation_fraction = 0.1, .patience = 25};
    std::vector<std::uint64_t> train_seeds{1001, 1002, 1003, 1004, 1005, 1006, 1007, 1008, 1009, 1010, 1011, 1012};
    std::vector<std::uint64_t> test_seeds{2001, 2002, 2003};
    std::uint64_t seed = 7;
};

struct PwlsBoostConfig {
    ScanProtocol scan{};
    PwlsParams pwls{.beta = 0.03};
    FilterParams init_filter{0.4, 3};
    std::vector<std::size_t> snapshots{20, 60, 80};
    fusion::FusionConfig fusion = fusion::FusionConfig::pwls_default();
    std::size_t hidden = 30;
    nn::TrainConfig train{.max_epochs = 150, .batch_size = 2000, .mu_initial = 1e-2, .validation_fraction = 0.1, .patience = 25};
    std::vector<std::uint64_t> train_seeds{1001, 1002, 1003, 1004, 1005, 1006, 1007, 1008, 1009, 1010, 1011, 1012};
    std::vector<std::uint64_t> test_seeds{2001, 2002, 2003};
    std::uint64_t seed = 7;
};

/// Builds the dataset from the training slices, trains the network and
/// scores every version and the fused image on the test slices.
BoostReport run_fbp_boost(const FbpBoostConfig& config, const Progress& progress = {});
BoostReport run_pwls_boost(const PwlsBoostConfig& config, const Progress& progress = {});

}  // namespace tomofuse::experiments
