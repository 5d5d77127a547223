#pragma once

#include <cstdint>
#include <vector>

#include "tomofuse/neuralnet.hpp"

namespace tomofuse::pwc {

struct PwcConfig {
    std::size_t length = 20000;
    double noise_std = 0.06;
    std::vector<double> widths{0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0};
    std::size_t window_half = 5;  ///< windows of 2 * window_half + 1 samples
    std::size_t eval_length = 200;

    std::size_t feature_length() const { return widths.size() * (2 * window_half + 1); }
    void validate() const;
};

/// Piecewise-constant signal with floor(length / 30) distinct breakpoints and
/// segment values uniform on [0, 1].
std::vector<double> generate_pwc(const PwcConfig& config, std::uint64_t seed);

/// x + N(0, noise_std^2) per sample.
std::vector<double> add_noise(const std::vector<double>& signal, double noise_std, std::uint64_t seed);

/// Unit-sum sampled Gaussian of the given standard deviation on [-ceil(4w), ceil(4w)].
std::vector<double> gaussian_kernel(double width);

/// Convolution with gaussian_kernel(width), reflective boundary.
std::vector<double> gaussian_filter(const std::vector<double>& signal, double width);
std::vector<std::vector<double>> gaussian_filter_bank(const std::vector<double>& signal, const std::vector<double>& widths);

/// Windows around sample i from every filtered version, concatenated.
std::vector<double> window_features(const std::vector<std::vector<double>>& versions, std::size_t i, std::size_t half);

struct PwcNetConfig {
    std::size_t hidden = 20;
    nn::TrainConfig train{.max_epochs = 60, .batch_size = 1500, .validation_fraction = 0.1, .patience = 8};
};

struct PwcReport {
    double noisy = 0.0;
    std::vector<double> filtered;
    double best_filtered = 0.0;
    std::size_t best_index = 0;
    double fused = 0.0;
    std::vector<double> test_clean;
    std::vector<double> test_noisy;
    std::vector<double> test_fused;
};

/// Trains on a length-train.length signal and reports SNR over the central
/// eval_length samples of a fresh test signal.
PwcReport run_pwc_experiment(const PwcConfig& train, const PwcConfig& test, const PwcNetConfig& net, std::uint64_t seed);

struct PwcSummary {
    std::vector<PwcReport> runs;
    double median_noisy = 0.0;
    double median_best_filtered = 0.0;
    double median_fused = 0.0;
};

PwcSummary run_pwc_seeds(const PwcConfig& train, const PwcConfig& test, const PwcNetConfig& net, const std::vector<std::uint64_t>& seeds);

double median(std::vector<double> values);

}  // namespace tomofuse::pwc
