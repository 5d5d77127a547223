#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tomofuse/fbp.hpp"
#include "tomofuse/image.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/pwls.hpp"

namespace tomofuse::fusion {

struct Offset {
    int dy = 0;
    int dx = 0;
};

/// Pixel offsets with dx^2 + dy^2 <= r^2, ordered by dy then dx.
class DiskOffsets {
public:
    explicit DiskOffsets(int radius);

    int radius() const noexcept { return radius_; }
    std::size_t size() const noexcept { return offsets_.size(); }
    const std::vector<Offset>& offsets() const noexcept { return offsets_; }

private:
    int radius_;
    std::vector<Offset> offsets_;
};

std::size_t disk_count(int radius);

struct Location {
    std::size_t row = 0;
    std::size_t col = 0;
};

struct FusionConfig {
    std::vector<int> radii{3, 3, 3};  ///< one neighbourhood radius per image version
    int output_radius = 3;            ///< 0 predicts the centre pixel only
    std::size_t stride = 3;           ///< training grid spacing
    double variance_prune = 1e-6;     ///< drop examples below this fraction of the max feature variance
    double gradient_cap = 0.02;       ///< zero weight above this fraction of the max accumulated gradient
    std::size_t max_examples = 30000;
    std::uint64_t seed = 1;

    std::size_t input_size() const;
    std::size_t output_size() const { return disk_count(output_radius); }
    int margin() const;
    void validate() const;

    /// Three versions at radius 3, 29-pixel output disks.
    static FusionConfig fbp_default();
    /// Radii 4, 1, 4 and a single output pixel.
    static FusionConfig pwls_default();
};

/// Values at q + offsets. Throws std::out_of_range when the disk leaves the image.
std::vector<double> extract_disk(const Image& image, Location q, int radius);

/// Concatenation of the per-version disks, in stack order.
std::vector<double> build_features(const std::vector<Image>& stack, Location q, const std::vector<int>& radii);

/// Population variance of a feature vector.
double feature_variance(std::span<const double> features);

/// Central-difference gradient magnitude (one-sided at the border).
Image gradient_magnitude(const Image& reference);

/// Sum of gradient magnitude over the output disk footprint around q.
double accumulated_gradient(const Image& gradient, Location q, int output_radius);

/// Pool-wide maxima the weighting rules are relative to.
struct WeightStats {
    double max_variance = 0.0;
    double max_gradient = 0.0;
};

bool is_low_variance(double variance, const WeightStats& stats, const FusionConfig& config);

/// rho = 0 for low-variance inputs or when the accumulated reference gradient
/// exceeds gradient_cap * max; otherwise gradient / max gradient.
double compute_example_weight(double variance, double gradient, const WeightStats& stats, const FusionConfig& config);

struct ExampleRecord {
    Location q;
    std::vector<double> features;
    std::vector<double> target;
    double weight = 0.0;
};

/// Reconstructed versions of one slice and its reference image.
struct TrainingPair {
    std::vector<Image> stack;
    Image reference;
};

struct FusionDataset {
    nn::TrainingSet set;  ///< inputs and targets normalised with norm
    nn::Normalization norm;
    std::vector<std::size_t> pair_index;
    std::vector<Location> locations;
    std::size_t candidates = 0;
    std::size_t variance_pruned = 0;
    std::size_t zero_weight = 0;
};

/// Samples every pair on the stride grid inside the margin. Low-variance
/// examples are dropped, strong-edge examples kept with zero weight, the pool
/// is capped at max_examples by seeded subsampling, and inputs and targets
/// are normalised with constants fitted on the feature matrix. Throws
/// NumericalError when nothing survives.
FusionDataset build_training_set(const std::vector<TrainingPair>& pairs, const FusionConfig& config);

/// Copies the dataset normalisation into a network.
void attach_normalization(nn::NeuralNet& net, const nn::Normalization& norm);

struct FuseResult {
    Image image;
    Image coverage;  ///< number of output disks that touched each pixel
};

/// Runs the network at every pixel (clamp-to-edge input extraction) and
/// averages the overlapping output disks.
FuseResult fuse_with_coverage(const std::vector<Image>& stack, const nn::NeuralNet& net, const FusionConfig& config);
Image fuse(const std::vector<Image>& stack, const nn::NeuralNet& net, const FusionConfig& config);

/// FBP versions of a scan in Hounsfield units.
std::vector<Image> fbp_versions(const CountsData& counts, const FilterBank& bank, const Grid& grid, const Calibration& calibration);

/// Selected PWLS snapshots (by iteration number) in Hounsfield units. The
/// run starts from an FBP image with init_filter.
std::vector<Image> pwls_versions(const CountsData& counts, const std::vector<std::size_t>& iterations, const Grid& grid,
                                 const Calibration& calibration, const PwlsParams& params, const FilterParams& init_filter,
                                 PwlsResult* run = nullptr);

Image end_to_end_fbp_boost(const CountsData& counts, const FilterBank& bank, const nn::NeuralNet& net,
                           const FusionConfig& config, const Grid& grid, const Calibration& calibration);

Image end_to_end_pwls_boost(const CountsData& counts, const std::vector<std::size_t>& iterations, const nn::NeuralNet& net,
                            const FusionConfig& config, const Grid& grid, const Calibration& calibration,
                            const PwlsParams& params, const FilterParams& init_filter);

/// TFDS1 dataset file:
///   TFDS1\n
///   examples=<K> inputs=<m> outputs=<n> norm_shift=<f> norm_scale=<f>\n
///   K rows of (rho, X..., Y...) little-endian float64
void save_dataset(const std::filesystem::path& path, const nn::TrainingSet& set, const nn::Normalization& norm);
nn::TrainingSet load_dataset(const std::filesystem::path& path, nn::Normalization& norm);

}  // namespace tomofuse::fusion
