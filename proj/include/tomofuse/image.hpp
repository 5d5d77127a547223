#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tomofuse {

/// Row-major 2-D raster. Row 0 is the top of the image (largest y); the
/// physical origin sits at the raster centre.
class Image {
public:
    Image() = default;
    Image(std::size_t width, std::size_t height, double pixel_size = 1.0, double fill = 0.0);
    Image(std::size_t width, std::size_t height, double pixel_size, std::vector<double> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    double pixel_size() const noexcept { return pixel_size_; }

    double& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
    double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

    /// Clamp-to-edge access for signed coordinates.
    double clamped(long row, long col) const;

    /// Physical coordinates of a pixel centre.
    double x_of(std::size_t col) const noexcept { return (static_cast<double>(col) - 0.5 * (static_cast<double>(width_) - 1.0)) * pixel_size_; }
    double y_of(std::size_t row) const noexcept { return (0.5 * (static_cast<double>(height_) - 1.0) - static_cast<double>(row)) * pixel_size_; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept { return width_ == other.width_ && height_ == other.height_; }

    /// True when every value is finite.
    bool finite() const;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    double pixel_size_ = 1.0;
    std::vector<double> data_;
};

/// Raster dimensions without content.
struct Grid {
    std::size_t width = 256;
    std::size_t height = 256;
    double pixel_size = 1.0;

    Image blank() const { return Image(width, height, pixel_size); }
};

/// 2-D parallel-beam acquisition: angles uniform on [0, pi), detector
/// centred on the rotation axis.
struct ScanGeometry {
    std::size_t num_views = 360;
    std::size_t num_bins = 367;
    double bin_spacing = 1.0;
    double blank_count = 2e5;

    double angle(std::size_t view) const noexcept;
    /// Signed detector coordinate of a bin centre.
    double bin_position(std::size_t bin) const noexcept {
        return (static_cast<double>(bin) - 0.5 * (static_cast<double>(num_bins) - 1.0)) * bin_spacing;
    }
    std::size_t size() const noexcept { return num_views * num_bins; }
    void validate() const;
};

/// Line integrals g, stored view-major (num_views x num_bins).
struct Sinogram {
    ScanGeometry geometry;
    std::vector<double> data;

    Sinogram() = default;
    explicit Sinogram(const ScanGeometry& g) : geometry(g), data(g.size(), 0.0) {}

    double& at(std::size_t view, std::size_t bin) { return data[view * geometry.num_bins + bin]; }
    double at(std::size_t view, std::size_t bin) const { return data[view * geometry.num_bins + bin]; }
    std::span<double> view(std::size_t v) { return {data.data() + v * geometry.num_bins, geometry.num_bins}; }
    std::span<const double> view(std::size_t v) const { return {data.data() + v * geometry.num_bins, geometry.num_bins}; }
};

/// Detected photon counts y, same layout as Sinogram.
struct CountsData {
    ScanGeometry geometry;
    std::vector<double> counts;
};

/// Conversion between Hounsfield-like units and linear attenuation per unit
/// length: mu = mu_water * (1 + HU / 1000), negative attenuation clamped to 0.
struct Calibration {
    double mu_water = 0.2;

    Image to_attenuation(const Image& hu) const;
    Image to_hu(const Image& attenuation) const;
};

/// Elementwise helpers used across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace tomofuse
