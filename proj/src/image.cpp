#include "tomofuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tomofuse/error.hpp"

namespace tomofuse {

Image::Image(std::size_t width, std::size_t height, double pixel_size, double fill)
    : Image(width, height, pixel_size, std::vector<double>(width * height, fill)) {}

Image::Image(std::size_t width, std::size_t height, double pixel_size, std::vector<double> data)
    : width_(width), height_(height), pixel_size_(pixel_size), data_(std::move(data)) {
    if (width == 0 || height == 0) throw InputError("image dimensions must be positive");
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) throw InputError("pixel size must be positive");
    if (data_.size() != width * height)
        throw DimensionError("image data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(width) + "x" + std::to_string(height));
}

double Image::clamped(long row, long col) const {
    row = std::clamp(row, 0L, static_cast<long>(height_) - 1);
    col = std::clamp(col, 0L, static_cast<long>(width_) - 1);
    return data_[static_cast<std::size_t>(row) * width_ + static_cast<std::size_t>(col)];
}

bool Image::finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double ScanGeometry::angle(std::size_t view) const noexcept {
    return std::numbers::pi * static_cast<double>(view) / static_cast<double>(num_views);
}

void ScanGeometry::validate() const {
    if (num_views == 0 || num_bins == 0) throw InputError("scan geometry needs at least one view and one bin");
    if (!(bin_spacing > 0.0)) throw InputError("bin spacing must be positive");
    if (!(blank_count > 0.0)) throw InputError("blank count must be positive");
}

Image Calibration::to_attenuation(const Image& hu) const {
    Image out(hu.width(), hu.height(), hu.pixel_size());
    std::transform(hu.values().begin(), hu.values().end(), out.values().begin(),
                   [mu = mu_water](double v) { return std::max(0.0, mu * (1.0 + v / 1000.0)); });
    return out;
}

Image Calibration::to_hu(const Image& attenuation) const {
    Image out(attenuation.width(), attenuation.height(), attenuation.pixel_size());
    std::transform(attenuation.values().begin(), attenuation.values().end(), out.values().begin(),
                   [mu = mu_water](double v) { return 1000.0 * (v / mu - 1.0); });
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace tomofuse
