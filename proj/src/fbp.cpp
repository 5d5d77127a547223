#include "tomofuse/fbp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "tomofuse/error.hpp"
#include "tomofuse/parallel.hpp"

namespace tomofuse {

void FilterParams::validate() const {
    if (!(cutoff > 0.0)) throw InputError("filter cut-off must be positive or infinite");
    if (order < 1) throw InputError("filter order must be at least 1");
}

FilterBank default_filter_bank() {
    return {{0.4, 3}, {1.15, 3}, {std::numeric_limits<double>::infinity(), 3}};
}

void validate_bank(const FilterBank& bank) {
    if (bank.empty()) throw InputError("filter bank is empty");
    for (std::size_t i = 0; i < bank.size(); ++i) {
        bank[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (bank[i] == bank[j]) throw InputError("filter bank entries must be distinct");
    }
}

double butterworth_gain(double omega, const FilterParams& params) {
    if (std::isinf(params.cutoff)) return 1.0;
    return 1.0 / std::sqrt(1.0 + std::pow(omega / params.cutoff, 2.0 * params.order));
}

std::size_t padded_length(std::size_t bins) {
    std::size_t n = 1;
    while (n < 2 * bins) n <<= 1;
    return n;
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// Filters views of a fixed length. The plans are created once; execution
// uses per-call buffers so filter() may run concurrently.
class ProjectionFilter {
public:
    ProjectionFilter(std::size_t bins, double bin_spacing, const FilterParams& params)
        : bins_(bins), padded_(padded_length(bins)), response_(padded_ / 2 + 1) {
        params.validate();
        auto real = alloc_real();
        auto spectrum = alloc_complex();
        {
            std::lock_guard lock(planner_mutex());
            forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(padded_), real.get(), spectrum.get(), FFTW_ESTIMATE);
            inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(padded_), spectrum.get(), real.get(), FFTW_ESTIMATE);
        }
        // Band-limited ramp sampled in space (h[0] = 1/4, h[odd n] = -1/(pi n)^2,
        // in units of 1/spacing^2) and wrapped onto the padded circle.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        std::fill(real.get(), real.get() + padded_, 0.0);
        real.get()[0] = 0.25 / bin_spacing;
        for (std::size_t n = 1; n < padded_ / 2; n += 2) {
            const double h = -1.0 / (pi2 * static_cast<double>(n * n) * bin_spacing);
            real.get()[n] = h;
            real.get()[padded_ - n] = h;
        }
        fftw_execute_dft_r2c(forward_, real.get(), spectrum.get());
        for (std::size_t k = 0; k < response_.size(); ++k) {
            const double omega = 2.0 * static_cast<double>(k) / static_cast<double>(padded_);
            response_[k] = spectrum.get()[k][0] * butterworth_gain(omega, params) / static_cast<double>(padded_);
        }
    }
    ProjectionFilter(const ProjectionFilter&) = delete;
    ProjectionFilter& operator=(const ProjectionFilter&) = delete;
    ~ProjectionFilter() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    std::size_t padded() const { return padded_; }

    // Writes the full padded filtered signal into out (length padded()).
    void filter(std::span<const double> view, std::span<double> out) const {
        auto real = alloc_real();
        auto spectrum = alloc_complex();
        std::fill(real.get(), real.get() + padded_, 0.0);
        std::copy(view.begin(), view.end(), real.get());
        fftw_execute_dft_r2c(forward_, real.get(), spectrum.get());
        for (std::size_t k = 0; k < response_.size(); ++k) {
            spectrum.get()[k][0] *= response_[k];
            spectrum.get()[k][1] *= response_[k];
        }
        fftw_execute_dft_c2r(inverse_, spectrum.get(), real.get());
        std::copy(real.get(), real.get() + padded_, out.begin());
    }

    std::size_t bins() const { return bins_; }
    const std::vector<double>& response() const { return response_; }

private:
    std::unique_ptr<double, FftwFree> alloc_real() const {
        return std::unique_ptr<double, FftwFree>(fftw_alloc_real(padded_));
    }
    std::unique_ptr<fftw_complex, FftwFree> alloc_complex() const {
        return std::unique_ptr<fftw_complex, FftwFree>(fftw_alloc_complex(padded_ / 2 + 1));
    }

    std::size_t bins_;
    std::size_t padded_;
    std::vector<double> response_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

Sinogram filter_sinogram(const Sinogram& sino, const FilterParams& params) {
    const ScanGeometry& g = sino.geometry;
    const ProjectionFilter filter(g.num_bins, g.bin_spacing, params);
    Sinogram out(g);
    parallel_for(g.num_views, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buffer(filter.padded());
        for (std::size_t v = begin; v < end; ++v) {
            filter.filter(sino.view(v), buffer);
            std::copy_n(buffer.begin(), g.num_bins, out.view(v).begin());
        }
    });
    return out;
}

}  // namespace

std::vector<double> filter_response(std::size_t bins, double bin_spacing, const FilterParams& params) {
    const ProjectionFilter filter(bins, bin_spacing, params);
    std::vector<double> out = filter.response();
    for (double& v : out) v *= static_cast<double>(filter.padded());
    return out;
}

std::vector<double> filter_projection_padded(std::span<const double> view, double bin_spacing, const FilterParams& params) {
    const ProjectionFilter filter(view.size(), bin_spacing, params);
    std::vector<double> out(filter.padded());
    filter.filter(view, out);
    return out;
}

std::vector<double> filter_projection(std::span<const double> view, double bin_spacing, const FilterParams& params) {
    auto out = filter_projection_padded(view, bin_spacing, params);
    out.resize(view.size());
    return out;
}

Image backproject(const Sinogram& sino, std::size_t width, std::size_t height, double pixel_size) {
    const ScanGeometry& g = sino.geometry;
    g.validate();
    if (sino.data.size() != g.size()) throw DimensionError("sinogram data does not match its geometry");
    Image image(width, height, pixel_size);
    std::vector<double> cos_t(g.num_views), sin_t(g.num_views);
    for (std::size_t v = 0; v < g.num_views; ++v) {
        cos_t[v] = std::cos(g.angle(v));
        sin_t[v] = std::sin(g.angle(v));
    }
    const double center = 0.5 * (static_cast<double>(g.num_bins) - 1.0);
    const double scale = std::numbers::pi / static_cast<double>(g.num_views);
    const long bins = static_cast<long>(g.num_bins);

    parallel_for(height, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const double y = image.y_of(r);
            for (std::size_t c = 0; c < width; ++c) {
                const double x = image.x_of(c);
                double acc = 0.0;
                for (std::size_t v = 0; v < g.num_views; ++v) {
                    const double t = (x * cos_t[v] + y * sin_t[v]) / g.bin_spacing + center;
                    const double fl = std::floor(t);
                    const long b0 = static_cast<long>(fl);
                    const double frac = t - fl;
                    const auto row = sino.view(v);
                    if (b0 >= 0 && b0 < bins) acc += (1.0 - frac) * row[static_cast<std::size_t>(b0)];
                    if (b0 + 1 >= 0 && b0 + 1 < bins) acc += frac * row[static_cast<std::size_t>(b0 + 1)];
                }
                image(r, c) = acc * scale;
            }
        }
    });
    return image;
}

Image fbp_reconstruct(const Sinogram& sino, const FilterParams& params, std::size_t width, std::size_t height,
                      double pixel_size) {
    return backproject(filter_sinogram(sino, params), width, height, pixel_size);
}

std::vector<Image> fbp_sweep(const Sinogram& sino, const FilterBank& bank, std::size_t width, std::size_t height,
                             double pixel_size) {
    validate_bank(bank);
    std::vector<Image> out;
    out.reserve(bank.size());
    for (const auto& params : bank) out.push_back(fbp_reconstruct(sino, params, width, height, pixel_size));
    return out;
}

}  // namespace tomofuse
