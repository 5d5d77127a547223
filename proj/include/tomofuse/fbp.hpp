#pragma once

#include <limits>
#include <span>
#include <vector>

#include "tomofuse/image.hpp"

namespace tomofuse {

/// Butterworth low-pass window. Cutoff is in normalised frequency where 1 is
/// the Nyquist frequency of the bin sampling; infinity disables the window.
struct FilterParams {
    double cutoff = std::numeric_limits<double>::infinity();
    int order = 3;

    void validate() const;
    bool operator==(const FilterParams&) const = default;
};

using FilterBank = std::vector<FilterParams>;

/// Cut-offs 0.4, 1.15 and no low-pass, all order 3.
FilterBank default_filter_bank();
void validate_bank(const FilterBank& bank);

/// |H(w)| = (1 + (w / cutoff)^(2 order))^(-1/2).
double butterworth_gain(double omega, const FilterParams& params);

/// Length of the zero-padded buffer: next power of two >= 2 * bins.
std::size_t padded_length(std::size_t bins);

/// Frequency response per rfft bin of the padded length (ramp times gain).
std::vector<double> filter_response(std::size_t bins, double bin_spacing, const FilterParams& params);

/// Ram-Lak ramp times the Butterworth gain, applied in the Fourier domain to
/// the zero-padded view. The ramp is the transform of the sampled band-limited
/// spatial kernel: |nu| away from zero frequency, small positive at DC.
/// Returns the full padded result.
std::vector<double> filter_projection_padded(std::span<const double> view, double bin_spacing, const FilterParams& params);

/// Same, cropped back to the input length.
std::vector<double> filter_projection(std::span<const double> view, double bin_spacing, const FilterParams& params);

/// Pixel-driven back-projection with linear interpolation in s, scaled by
/// pi / num_views.
Image backproject(const Sinogram& sino, std::size_t width, std::size_t height, double pixel_size);

Image fbp_reconstruct(const Sinogram& sino, const FilterParams& params, std::size_t width, std::size_t height,
                      double pixel_size);

/// One reconstruction per bank entry, all from the same sinogram.
std::vector<Image> fbp_sweep(const Sinogram& sino, const FilterBank& bank, std::size_t width, std::size_t height,
                             double pixel_size);

}  // namespace tomofuse
