#pragma once

#include "tomofuse/image.hpp"

namespace tomofuse {

/// Detector sized to cover the image diagonal with a small margin, bin
/// spacing equal to the pixel size and an odd bin count (367 for 256x256).
ScanGeometry geometry_for(const Grid& grid, std::size_t num_views, double blank_count);

/// Line integrals along every (angle, bin) ray, Joseph interpolation: the
/// ray is sampled once per row or column (whichever it crosses more of) and
/// pixels are linearly interpolated. Throws DimensionError when the detector
/// does not cover the image diagonal.
Sinogram radon_forward(const Image& image, const ScanGeometry& geometry);

/// System matrix A. Same discretisation as radon_forward.
Sinogram system_matrix_apply(const Image& image, const ScanGeometry& geometry);

/// Exact transpose of system_matrix_apply, evaluated pixel by pixel.
Image system_matrix_adjoint(const Sinogram& sino, std::size_t width, std::size_t height, double pixel_size);

}  // namespace tomofuse
