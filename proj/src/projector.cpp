#include "tomofuse/projector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tomofuse/error.hpp"
#include "tomofuse/parallel.hpp"

namespace tomofuse {
namespace {

// Per-view constants. A pixel with detector coordinate s* = x cos + y sin
// contributes to bin b with weight step * max(0, 1 - |t_b - s*| / reach):
// step is the ray length per sampled row/column and reach the detector
// distance over which the linear interpolation kernel is non-zero.
struct ViewTerms {
    double cos_t;
    double sin_t;
    double step;
    double reach;
};

std::vector<ViewTerms> view_terms(const ScanGeometry& g, double pixel_size) {
    std::vector<ViewTerms> terms(g.num_views);
    for (std::size_t v = 0; v < g.num_views; ++v) {
        const double t = g.angle(v);
        const double c = std::cos(t);
        const double s = std::sin(t);
        const double m = std::max(std::abs(c), std::abs(s));
        terms[v] = {c, s, pixel_size / m, pixel_size * m};
    }
    return terms;
}

void check_coverage(std::size_t width, std::size_t height, double pixel_size, const ScanGeometry& g) {
    g.validate();
    const double diagonal = pixel_size * std::hypot(static_cast<double>(width), static_cast<double>(height));
    const double detector = g.bin_spacing * static_cast<double>(g.num_bins);
    if (detector + 1e-9 < diagonal)
        throw DimensionError("detector width " + std::to_string(detector) + " does not cover image diagonal " +
                             std::to_string(diagonal));
}

}  // namespace

ScanGeometry geometry_for(const Grid& grid, std::size_t num_views, double blank_count) {
    const double diagonal = std::hypot(static_cast<double>(grid.width), static_cast<double>(grid.height));
    auto bins = static_cast<std::size_t>(std::ceil(diagonal)) + 4;
    if (bins % 2 == 0) ++bins;
    return ScanGeometry{num_views, bins, grid.pixel_size, blank_count};
}

Sinogram system_matrix_apply(const Image& image, const ScanGeometry& geometry) {
    check_coverage(image.width(), image.height(), image.pixel_size(), geometry);
    Sinogram sino(geometry);
    const auto terms = view_terms(geometry, image.pixel_size());
    const double center = 0.5 * (static_cast<double>(geometry.num_bins) - 1.0);
    const double inv_spacing = 1.0 / geometry.bin_spacing;
    const long last_bin = static_cast<long>(geometry.num_bins) - 1;

    parallel_for(geometry.num_views, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            const ViewTerms& vt = terms[v];
            auto out = sino.view(v);
            for (std::size_t r = 0; r < image.height(); ++r) {
                const double ys = image.y_of(r) * vt.sin_t;
                for (std::size_t c = 0; c < image.width(); ++c) {
                    const double f = image(r, c);
                    if (f == 0.0) continue;
                    const double s_star = image.x_of(c) * vt.cos_t + ys;
                    const long lo = std::max(0L, static_cast<long>(std::ceil((s_star - vt.reach) * inv_spacing + center)));
                    const long hi = std::min(last_bin, static_cast<long>(std::floor((s_star + vt.reach) * inv_spacing + center)));
                    for (long b = lo; b <= hi; ++b) {
                        const double w = 1.0 - std::abs(geometry.bin_position(static_cast<std::size_t>(b)) - s_star) / vt.reach;
                        if (w > 0.0) out[static_cast<std::size_t>(b)] += vt.step * w * f;
                    }
                }
            }
        }
    });
    return sino;
}

Sinogram radon_forward(const Image& image, const ScanGeometry& geometry) { return system_matrix_apply(image, geometry); }

Image system_matrix_adjoint(const Sinogram& sino, std::size_t width, std::size_t height, double pixel_size) {
    const ScanGeometry& geometry = sino.geometry;
    if (sino.data.size() != geometry.size()) throw DimensionError("sinogram data does not match its geometry");
    Image image(width, height, pixel_size);
    check_coverage(width, height, pixel_size, geometry);
    const auto terms = view_terms(geometry, pixel_size);
    const double center = 0.5 * (static_cast<double>(geometry.num_bins) - 1.0);
    const double inv_spacing = 1.0 / geometry.bin_spacing;
    const long last_bin = static_cast<long>(geometry.num_bins) - 1;

    parallel_for(height, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const double y = image.y_of(r);
            for (std::size_t c = 0; c < width; ++c) {
                const double x = image.x_of(c);
                double acc = 0.0;
                for (std::size_t v = 0; v < geometry.num_views; ++v) {
                    const ViewTerms& vt = terms[v];
                    const double s_star = x * vt.cos_t + y * vt.sin_t;
                    const long lo = std::max(0L, static_cast<long>(std::ceil((s_star - vt.reach) * inv_spacing + center)));
                    const long hi = std::min(last_bin, static_cast<long>(std::floor((s_star + vt.reach) * inv_spacing + center)));
                    const auto row = sino.view(v);
                    for (long b = lo; b <= hi; ++b) {
                        const double w = 1.0 - std::abs(geometry.bin_position(static_cast<std::size_t>(b)) - s_star) / vt.reach;
                        if (w > 0.0) acc += vt.step * w * row[static_cast<std::size_t>(b)];
                    }
                }
                image(r, c) = acc;
            }
        }
    });
    return image;
}

}  // namespace tomofuse
