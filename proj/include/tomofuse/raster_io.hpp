#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tomofuse/image.hpp"

namespace tomofuse {

/// Contents of a TFR1 raster file:
///
///   TFR1\n
///   kind=<image|sinogram> rows=<r> cols=<c> pixel_size=<f> extra=<k=v,...>\n
///   rows*cols little-endian float64, row-major
struct RasterFile {
    std::string kind = "image";
    std::size_t rows = 0;
    std::size_t cols = 0;
    double pixel_size = 1.0;
    std::map<std::string, std::string> extra;
    std::vector<double> data;
};

void write_raster(const std::filesystem::path& path, const RasterFile& file);
RasterFile read_raster(const std::filesystem::path& path);

void save_image(const std::filesystem::path& path, const Image& image,
                const std::map<std::string, std::string>& extra = {});
Image load_image(const std::filesystem::path& path);

/// Sinograms store bin spacing in pixel_size and the blank count in extra.
void save_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram load_sinogram(const std::filesystem::path& path);

/// Counts are sinogram-kind rasters tagged content=counts.
void save_counts(const std::filesystem::path& path, const CountsData& counts);
CountsData load_counts(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace tomofuse
