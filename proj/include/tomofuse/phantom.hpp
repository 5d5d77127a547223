#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tomofuse/image.hpp"

namespace tomofuse {

/// Ellipse in physical coordinates (origin at the raster centre, y up).
struct Ellipse {
    double cx = 0.0;
    double cy = 0.0;
    double a = 1.0;  ///< semi-axis along the rotated x direction
    double b = 1.0;
    double angle_deg = 0.0;
    double value = 0.0;  ///< added to every pixel whose centre lies inside

    bool contains(double x, double y) const;
};

/// Low-amplitude cosine texture, value amplitude * cos(kx*x + ky*y + phase).
struct TextureWave {
    double amplitude = 0.0;
    double kx = 0.0;
    double ky = 0.0;
    double phase = 0.0;
};

/// Additive ellipse phantom. Pixel value = background + sum of the values of
/// all ellipses containing the pixel centre + texture inside texture_support.
struct Phantom {
    double background = 0.0;
    std::vector<Ellipse> ellipses;
    std::vector<TextureWave> texture;
    Ellipse texture_support;

    void validate() const;
};

Image rasterize_phantom(const Phantom& phantom, std::size_t width, std::size_t height, double pixel_size);

/// Modified Shepp-Logan head in Hounsfield-like units, scaled so the skull
/// fills a disk of radius fov_radius.
Phantom shepp_logan(double fov_radius);

/// Seeded thigh-like section: fat and muscle layers, one or two bones with
/// marrow, air pockets, faint lesions (+-30..80 HU) and smooth tissue texture.
Phantom random_tissue(std::uint64_t seed, double fov_radius);

/// Text format, one entry per line ('#' starts a comment):
///   cx cy a b angle_deg value
///   background <value>
///   wave <amplitude> <kx> <ky> <phase>
///   support <cx> <cy> <a> <b> <angle_deg>
Phantom parse_phantom(const std::string& text);
std::string format_phantom(const Phantom& phantom);
Phantom load_phantom(const std::filesystem::path& path);

}  // namespace tomofuse
