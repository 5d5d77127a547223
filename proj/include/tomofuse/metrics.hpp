#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tomofuse/error.hpp"
#include "tomofuse/image.hpp"

namespace tomofuse::metrics {

/// Returned when the residual is zero (or the ratio would exceed it).
inline constexpr double kSnrCap = 300.0;

/// The reference is identically zero where SNR is evaluated.
class UndefinedReferenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct HuWindow {
    double low = -220.0;
    double high = 350.0;
    void validate() const;
};

struct ObjectMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> inside;
    bool degenerate = false;  ///< set when no object could be separated; the mask then covers everything

    static ObjectMask full(std::size_t width, std::size_t height);
    bool operator()(std::size_t row, std::size_t col) const { return inside[row * width + col] != 0; }
    std::size_t count() const;
};

/// -20 log10(|f - a f_hat| / |f|) at the optimal scale a = <f, f_hat> / |f_hat|^2.
double snr(std::span<const double> reference, std::span<const double> estimate);
double snr(const Image& reference, const Image& estimate);
double snr(const Image& reference, const Image& estimate, const ObjectMask& mask);

/// Both images clipped into the window before snr.
double windowed_snr(const Image& reference, const Image& estimate, const HuWindow& window = {});
double windowed_snr(const Image& reference, const Image& estimate, const HuWindow& window, const ObjectMask& mask);

struct SsimParams {
    double dynamic_range = 570.0;
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean of the Gaussian-weighted SSIM map over every window position that
/// lies fully inside the image. Throws DimensionError for images smaller
/// than the window.
double ssim(const Image& reference, const Image& estimate, const SsimParams& params = {});

/// Otsu threshold, hole filling and the largest 4-connected component.
ObjectMask object_mask(const Image& image);

struct Pixel {
    std::size_t row = 0;
    std::size_t col = 0;
};

/// Maps an image to its reconstruction (typically scan then reconstruct).
using Reconstructor = std::function<Image(const Image&)>;

struct LirOptions {
    double amplitude = 1000.0;
    std::size_t patch_radius = 8;
    std::size_t upsample = 16;
};

/// Area above half maximum of a response patch centred at p after bilinear
/// upsampling, in original pixels. Throws NumericalError when the patch
/// maximum is not positive.
double response_fwhm(const Image& response, Pixel p, const LirOptions& options = {});

/// recon(f + spike at p) - recon(f) for every probe, measured by response_fwhm.
std::vector<double> lir_fwhm(const Reconstructor& recon, const Image& reference, const std::vector<Pixel>& probes,
                             const LirOptions& options = {});

/// Distinct seeded probe locations inside the mask, at least `margin` pixels
/// from the image border.
std::vector<Pixel> random_probes(const ObjectMask& mask, std::size_t count, std::uint64_t seed, std::size_t margin);

}  // namespace tomofuse::metrics
