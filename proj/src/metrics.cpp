#include "tomofuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "tomofuse/rng.hpp"

namespace tomofuse::metrics {

void HuWindow::validate() const {
    if (!(low < high)) throw InputError("window low bound must be below the high bound");
}

ObjectMask ObjectMask::full(std::size_t width, std::size_t height) {
    return {width, height, std::vector<std::uint8_t>(width * height, 1), false};
}

std::size_t ObjectMask::count() const { return static_cast<std::size_t>(std::count(inside.begin(), inside.end(), 1)); }

double snr(std::span<const double> reference, std::span<const double> estimate) {
    if (reference.size() != estimate.size()) throw DimensionError("snr: inputs differ in length");
    double ff = 0.0, fe = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ff += reference[i] * reference[i];
        fe += reference[i] * estimate[i];
        ee += estimate[i] * estimate[i];
    }
    if (!(ff > 0.0)) throw UndefinedReferenceError("snr: reference is zero on the evaluated region");
    const double alpha = ee > 0.0 ? fe / ee : 0.0;
    double rr = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference[i] - alpha * estimate[i];
        rr += d * d;
    }
    if (!(rr > 0.0)) return kSnrCap;
    return std::min(kSnrCap, -10.0 * std::log10(rr / ff));
}

double snr(const Image& reference, const Image& estimate) {
    if (!reference.same_shape(estimate)) throw DimensionError("snr: images differ in size");
    return snr(reference.data(), estimate.data());
}

double snr(const Image& reference, const Image& estimate, const ObjectMask& mask) {
    if (!reference.same_shape(estimate)) throw DimensionError("snr: images differ in size");
    if (mask.width != reference.width() || mask.height != reference.height()) throw DimensionError("snr: mask differs in size");
    std::vector<double> f, g;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        if (!mask.inside[k]) continue;
        f.push_back(reference.values()[k]);
        g.push_back(estimate.values()[k]);
    }
    return snr(f, g);
}

namespace {

Image clip(const Image& im, const HuWindow& w) {
    Image out = im;
    for (double& v : out.values()) v = std::clamp(v, w.low, w.high);
    return out;
}

// Separable 'valid' Gaussian filter.
Image gaussian_valid(const Image& im, const std::vector<double>& kernel) {
    const std::size_t k = kernel.size();
    const std::size_t W = im.width(), H = im.height();
    Image horiz(W - k + 1, H, im.pixel_size());
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c + k <= W; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += kernel[t] * im(r, c + t);
            horiz(r, c) = s;
        }
    Image out(W - k + 1, H - k + 1, im.pixel_size());
    for (std::size_t r = 0; r + k <= H; ++r)
        for (std::size_t c = 0; c < out.width(); ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += kernel[t] * horiz(r + t, c);
            out(r, c) = s;
        }
    return out;
}

Image product(const Image& a, const Image& b) {
    Image out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
    return out;
}

}  // namespace

double windowed_snr(const Image& reference, const Image& estimate, const HuWindow& window) {
    window.validate();
    return snr(clip(reference, window), clip(estimate, window));
}

double windowed_snr(const Image& reference, const Image& estimate, const HuWindow& window, const ObjectMask& mask) {
    window.validate();
    return snr(clip(reference, window), clip(estimate, window), mask);
}

double ssim(const Image& reference, const Image& estimate, const SsimParams& params) {
    if (!reference.same_shape(estimate)) throw DimensionError("ssim: images differ in size");
    if (params.window < 1 || params.window % 2 == 0 || !(params.sigma > 0.0) || !(params.dynamic_range > 0.0))
        throw InputError("ssim: invalid window parameters");
    const auto k = static_cast<std::size_t>(params.window);
    if (reference.width() < k || reference.height() < k) throw DimensionError("ssim: image smaller than the window");

    std::vector<double> kernel(k);
    const double half = 0.5 * static_cast<double>(k - 1);
    for (std::size_t t = 0; t < k; ++t) {
        const double d = static_cast<double>(t) - half;
        kernel[t] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
    }
    const double ksum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
    for (double& v : kernel) v /= ksum;

    const Image mx = gaussian_valid(reference, kernel);
    const Image my = gaussian_valid(estimate, kernel);
    const Image mxx = gaussian_valid(product(reference, reference), kernel);
    const Image myy = gaussian_valid(product(estimate, estimate), kernel);
    const Image mxy = gaussian_valid(product(reference, estimate), kernel);
    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);

    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx.values()[i], uy = my.values()[i];
        const double vx = mxx.values()[i] - ux * ux;
        const double vy = myy.values()[i] - uy * uy;
        const double cxy = mxy.values()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

ObjectMask object_mask(const Image& image) {
    const std::size_t W = image.width(), H = image.height();
    const auto [lo_it, hi_it] = std::minmax_element(image.values().begin(), image.values().end());
    const double lo = *lo_it, hi = *hi_it;
    if (image.size() == 0 || !(hi > lo)) {
        ObjectMask m = ObjectMask::full(W, H);
        m.degenerate = true;
        return m;
    }

    constexpr std::size_t kBins = 256;
    std::vector<double> hist(kBins, 0.0);
    const double width = (hi - lo) / static_cast<double>(kBins);
    auto bin_of = [&](double v) { return std::min(kBins - 1, static_cast<std::size_t>((v - lo) / width)); };
    for (double v : image.values()) hist[bin_of(v)] += 1.0;
    const double total = static_cast<double>(image.size());
    double sum_all = 0.0;
    for (std::size_t b = 0; b < kBins; ++b) sum_all += static_cast<double>(b) * hist[b];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    std::size_t split = 0;
    for (std::size_t b = 0; b + 1 < kBins; ++b) {
        w0 += hist[b];
        sum0 += static_cast<double>(b) * hist[b];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            split = b;
        }
    }

    std::vector<std::uint8_t> fg(W * H);
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = bin_of(image.values()[i]) > split ? 1 : 0;

    auto flood = [&](std::vector<std::uint8_t>& seen, std::size_t start, std::uint8_t want, std::vector<std::size_t>* members) {
        std::deque<std::size_t> queue{start};
        seen[start] = 1;
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            if (members) members->push_back(i);
            const std::size_t r = i / W, c = i % W;
            const std::size_t nbr[4] = {r > 0 ? i - W : i, r + 1 < H ? i + W : i, c > 0 ? i - 1 : i, c + 1 < W ? i + 1 : i};
            for (std::size_t j : nbr)
                if (!seen[j] && fg[j] == want) {
                    seen[j] = 1;
                    queue.push_back(j);
                }
        }
    };

    // Hole filling: background not reachable from the border becomes object.
    std::vector<std::uint8_t> outside(W * H, 0);
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            const std::size_t i = r * W + c;
            if ((r == 0 || c == 0 || r + 1 == H || c + 1 == W) && !fg[i] && !outside[i]) flood(outside, i, 0, nullptr);
        }
    for (std::size_t i = 0; i < fg.size(); ++i)
        if (!fg[i] && !outside[i]) fg[i] = 1;

    std::vector<std::uint8_t> seen(W * H, 0);
    std::vector<std::size_t> largest;
    for (std::size_t i = 0; i < fg.size(); ++i) {
        if (!fg[i] || seen[i]) continue;
        std::vector<std::size_t> members;
        flood(seen, i, 1, &members);
        if (members.size() > largest.size()) largest = std::move(members);
    }

    ObjectMask mask{W, H, std::vector<std::uint8_t>(W * H, 0), false};
    for (std::size_t i : largest) mask.inside[i] = 1;
    if (largest.empty()) {
        mask = ObjectMask::full(W, H);
        mask.degenerate = true;
    }
    return mask;
}

double response_fwhm(const Image& response, Pixel p, const LirOptions& options) {
    if (options.upsample < 1) throw InputError("upsampling factor must be positive");
    const auto R = static_cast<long>(options.patch_radius);
    const long side = 2 * R + 1;
    std::vector<double> patch(static_cast<std::size_t>(side * side));
    for (long i = 0; i < side; ++i)
        for (long j = 0; j < side; ++j)
            patch[static_cast<std::size_t>(i * side + j)] = response.clamped(static_cast<long>(p.row) - R + i, static_cast<long>(p.col) - R + j);

    const auto up = static_cast<long>(options.upsample);
    const long n = side * up;
    // Sample centres of the refined grid in patch pixel coordinates.
    std::vector<long> i0(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double u = std::clamp((static_cast<double>(i) + 0.5) / static_cast<double>(up) - 0.5, 0.0, static_cast<double>(side - 1));
        const long f = std::min(static_cast<long>(std::floor(u)), side - 2);
        i0[static_cast<std::size_t>(i)] = std::max(0L, f);
        frac[static_cast<std::size_t>(i)] = u - static_cast<double>(i0[static_cast<std::size_t>(i)]);
    }
    std::vector<double> fine(static_cast<std::size_t>(n * n));
    for (long a = 0; a < n; ++a) {
        const long r = i0[static_cast<std::size_t>(a)];
        const double tr = frac[static_cast<std::size_t>(a)];
        for (long b = 0; b < n; ++b) {
            const long c = i0[static_cast<std::size_t>(b)];
            const double tc = frac[static_cast<std::size_t>(b)];
            auto at = [&](long rr, long cc) { return patch[static_cast<std::size_t>(rr * side + cc)]; };
            fine[static_cast<std::size_t>(a * n + b)] = (1 - tr) * ((1 - tc) * at(r, c) + tc * at(r, c + 1)) +
                                                        tr * ((1 - tc) * at(r + 1, c) + tc * at(r + 1, c + 1));
        }
    }
    const double peak = *std::max_element(fine.begin(), fine.end());
    if (!(peak > 0.0)) throw NumericalError("degenerate impulse response: maximum is not positive");
    const auto above = std::count_if(fine.begin(), fine.end(), [&](double v) { return v > 0.5 * peak; });
    return static_cast<double>(above) / static_cast<double>(up * up);
}

std::vector<double> lir_fwhm(const Reconstructor& recon, const Image& reference, const std::vector<Pixel>& probes,
                             const LirOptions& options) {
    if (!(options.amplitude > 0.0)) throw InputError("spike amplitude must be positive");
    const Image base = recon(reference);
    std::vector<double> out;
    out.reserve(probes.size());
    for (const Pixel& p : probes) {
        if (p.row >= reference.height() || p.col >= reference.width()) throw DimensionError("probe outside the image");
        Image spiked = reference;
        spiked(p.row, p.col) += options.amplitude;
        Image response = recon(spiked);
        if (!response.same_shape(base)) throw DimensionError("reconstructor changed the image size");
        for (std::size_t k = 0; k < response.size(); ++k) response.values()[k] -= base.values()[k];
        out.push_back(response_fwhm(response, p, options));
    }
    return out;
}

std::vector<Pixel> random_probes(const ObjectMask& mask, std::size_t count, std::uint64_t seed, std::size_t margin) {
    std::vector<std::size_t> pool;
    for (std::size_t r = margin; r + margin < mask.height; ++r)
        for (std::size_t c = margin; c + margin < mask.width; ++c)
            if (mask(r, c)) pool.push_back(r * mask.width + c);
    if (pool.size() < count) throw InputError("mask has fewer eligible pixels than requested probes");
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + static_cast<std::size_t>(rng.below(pool.size() - i))]);
    std::vector<Pixel> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back({pool[i] / mask.width, pool[i] % mask.width});
    return out;
}

}  // namespace tomofuse::metrics
