#include "tomofuse/noise.hpp"

#include <algorithm>
#include <cmath>

#include "tomofuse/error.hpp"

namespace tomofuse {

double poisson_sample(double lambda, Rng& rng) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("Poisson mean must be finite and non-negative");
    if (lambda == 0.0) return 0.0;
    if (lambda < 30.0) {
        // Sequential inversion of the CDF.
        const double u = rng.uniform();
        double p = std::exp(-lambda);
        double cdf = p;
        double k = 0.0;
        while (u > cdf && k < 1000.0) {
            k += 1.0;
            p *= lambda / k;
            cdf += p;
        }
        return k;
    }
    return std::max(0.0, std::round(lambda + std::sqrt(lambda) * rng.normal()));
}

CountsData simulate_counts(const Sinogram& sino, std::uint64_t seed, bool noiseless) {
    const ScanGeometry& g = sino.geometry;
    g.validate();
    if (sino.data.size() != g.size()) throw DimensionError("sinogram data does not match its geometry");
    for (double v : sino.data)
        if (!std::isfinite(v)) throw InputError("sinogram contains a non-finite value");

    CountsData out{g, std::vector<double>(g.size())};
    const Rng root(seed);
    for (std::size_t v = 0; v < g.num_views; ++v) {
        Rng rng = root.split(v);
        for (std::size_t b = 0; b < g.num_bins; ++b) {
            const std::size_t i = v * g.num_bins + b;
            const double lambda = g.blank_count * std::exp(-sino.data[i]);
            out.counts[i] = noiseless ? lambda : poisson_sample(lambda, rng);
        }
    }
    return out;
}

Sinogram counts_to_sinogram(const CountsData& counts, double count_floor) {
    const ScanGeometry& g = counts.geometry;
    g.validate();
    if (counts.counts.size() != g.size()) throw DimensionError("count data does not match its geometry");
    Sinogram out(g);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = -std::log(std::max(counts.counts[i], count_floor) / g.blank_count);
    return out;
}

}  // namespace tomofuse
