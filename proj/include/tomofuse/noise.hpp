#pragma once

#include <cstdint>

#include "tomofuse/image.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse {

/// Counts below this are raised to it before the log transform.
inline constexpr double kCountFloor = 1.0;

/// Poisson(lambda) draw: inversion for lambda < 30, rounded normal
/// approximation clamped at zero above.
double poisson_sample(double lambda, Rng& rng);

/// Expected counts lambda = blank * exp(-g); Poisson draws unless noiseless.
/// Each view uses its own child stream of the seed.
CountsData simulate_counts(const Sinogram& sino, std::uint64_t seed, bool noiseless = false);

/// g_hat = -log(max(y, floor) / blank).
Sinogram counts_to_sinogram(const CountsData& counts, double count_floor = kCountFloor);

}  // namespace tomofuse
