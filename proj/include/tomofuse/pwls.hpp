#pragma once

#include <cstddef>
#include <vector>

#include "tomofuse/image.hpp"
#include "tomofuse/lbfgs.hpp"

namespace tomofuse {

struct PwlsParams {
    double beta = 8e-5;   ///< prior weight
    double delta = 0.02;  ///< Huber threshold
    std::size_t max_iters = 90;
    std::size_t snapshot_every = 10;
    std::size_t lbfgs_memory = 10;
    double grad_tolerance = 1e-10;

    void validate() const;
};

/// Diagonal of the data weighting, laid out like the sinogram.
struct WeightMap {
    ScanGeometry geometry;
    std::vector<double> weights;
};

/// w = y / max(y).
WeightMap weights_from_counts(const CountsData& counts);

/// psi(x) = x^2/2 for |x| < delta, delta |x| - delta^2/2 otherwise.
double huber(double x, double delta);
double huber_deriv(double x, double delta);

/// Roughness R(f) = sum_q sum_{k in N(q)} psi(f_q - f_k) over the 4-connected
/// neighbourhood. Every ordered pair is visited, so each adjacent pair of
/// pixels contributes 2 psi(difference).
double penalty(const Image& image, double delta);
Image penalty_gradient(const Image& image, double delta);

/// (Af - g)' D (Af - g) + beta R(f), with A the matched system matrix.
double pwls_objective(const Image& f, const Sinogram& g_hat, const WeightMap& w, const PwlsParams& params);
/// 2 A' D (Af - g) + beta grad R(f).
Image pwls_gradient(const Image& f, const Sinogram& g_hat, const WeightMap& w, const PwlsParams& params);

struct PwlsResult {
    std::vector<Image> snapshots;
    std::vector<std::size_t> snapshot_iterations;
    /// Objective at the initial image and after every accepted iterate.
    std::vector<double> objective_trace;
    LbfgsStatus status = LbfgsStatus::MaxIterations;
    std::size_t iterations = 0;
};

/// Minimises the PWLS objective from init with L-BFGS, saving a copy of the
/// iterate every snapshot_every iterations. A converged run repeats its final
/// iterate for the remaining snapshot slots; a line-search failure ends the
/// snapshot list early.
PwlsResult pwls_reconstruct(const CountsData& counts, const Image& init, const PwlsParams& params);

}  // namespace tomofuse
