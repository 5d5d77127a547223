#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tomofuse {

/// Returns f(x) and writes grad f(x) into grad.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Called after each accepted iterate with its 1-based iteration number.
using IterationCallback = std::function<void(std::size_t iteration, std::span<const double> x, double value)>;

struct LbfgsOptions {
    std::size_t memory = 10;
    std::size_t max_iters = 100;
    double grad_tolerance = 1e-8;
    double armijo = 1e-4;
    double shrink = 0.5;
    std::size_t max_backtracks = 30;
};

enum class LbfgsStatus { Converged, MaxIterations, LineSearchFailed };

const char* to_string(LbfgsStatus status);

struct LbfgsResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    LbfgsStatus status = LbfgsStatus::MaxIterations;
    /// Objective at the start point followed by every accepted iterate.
    std::vector<double> trace;
};

/// Limited-memory BFGS: two-loop recursion for the search direction,
/// backtracking line search enforcing the Armijo sufficient-decrease
/// condition. When the decrease is below the rounding of the objective, a
/// step is also accepted if the value does not increase and the gradient norm
/// shrinks. Curvature pairs with non-positive s'y are skipped.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> start, const LbfgsOptions& options,
                           const IterationCallback& on_iteration = {});

}  // namespace tomofuse
