#include "tomofuse/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "tomofuse/error.hpp"
#include "tomofuse/image.hpp"

namespace tomofuse {

const char* to_string(LbfgsStatus status) {
    switch (status) {
        case LbfgsStatus::Converged: return "converged";
        case LbfgsStatus::MaxIterations: return "max-iterations";
        case LbfgsStatus::LineSearchFailed: return "line-search-failed";
    }
    return "unknown";
}

namespace {

struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
};

void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

std::vector<double> two_loop(const std::deque<CurvaturePair>& history, std::span<const double> grad) {
    std::vector<double> q(grad.begin(), grad.end());
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * dot(history[i].s, q);
        axpy(-alpha[i], history[i].y, q);
    }
    const auto& last = history.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * dot(history[i].y, q);
        axpy(alpha[i] - beta, history[i].s, q);
    }
    for (double& v : q) v = -v;
    return q;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> start, const LbfgsOptions& options,
                           const IterationCallback& on_iteration) {
    if (options.memory == 0) throw InputError("L-BFGS memory must be at least 1");
    for (double v : start)
        if (!std::isfinite(v)) throw InputError("L-BFGS start point is not finite");

    const std::size_t n = start.size();
    LbfgsResult result;
    result.x = std::move(start);
    std::vector<double> grad(n);
    result.value = objective(result.x, grad);
    result.trace.push_back(result.value);
    if (norm2(grad) <= options.grad_tolerance) {
        result.status = LbfgsStatus::Converged;
        return result;
    }

    std::deque<CurvaturePair> history;
    std::vector<double> trial(n), trial_grad(n);
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        std::vector<double> direction;
        double step = 1.0;
        if (history.empty()) {
            direction.assign(grad.begin(), grad.end());
            for (double& v : direction) v = -v;
            step = 1.0 / norm2(grad);
        } else {
            direction = two_loop(history, grad);
        }
        double slope = dot(grad, direction);
        if (!(slope < 0.0)) {
            history.clear();
            direction.assign(grad.begin(), grad.end());
            for (double& v : direction) v = -v;
            step = 1.0 / norm2(grad);
            slope = dot(grad, direction);
        }

        bool accepted = false;
        double trial_value = 0.0;
        for (std::size_t k = 0; k <= options.max_backtracks; ++k) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = result.x[i] + step * direction[i];
            trial_value = objective(trial, trial_grad);
            if (!std::isfinite(trial_value)) {
                step *= options.shrink;
                continue;
            }
            const bool sufficient = trial_value <= result.value + options.armijo * step * slope;
            // Near the minimum the decrease drops below the rounding of the
            // objective; fall back to a non-increasing value with a smaller gradient.
            const bool roundoff = trial_value <= result.value &&
                                  result.value - trial_value <= 8.0 * std::numeric_limits<double>::epsilon() * std::abs(result.value) &&
                                  norm2(trial_grad) < norm2(grad);
            if (sufficient || roundoff) {
                accepted = true;
                break;
            }
            step *= options.shrink;
        }
        if (!accepted) {
            result.status = LbfgsStatus::LineSearchFailed;
            return result;
        }

        CurvaturePair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            pair.s[i] = trial[i] - result.x[i];
            pair.y[i] = trial_grad[i] - grad[i];
        }
        const double sy = dot(pair.s, pair.y);
        if (sy > 1e-12 * norm2(pair.s) * norm2(pair.y)) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (history.size() > options.memory) history.pop_front();
        }

        result.x.swap(trial);
        grad.swap(trial_grad);
        result.value = trial_value;
        result.iterations = iter + 1;
        result.trace.push_back(result.value);
        if (on_iteration) on_iteration(result.iterations, result.x, result.value);
        if (norm2(grad) <= options.grad_tolerance) {
            result.status = LbfgsStatus::Converged;
            return result;
        }
    }
    result.status = LbfgsStatus::MaxIterations;
    return result;
}

}  // namespace tomofuse
