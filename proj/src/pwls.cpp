#include "tomofuse/pwls.hpp"

#include <algorithm>
#include <cmath>

#include "tomofuse/error.hpp"
#include "tomofuse/noise.hpp"
#include "tomofuse/projector.hpp"

namespace tomofuse {

void PwlsParams::validate() const {
    if (!(beta > 0.0)) throw InputError("beta must be positive");
    if (!(delta > 0.0)) throw InputError("delta must be positive");
    if (max_iters < 1) throw InputError("max_iters must be at least 1");
    if (snapshot_every < 1 || snapshot_every > max_iters) throw InputError("snapshot_every must lie in [1, max_iters]");
    if (lbfgs_memory < 1) throw InputError("lbfgs_memory must be at least 1");
}

WeightMap weights_from_counts(const CountsData& counts) {
    const double peak = counts.counts.empty() ? 0.0 : *std::max_element(counts.counts.begin(), counts.counts.end());
    if (!(peak > 0.0)) throw InputError("counts are all zero; cannot build weights");
    WeightMap w{counts.geometry, counts.counts};
    for (double& v : w.weights) v /= peak;
    return w;
}

double huber(double x, double delta) {
    const double a = std::abs(x);
    return a < delta ? 0.5 * x * x : delta * a - 0.5 * delta * delta;
}

double huber_deriv(double x, double delta) {
    if (std::abs(x) < delta) return x;
    return x > 0.0 ? delta : -delta;
}

double penalty(const Image& image, double delta) {
    double sum = 0.0;
    for (std::size_t r = 0; r < image.height(); ++r)
        for (std::size_t c = 0; c < image.width(); ++c) {
            if (c + 1 < image.width()) sum += huber(image(r, c) - image(r, c + 1), delta);
            if (r + 1 < image.height()) sum += huber(image(r, c) - image(r + 1, c), delta);
        }
    return 2.0 * sum;
}

Image penalty_gradient(const Image& image, double delta) {
    Image grad(image.width(), image.height(), image.pixel_size());
    for (std::size_t r = 0; r < image.height(); ++r)
        for (std::size_t c = 0; c < image.width(); ++c) {
            if (c + 1 < image.width()) {
                const double d = 2.0 * huber_deriv(image(r, c) - image(r, c + 1), delta);
                grad(r, c) += d;
                grad(r, c + 1) -= d;
            }
            if (r + 1 < image.height()) {
                const double d = 2.0 * huber_deriv(image(r, c) - image(r + 1, c), delta);
                grad(r, c) += d;
                grad(r + 1, c) -= d;
            }
        }
    return grad;
}

namespace {

void check_weights(const Sinogram& g_hat, const WeightMap& w) {
    if (w.weights.size() != g_hat.data.size() || g_hat.data.size() != g_hat.geometry.size())
        throw DimensionError("weight map does not match the sinogram");
}

// Objective value and, when grad is non-null, its gradient.
double evaluate(const Image& f, const Sinogram& g_hat, const WeightMap& w, const PwlsParams& params, Image* grad) {
    check_weights(g_hat, w);
    Sinogram residual = system_matrix_apply(f, g_hat.geometry);
    double data_term = 0.0;
    for (std::size_t i = 0; i < residual.data.size(); ++i) {
        const double r = residual.data[i] - g_hat.data[i];
        data_term += w.weights[i] * r * r;
        residual.data[i] = 2.0 * w.weights[i] * r;
    }
    const double value = data_term + params.beta * penalty(f, params.delta);
    if (grad) {
        *grad = system_matrix_adjoint(residual, f.width(), f.height(), f.pixel_size());
        const Image prior = penalty_gradient(f, params.delta);
        for (std::size_t i = 0; i < grad->size(); ++i) grad->values()[i] += params.beta * prior.values()[i];
    }
    return value;
}

}  // namespace

double pwls_objective(const Image& f, const Sinogram& g_hat, const WeightMap& w, const PwlsParams& params) {
    return evaluate(f, g_hat, w, params, nullptr);
}

Image pwls_gradient(const Image& f, const Sinogram& g_hat, const WeightMap& w, const PwlsParams& params) {
    Image grad;
    evaluate(f, g_hat, w, params, &grad);
    return grad;
}

PwlsResult pwls_reconstruct(const CountsData& counts, const Image& init, const PwlsParams& params) {
    params.validate();
    if (!init.finite()) throw InputError("PWLS initial image is not finite");
    const Sinogram g_hat = counts_to_sinogram(counts);
    const WeightMap weights = weights_from_counts(counts);

    Image work = init;
    const Objective objective = [&](std::span<const double> x, std::span<double> g) {
        std::copy(x.begin(), x.end(), work.values().begin());
        Image grad;
        const double value = evaluate(work, g_hat, weights, params, &grad);
        std::copy(grad.values().begin(), grad.values().end(), g.begin());
        return value;
    };

    PwlsResult result;
    auto keep = [&](std::size_t iteration, std::span<const double> x) {
        result.snapshots.emplace_back(init.width(), init.height(), init.pixel_size(), std::vector<double>(x.begin(), x.end()));
        result.snapshot_iterations.push_back(iteration);
    };
    LbfgsOptions options;
    options.memory = params.lbfgs_memory;
    options.max_iters = params.max_iters;
    options.grad_tolerance = params.grad_tolerance;
    const LbfgsResult run = lbfgs_minimize(objective, init.values(), options,
                                           [&](std::size_t iteration, std::span<const double> x, double) {
                                               if (iteration % params.snapshot_every == 0) keep(iteration, x);
                                           });
    if (run.status == LbfgsStatus::Converged)
        for (std::size_t it = (run.iterations / params.snapshot_every + 1) * params.snapshot_every; it <= params.max_iters;
             it += params.snapshot_every)
            keep(it, run.x);

    result.objective_trace = run.trace;
    result.status = run.status;
    result.iterations = run.iterations;
    return result;
}

}  // namespace tomofuse
