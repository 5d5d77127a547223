#include "tomofuse/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tomofuse/error.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse::nn {

NeuralNet::NeuralNet(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw InputError("a network needs at least an input and an output layer");
    for (std::size_t s : sizes_)
        if (s == 0) throw InputError("layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(sizes_[l]);
        const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
        layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
    }
}

NeuralNet NeuralNet::random(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    NeuralNet net(std::move(layer_sizes));
    Rng rng(seed);
    for (auto& layer : net.layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = rng.uniform(-bound, bound);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = rng.uniform(-bound, bound);
    }
    return net;
}

std::size_t NeuralNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    return n;
}

Eigen::VectorXd NeuralNet::parameters() const {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& layer : layers_) {
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) theta(k++) = layer.weights(i, j);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) theta(k++) = layer.bias(i);
    }
    return theta;
}

void NeuralNet::set_parameters(const Eigen::VectorXd& theta) {
    if (static_cast<std::size_t>(theta.size()) != parameter_count()) throw DimensionError("parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (auto& layer : layers_) {
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = theta(k++);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = theta(k++);
    }
}

void NeuralNet::validate() const {
    if (sizes_.size() < 2 || layers_.size() + 1 != sizes_.size()) throw InputError("network has no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (static_cast<std::size_t>(layer.weights.cols()) != sizes_[l] ||
            static_cast<std::size_t>(layer.weights.rows()) != sizes_[l + 1] ||
            static_cast<std::size_t>(layer.bias.size()) != sizes_[l + 1])
            throw DimensionError("layer " + std::to_string(l) + " does not chain with its neighbours");
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) throw InputError("network weights are not finite");
    }
    if (!(norm_scale > 0.0) || !std::isfinite(norm_scale) || !std::isfinite(norm_shift))
        throw InputError("normalisation scale must be positive");
}

Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != net.inputs())
        throw DimensionError("input has " + std::to_string(inputs.cols()) + " features, network expects " +
                             std::to_string(net.inputs()));
    Eigen::MatrixXd a = inputs;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = a * layers[l].weights.transpose();
        z.rowwise() += layers[l].bias.transpose();
        if (l + 1 < layers.size()) z = z.unaryExpr([](double v) { return activation(v); });
        a = std::move(z);
    }
    return a;
}

std::vector<double> forward(const NeuralNet& net, std::span<const double> x) {
    if (x.size() != net.inputs()) throw DimensionError("input length does not match the network");
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
    const Eigen::MatrixXd out = forward_batch(net, row);
    return std::vector<double>(out.data(), out.data() + out.size());
}

Normalization normalize_fit(std::span<const double> data) {
    if (data.empty()) throw NumericalError("cannot normalise empty data");
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    const double shift = *lo;
    const double range = *hi - shift;
    if (!(range > 0.0)) throw NumericalError("degenerate data: max equals min");
    // Pick the reciprocal that maps the shifted maximum to exactly 1.
    double scale = 1.0 / range;
    for (int step = 0; step < 8 && range * scale != 1.0; ++step)
        scale = std::nextafter(scale, range * scale > 1.0 ? 0.0 : 2.0 * scale);
    return {shift, scale};
}

void normalize_apply(std::span<double> data, const Normalization& norm) {
    for (double& v : data) v = (v - norm.shift) * norm.scale;
}

Eigen::MatrixXd predict_raw(const NeuralNet& net, Eigen::MatrixXd raw_inputs) {
    const Normalization norm{net.norm_shift, net.norm_scale};
    normalize_apply(std::span<double>(raw_inputs.data(), static_cast<std::size_t>(raw_inputs.size())), norm);
    Eigen::MatrixXd out = forward_batch(net, raw_inputs);
    const double inv = 1.0 / net.norm_scale;
    return (out.array() * inv + net.norm_shift).matrix();
}

void TrainingSet::validate() const {
    if (inputs.rows() != targets.rows() || inputs.rows() != weights.size())
        throw DimensionError("training set row counts disagree");
    if (inputs.rows() == 0) throw NumericalError("training set is empty");
    if ((weights.array() < 0.0).any() || !weights.allFinite()) throw InputError("example weights must be non-negative");
    if (!(weights.maxCoeff() > 0.0)) throw NumericalError("every example weight is zero");
}

double loss(const NeuralNet& net, const TrainingSet& set) {
    if (static_cast<std::size_t>(set.targets.cols()) != net.outputs()) throw DimensionError("targets do not match the network outputs");
    const Eigen::MatrixXd residual = forward_batch(net, set.inputs) - set.targets;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < residual.rows(); ++k)
        if (set.weights(k) != 0.0) sum += set.weights(k) * residual.row(k).squaredNorm();
    return sum;
}

namespace {

struct ForwardTrace {
    std::vector<Eigen::MatrixXd> activations;  // activations[0] = inputs
    std::vector<Eigen::MatrixXd> slopes;       // sigma'(z) per hidden layer
};

ForwardTrace trace_forward(const NeuralNet& net, const Eigen::MatrixXd& inputs) {
    ForwardTrace t;
    t.activations.push_back(inputs);
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = t.activations.back() * layers[l].weights.transpose();
        z.rowwise() += layers[l].bias.transpose();
        if (l + 1 < layers.size()) {
            t.slopes.push_back(z.unaryExpr([](double v) { return activation_deriv(v); }));
            t.activations.push_back(z.unaryExpr([](double v) { return activation(v); }));
        } else {
            t.activations.push_back(std::move(z));
        }
    }
    return t;
}

}  // namespace

Eigen::VectorXd loss_gradient(const NeuralNet& net, const TrainingSet& set) {
    const ForwardTrace t = trace_forward(net, set.inputs);
    const auto& layers = net.layers();
    Eigen::MatrixXd delta = t.activations.back() - set.targets;
    for (Eigen::Index k = 0; k < delta.rows(); ++k) delta.row(k) *= 2.0 * set.weights(k);

    std::vector<Eigen::MatrixXd> grad_w(layers.size());
    std::vector<Eigen::VectorXd> grad_b(layers.size());
    for (std::size_t l = layers.size(); l-- > 0;) {
        grad_w[l] = delta.transpose() * t.activations[l];
        grad_b[l] = delta.colwise().sum().transpose();
        if (l > 0) delta = (delta * layers[l].weights).cwiseProduct(t.slopes[l - 1]);
    }
    Eigen::VectorXd g(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (Eigen::Index i = 0; i < grad_w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < grad_w[l].cols(); ++j) g(k++) = grad_w[l](i, j);
        for (Eigen::Index i = 0; i < grad_b[l].size(); ++i) g(k++) = grad_b[l](i);
    }
    return g;
}

}  // namespace tomofuse::nn
