#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tomofuse::nn {

/// sigma(x) = x / (1 + |x|).
inline double activation(double x) { return x / (1.0 + std::abs(x)); }
/// sigma'(x) = 1 / (1 + |x|)^2.
inline double activation_deriv(double x) {
    const double d = 1.0 + std::abs(x);
    return 1.0 / (d * d);
}

struct Layer {
    Eigen::MatrixXd weights;  ///< outputs x inputs
    Eigen::VectorXd bias;
};

/// Fully connected feed-forward network. Hidden layers apply the rational
/// sigmoid; the output layer is linear. norm_shift / norm_scale are the
/// dataset normalisation constants that travel with the weights.
class NeuralNet {
public:
    NeuralNet() = default;
    /// All weights and biases zero.
    explicit NeuralNet(std::vector<std::size_t> layer_sizes);
    /// Weights uniform in +-1/sqrt(fan_in), biases likewise.
    static NeuralNet random(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

    const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
    std::size_t inputs() const { return sizes_.front(); }
    std::size_t outputs() const { return sizes_.back(); }
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    std::size_t parameter_count() const;
    /// Flattened parameters: per layer, weights row-major then bias.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);

    void validate() const;

    double norm_shift = 0.0;
    double norm_scale = 1.0;

private:
    std::vector<std::size_t> sizes_;
    std::vector<Layer> layers_;
};

/// Evaluates one (already normalised) input vector.
std::vector<double> forward(const NeuralNet& net, std::span<const double> x);
/// Row-wise evaluation of a K x m input matrix.
Eigen::MatrixXd forward_batch(const NeuralNet& net, const Eigen::MatrixXd& inputs);

struct Normalization {
    double shift = 0.0;  ///< global minimum
    double scale = 1.0;  ///< 1 / (max - min)
};

/// Throws NumericalError when the data is constant.
Normalization normalize_fit(std::span<const double> data);
/// (x - shift) * scale, no clipping.
void normalize_apply(std::span<double> data, const Normalization& norm);

/// Normalises raw inputs with the net's constants, evaluates and maps the
/// outputs back to raw units.
Eigen::MatrixXd predict_raw(const NeuralNet& net, Eigen::MatrixXd raw_inputs);

struct TrainingSet {
    Eigen::MatrixXd inputs;   ///< K x m
    Eigen::MatrixXd targets;  ///< K x n
    Eigen::VectorXd weights;  ///< rho_k >= 0

    std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
    void validate() const;
};

/// sum_k rho_k |forward(X_k) - Y_k|^2.
double loss(const NeuralNet& net, const TrainingSet& set);
/// Gradient of loss() with respect to parameters(), by backpropagation.
Eigen::VectorXd loss_gradient(const NeuralNet& net, const TrainingSet& set);

enum class Trainer { LevenbergMarquardt, GradientDescent };

struct TrainConfig {
    Trainer trainer = Trainer::LevenbergMarquardt;
    std::size_t max_epochs = 200;      ///< one damped step (or GD step) per epoch
    std::size_t batch_size = 2000;     ///< examples per step; full batch when the set is smaller
    double mu_initial = 1e-3;
    double mu_increase = 10.0;
    double mu_decrease = 0.1;
    double mu_max = 1e10;
    double tolerance = 1e-10;          ///< full-batch relative loss decrease that ends training
    double validation_fraction = 0.1;  ///< held out for early stopping
    std::size_t patience = 6;          ///< epochs without validation improvement
    double learning_rate = 0.05;       ///< gradient descent only
    double momentum = 0.9;             ///< gradient descent only
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochRecord {
    double batch_loss_before = 0.0;
    double batch_loss_after = 0.0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double mu = 0.0;
    bool accepted = false;
};

struct TrainResult {
    NeuralNet net;  ///< best parameters seen (validation loss, or training loss without a split)
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::string stop_reason;
};

/// Levenberg-Marquardt on the weighted residuals sqrt(rho_k)(y_k - Y_k), with
/// the Jacobian assembled by backpropagation and the damped normal equations
/// solved in primal or dual form, whichever is smaller. Batches and the
/// validation split are drawn from the seed using example weights only, so
/// the contents of zero-weight examples never influence the trajectory.
TrainResult train(const NeuralNet& init, const TrainingSet& set, const TrainConfig& config);

/// TFNN1 text model: header, layer sizes, normalisation constants, then
/// weights row by row with 17 significant digits.
std::string format_model(const NeuralNet& net);
NeuralNet parse_model(const std::string& text);
void save_model(const NeuralNet& net, const std::filesystem::path& path);
NeuralNet load_model(const std::filesystem::path& path);

}  // namespace tomofuse::nn
