#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tomofuse/error.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse::nn {

void TrainConfig::validate() const {
    if (max_epochs < 1 || batch_size < 1) throw InputError("epochs and batch size must be positive");
    if (!(mu_initial > 0.0) || !(mu_increase > 1.0) || !(mu_decrease > 0.0 && mu_decrease < 1.0) || !(mu_max > mu_initial))
        throw InputError("invalid damping schedule");
    if (!(tolerance >= 0.0)) throw InputError("tolerance must be non-negative");
    if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5)) throw InputError("validation fraction must lie in [0, 0.5]");
    if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0)) throw InputError("invalid gradient-descent settings");
}

namespace {

TrainingSet subset(const TrainingSet& set, const std::vector<std::size_t>& rows) {
    TrainingSet out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.inputs.resize(n, set.inputs.cols());
    out.targets.resize(n, set.targets.cols());
    out.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
        out.inputs.row(i) = set.inputs.row(r);
        out.targets.row(i) = set.targets.row(r);
        out.weights(i) = set.weights(r);
    }
    return out;
}

// Draws `count` distinct entries of pool (partial Fisher-Yates), sorted.
std::vector<std::size_t> sample(const std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
    std::vector<std::size_t> work = pool;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(work.size() - i));
        std::swap(work[i], work[j]);
    }
    work.resize(count);
    std::sort(work.begin(), work.end());
    return work;
}

// Weighted residuals r and Jacobian J (rows ordered output-major) of the
// batch at the net's current parameters.
void residual_and_jacobian(const NeuralNet& net, const TrainingSet& batch, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const auto& layers = net.layers();
    const Eigen::Index B = batch.inputs.rows();
    const auto n_out = static_cast<Eigen::Index>(net.outputs());
    const Eigen::VectorXd root = batch.weights.cwiseSqrt();

    std::vector<Eigen::MatrixXd> acts{batch.inputs};
    std::vector<Eigen::MatrixXd> slopes;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = acts.back() * layers[l].weights.transpose();
        z.rowwise() += layers[l].bias.transpose();
        if (l + 1 < layers.size()) {
            slopes.push_back(z.unaryExpr([](double v) { return activation_deriv(v); }));
            acts.push_back(z.unaryExpr([](double v) { return activation(v); }));
        } else {
            acts.push_back(std::move(z));
        }
    }

    std::vector<Eigen::Index> offset(layers.size());
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        offset[l] = total;
        total += layers[l].weights.size() + layers[l].bias.size();
    }

    r.resize(B * n_out);
    J.setZero(B * n_out, total);
    for (Eigen::Index o = 0; o < n_out; ++o) {
        r.segment(o * B, B) = root.cwiseProduct(acts.back().col(o) - batch.targets.col(o));
        Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(B, n_out);
        delta.col(o) = root;
        for (std::size_t l = layers.size(); l-- > 0;) {
            const Eigen::Index in = layers[l].weights.cols();
            const Eigen::Index out = layers[l].weights.rows();
            const Eigen::MatrixXd& a = acts[l];
            for (Eigen::Index j = 0; j < out; ++j) {
                if (l + 1 == layers.size() && j != o) continue;  // output layer: only row o depends on output o
                const auto dj = delta.col(j);
                for (Eigen::Index i = 0; i < in; ++i) J.col(offset[l] + j * in + i).segment(o * B, B) = dj.cwiseProduct(a.col(i));
                J.col(offset[l] + out * in + j).segment(o * B, B) = dj;
            }
            if (l > 0) delta = (delta * layers[l].weights).cwiseProduct(slopes[l - 1]);
        }
    }
}

}  // namespace

TrainResult train(const NeuralNet& init, const TrainingSet& set, const TrainConfig& config) {
    config.validate();
    init.validate();
    set.validate();
    if (static_cast<std::size_t>(set.inputs.cols()) != init.inputs() || static_cast<std::size_t>(set.targets.cols()) != init.outputs())
        throw DimensionError("training set does not match the network shape");

    const Rng root(config.seed);
    Rng split_rng = root.split(1);
    Rng batch_rng = root.split(2);

    const std::size_t K = set.size();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = K; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(split_rng.below(i))]);
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(K)));
    std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::vector<std::size_t> active;
    for (std::size_t r : train_rows)
        if (set.weights(static_cast<Eigen::Index>(r)) > 0.0) active.push_back(r);
    if (active.empty()) throw NumericalError("no training example with positive weight");

    const TrainingSet train_set = subset(set, train_rows);
    const TrainingSet val_set = subset(set, val_rows);
    const bool use_validation = val_set.size() > 0 && val_set.weights.sum() > 0.0;
    const bool full_batch = active.size() <= config.batch_size;
    const TrainingSet full = full_batch ? subset(set, active) : TrainingSet{};

    TrainResult result;
    NeuralNet net = init;
    Eigen::VectorXd theta = net.parameters();
    const auto P = theta.size();
    double mu = config.mu_initial;
    double best_score = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(P);
    result.net = net;
    result.stop_reason = "epoch budget exhausted";

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const TrainingSet batch = full_batch ? full : subset(set, sample(active, config.batch_size, batch_rng));
        EpochRecord rec;
        bool stalled = false;

        if (config.trainer == Trainer::LevenbergMarquardt) {
            Eigen::VectorXd r;
            Eigen::MatrixXd J;
            residual_and_jacobian(net, batch, r, J);
            rec.batch_loss_before = r.squaredNorm();
            const bool dual = J.rows() < J.cols();
            const Eigen::Index side = dual ? J.rows() : J.cols();
            Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(side, side);
            if (dual)
                normal.selfadjointView<Eigen::Lower>().rankUpdate(J);
            else
                normal.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
            normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();
            const Eigen::VectorXd Jtr = dual ? Eigen::VectorXd() : Eigen::VectorXd(J.transpose() * r);
            while (true) {
                Eigen::MatrixXd damped = normal;
                damped.diagonal().array() += mu;
                const Eigen::LLT<Eigen::MatrixXd> llt(damped);
                if (llt.info() == Eigen::Success) {
                    const Eigen::VectorXd step = dual ? Eigen::VectorXd(-(J.transpose() * llt.solve(r))) : Eigen::VectorXd(-llt.solve(Jtr));
                    NeuralNet candidate = net;
                    candidate.set_parameters(theta + step);
                    const double after = loss(candidate, batch);
                    if (std::isfinite(after) && after < rec.batch_loss_before) {
                        net = std::move(candidate);
                        theta = net.parameters();
                        rec.batch_loss_after = after;
                        rec.accepted = true;
                        rec.mu = mu;
                        mu = std::max(mu * config.mu_decrease, 1e-20);
                        break;
                    }
                }
                mu *= config.mu_increase;
                if (mu > config.mu_max) {
                    stalled = true;
                    rec.batch_loss_after = rec.batch_loss_before;
                    rec.mu = mu;
                    break;
                }
            }
        } else {
            rec.batch_loss_before = loss(net, batch);
            const Eigen::VectorXd grad = loss_gradient(net, batch) / batch.weights.sum();
            velocity = config.momentum * velocity - config.learning_rate * grad;
            theta += velocity;
            net.set_parameters(theta);
            rec.batch_loss_after = loss(net, batch);
            rec.accepted = true;
        }

        rec.train_loss = loss(net, train_set);
        rec.validation_loss = use_validation ? loss(net, val_set) : 0.0;
        result.history.push_back(rec);

        const double score = use_validation ? rec.validation_loss : rec.train_loss;
        if (score < best_score) {
            best_score = score;
            result.net = net;
            result.best_epoch = epoch + 1;
            since_best = 0;
        } else if (use_validation && ++since_best > config.patience) {
            result.stop_reason = "validation loss stopped improving";
            break;
        }
        if (stalled) {
            result.stop_reason = "damping limit reached";
            break;
        }
        if (full_batch && rec.accepted && config.trainer == Trainer::LevenbergMarquardt &&
            rec.batch_loss_before - rec.batch_loss_after <= config.tolerance * rec.batch_loss_before) {
            result.stop_reason = "loss decrease below tolerance";
            break;
        }
        if (rec.train_loss == 0.0) {
            result.stop_reason = "zero training loss";
            break;
        }
    }
    result.net.norm_shift = init.norm_shift;
    result.net.norm_scale = init.norm_scale;
    return result;
}

}  // namespace tomofuse::nn
