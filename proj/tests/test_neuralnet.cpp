#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tomofuse/error.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/rng.hpp"

using namespace tomofuse;
using namespace tomofuse::nn;

namespace {

TrainingSet random_set(std::size_t k, std::size_t m, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    TrainingSet s;
    s.inputs.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
    s.targets.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    s.weights.resize(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < s.inputs.size(); ++i) s.inputs.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < s.targets.size(); ++i) s.targets.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < s.weights.size(); ++i) s.weights(i) = rng.uniform(0.0, 1.0);
    return s;
}

// Plain loops over the layer matrices, independent of forward().
double naive_loss(const NeuralNet& net, const TrainingSet& set) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < set.inputs.rows(); ++k) {
        std::vector<double> a(static_cast<std::size_t>(set.inputs.cols()));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = set.inputs(k, static_cast<Eigen::Index>(i));
        for (std::size_t l = 0; l < net.layers().size(); ++l) {
            const Layer& layer = net.layers()[l];
            std::vector<double> z(static_cast<std::size_t>(layer.weights.rows()));
            for (std::size_t j = 0; j < z.size(); ++j) {
                double s = layer.bias(static_cast<Eigen::Index>(j));
                for (std::size_t i = 0; i < a.size(); ++i) s += layer.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * a[i];
                z[j] = l + 1 < net.layers().size() ? s / (1.0 + std::abs(s)) : s;
            }
            a = z;
        }
        for (std::size_t o = 0; o < a.size(); ++o) {
            const double e = a[o] - set.targets(k, static_cast<Eigen::Index>(o));
            total += set.weights(k) * e * e;
        }
    }
    return total;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tomofuse_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("neuralnet") {
    TEST_CASE("activation values") {
        CHECK(activation(0.0) == 0.0);
        CHECK(activation_deriv(0.0) == 1.0);
        CHECK(activation(1.0) == 0.5);
        CHECK(activation(-1.0) == -0.5);
        CHECK(activation_deriv(1.0) == 0.25);
        const double h = 1e-6;
        for (double x : {-3.0, -0.5, 0.7, 1.0, 4.0})
            CHECK(std::abs((activation(x + h) - activation(x - h)) / (2 * h) - activation_deriv(x)) < 1e-8);
        for (double x : {-1e9, -10.0, 10.0, 1e9}) {
            CHECK(activation(x) > -1.0);
            CHECK(activation(x) < 1.0);
            CHECK(activation(-x) == -activation(x));
        }
    }

    TEST_CASE("zero network outputs zero") {
        const NeuralNet net({4, 3, 2});
        for (double v : forward(net, std::vector<double>{1.0, -2.0, 3.0, 0.5})) CHECK(v == 0.0);
    }

    TEST_CASE("hand-evaluated single-unit network") {
        NeuralNet net({1, 1, 1});
        net.layers()[0].weights(0, 0) = 1.0;
        net.layers()[1].weights(0, 0) = 2.0;
        CHECK(forward(net, std::vector<double>{1.0})[0] == 1.0);
    }

    TEST_CASE("bias-free network is odd") {
        NeuralNet net = NeuralNet::random({5, 7, 3}, 4);
        for (auto& l : net.layers()) l.bias.setZero();
        const std::vector<double> x{0.3, -1.2, 0.8, 2.0, -0.1};
        std::vector<double> neg(x);
        for (double& v : neg) v = -v;
        const auto a = forward(net, x), b = forward(net, neg);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == -b[i]);
    }

    TEST_CASE("input length is checked") {
        const NeuralNet net({3, 2, 1});
        CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), DimensionError);
    }

    TEST_CASE("random initialisation is seeded and scaled by fan-in") {
        const NeuralNet a = NeuralNet::random({16, 8, 2}, 9);
        const NeuralNet b = NeuralNet::random({16, 8, 2}, 9);
        CHECK(a.parameters() == b.parameters());
        CHECK(a.parameter_count() == 16 * 8 + 8 + 8 * 2 + 2);
        CHECK(a.layers()[0].weights.cwiseAbs().maxCoeff() <= 0.25);
        CHECK(a.layers()[1].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    }

    TEST_CASE("parameter flattening round trip") {
        NeuralNet net = NeuralNet::random({3, 4, 2}, 1);
        const Eigen::VectorXd theta = net.parameters();
        NeuralNet other({3, 4, 2});
        other.set_parameters(theta);
        CHECK(other.parameters() == theta);
        CHECK(net.layers()[0].weights(0, 1) == theta(1));
    }

    TEST_CASE("normalisation") {
        std::vector<double> unit{0.0, 0.25, 1.0};
        const Normalization n0 = normalize_fit(unit);
        CHECK(n0.shift == 0.0);
        CHECK(n0.scale == 1.0);

        std::vector<double> pm{-5.0, 5.0};
        const Normalization n1 = normalize_fit(pm);
        CHECK(n1.shift == -5.0);
        CHECK(n1.scale == doctest::Approx(0.1).epsilon(1e-15));
        normalize_apply(pm, n1);
        CHECK(pm == std::vector<double>{0.0, 1.0});

        std::vector<double> outside{-10.0, 10.0};
        normalize_apply(outside, n1);
        CHECK(outside[0] < 0.0);
        CHECK(outside[1] > 1.0);

        CHECK_THROWS_AS(normalize_fit(std::vector<double>{2.0, 2.0}), NumericalError);
    }

    TEST_CASE("normalised training matrix spans exactly zero to one") {
        Rng rng(5);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> data(97);
            for (double& v : data) v = rng.uniform(-1000.0, 3000.0) * rng.uniform();
            const Normalization n = normalize_fit(data);
            normalize_apply(data, n);
            CHECK(*std::min_element(data.begin(), data.end()) == 0.0);
            CHECK(std::abs(*std::max_element(data.begin(), data.end()) - 1.0) <= 0x1p-52);
        }
    }

    TEST_CASE("loss matches a naive summation") {
        const NeuralNet net = NeuralNet::random({4, 5, 3}, 2);
        const TrainingSet set = random_set(20, 4, 3, 3);
        CHECK(loss(net, set) == doctest::Approx(naive_loss(net, set)).epsilon(1e-12));
    }

    TEST_CASE("loss of a perfect fit and of a single weighted example") {
        const NeuralNet net = NeuralNet::random({2, 3, 1}, 2);
        TrainingSet set = random_set(5, 2, 1, 4);
        set.targets = forward_batch(net, set.inputs);
        CHECK(loss(net, set) == 0.0);

        set = random_set(5, 2, 1, 4);
        set.weights.setZero();
        set.weights(2) = 0.7;
        const double e = forward(net, std::vector<double>{set.inputs(2, 0), set.inputs(2, 1)})[0] - set.targets(2, 0);
        CHECK(loss(net, set) == doctest::Approx(0.7 * e * e).epsilon(1e-14));
    }

    TEST_CASE("loss is invariant to example order") {
        const NeuralNet net = NeuralNet::random({3, 4, 2}, 6);
        const TrainingSet set = random_set(30, 3, 2, 7);
        TrainingSet rev = set;
        rev.inputs = set.inputs.colwise().reverse();
        rev.targets = set.targets.colwise().reverse();
        rev.weights = set.weights.reverse();
        CHECK(loss(net, rev) == doctest::Approx(loss(net, set)).epsilon(1e-13));
    }

    TEST_CASE("loss gradient matches finite differences") {
        for (std::uint64_t rep = 0; rep < 10; ++rep) {
            NeuralNet net = NeuralNet::random({4, 6, 5, 2}, 10 + rep);
            const TrainingSet set = random_set(15, 4, 2, 30 + rep);
            const Eigen::VectorXd grad = loss_gradient(net, set);
            const Eigen::VectorXd theta = net.parameters();
            Eigen::VectorXd fd(theta.size());
            const double h = 1e-6;
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                Eigen::VectorXd t = theta;
                t(i) += h;
                net.set_parameters(t);
                const double up = loss(net, set);
                t(i) -= 2 * h;
                net.set_parameters(t);
                const double down = loss(net, set);
                fd(i) = (up - down) / (2 * h);
            }
            net.set_parameters(theta);
            CHECK((grad - fd).cwiseAbs().maxCoeff() / grad.cwiseAbs().maxCoeff() < 1e-5);
        }
    }

    TEST_CASE("duplicated examples scale the gradient") {
        const NeuralNet net = NeuralNet::random({3, 4, 1}, 1);
        const TrainingSet set = random_set(10, 3, 1, 2);
        TrainingSet doubled = set;
        doubled.weights *= 2.0;
        const Eigen::VectorXd a = loss_gradient(net, set), b = loss_gradient(net, doubled);
        CHECK((b - 2.0 * a).norm() <= 1e-12 * b.norm());
        CHECK(loss(net, doubled) == doctest::Approx(2.0 * loss(net, set)).epsilon(1e-14));
    }

    TEST_CASE("Levenberg-Marquardt fits a linear map") {
        TrainingSet set;
        set.inputs.resize(100, 1);
        set.targets.resize(100, 1);
        set.weights = Eigen::VectorXd::Ones(100);
        for (int i = 0; i < 100; ++i) {
            const double x = -0.5 + i / 99.0;
            set.inputs(i, 0) = x;
            set.targets(i, 0) = 2.0 * x;
        }
        TrainConfig cfg;
        cfg.max_epochs = 100;
        cfg.validation_fraction = 0.0;
        const TrainResult r = train(NeuralNet::random({1, 3, 1}, 3), set, cfg);
        CHECK(r.history.size() <= 100);
        const double rms = std::sqrt(loss(r.net, set) / 100.0);
        CHECK(rms < 1e-3);
        double last = std::numeric_limits<double>::infinity();
        for (const EpochRecord& e : r.history) {
            if (e.accepted) CHECK(e.batch_loss_after < e.batch_loss_before);
            CHECK(e.train_loss <= last);
            last = e.train_loss;
        }
    }

    TEST_CASE("gradient descent fallback reduces the loss") {
        const TrainingSet set = random_set(200, 3, 1, 12);
        TrainConfig cfg;
        cfg.trainer = Trainer::GradientDescent;
        cfg.max_epochs = 200;
        cfg.validation_fraction = 0.0;
        cfg.learning_rate = 0.02;
        const NeuralNet init = NeuralNet::random({3, 5, 1}, 2);
        const TrainResult r = train(init, set, cfg);
        CHECK(loss(r.net, set) < loss(init, set));
    }

    TEST_CASE("training is reproducible and ignores zero-weight contents") {
        TrainingSet set = random_set(300, 4, 2, 20);
        for (Eigen::Index k = 0; k < 300; k += 4) set.weights(k) = 0.0;
        TrainConfig cfg;
        cfg.max_epochs = 15;
        cfg.batch_size = 50;
        cfg.seed = 99;
        const NeuralNet init = NeuralNet::random({4, 5, 2}, 8);
        const TrainResult a = train(init, set, cfg);
        const TrainResult b = train(init, set, cfg);
        CHECK(a.net.parameters() == b.net.parameters());

        TrainingSet perturbed = set;
        Rng rng(1);
        for (Eigen::Index k = 0; k < 300; k += 4) {
            perturbed.inputs.row(k).setConstant(rng.uniform(-50.0, 50.0));
            perturbed.targets.row(k).setConstant(rng.uniform(-50.0, 50.0));
        }
        const TrainResult c = train(init, perturbed, cfg);
        CHECK(c.net.parameters() == a.net.parameters());
        REQUIRE(c.history.size() == a.history.size());
        for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(c.history[i].train_loss == a.history[i].train_loss);
    }

    TEST_CASE("invalid training inputs") {
        TrainingSet set = random_set(10, 2, 1, 1);
        set.weights.setZero();
        CHECK_THROWS_AS(train(NeuralNet::random({2, 2, 1}, 1), set, TrainConfig{}), NumericalError);
        set = random_set(10, 2, 1, 1);
        CHECK_THROWS_AS(train(NeuralNet::random({3, 2, 1}, 1), set, TrainConfig{}), DimensionError);
        TrainConfig bad;
        bad.validation_fraction = 0.7;
        CHECK_THROWS_AS(bad.validate(), InputError);
    }

    TEST_CASE("model files round trip bit-exactly") {
        NeuralNet net = NeuralNet::random({6, 5, 4, 3}, 77);
        net.norm_shift = -1024.123456789;
        net.norm_scale = 1.0 / 3071.0;
        const auto p1 = temp_path("model1.tfnn");
        const auto p2 = temp_path("model2.tfnn");
        save_model(net, p1);
        const NeuralNet back = load_model(p1);
        save_model(back, p2);
        CHECK(slurp(p1) == slurp(p2));
        CHECK(back.parameters() == net.parameters());
        CHECK(back.layer_sizes() == net.layer_sizes());
        CHECK(back.norm_shift == net.norm_shift);
        CHECK(back.norm_scale == net.norm_scale);
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> x(6);
            for (double& v : x) v = rng.uniform(-2.0, 2.0);
            CHECK(forward(net, x) == forward(back, x));
        }

        const std::string text = slurp(p1);
        for (std::size_t cut : {text.size() / 3, text.size() - 5, text.size() - 7}) {
            std::ofstream(p2, std::ios::binary) << text.substr(0, cut);
            CHECK_THROWS_AS(load_model(p2), ParseError);
        }
        CHECK_THROWS_AS(parse_model("TFNN9\n"), ParseError);
        std::filesystem::remove(p1);
        std::filesystem::remove(p2);
    }
}
