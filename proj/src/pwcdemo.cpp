#include "tomofuse/pwcdemo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tomofuse/error.hpp"
#include "tomofuse/metrics.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse::pwc {

void PwcConfig::validate() const {
    if (length < 60) throw InputError("signal length must be at least 60");
    if (!(noise_std >= 0.0)) throw InputError("noise std must be non-negative");
    if (widths.empty()) throw InputError("at least one kernel width is required");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (!(widths[i] > 0.0)) throw InputError("kernel widths must be positive");
        if (i > 0 && !(widths[i] > widths[i - 1])) throw InputError("kernel widths must increase strictly");
    }
    if (window_half < 1 || 2 * window_half + 1 >= length) throw InputError("window does not fit the signal");
    if (eval_length < 1 || eval_length > length) throw InputError("evaluation interval exceeds the signal");
}

std::vector<double> generate_pwc(const PwcConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::size_t n = config.length;
    const std::size_t steps = n / 30;
    std::vector<std::size_t> positions(n - 1);
    std::iota(positions.begin(), positions.end(), 1);
    for (std::size_t i = 0; i < steps; ++i) std::swap(positions[i], positions[i + static_cast<std::size_t>(rng.below(positions.size() - i))]);
    positions.resize(steps);
    std::sort(positions.begin(), positions.end());

    std::vector<double> x(n);
    std::size_t start = 0;
    for (std::size_t s = 0; s <= steps; ++s) {
        const std::size_t end = s < steps ? positions[s] : n;
        const double value = rng.uniform();
        std::fill(x.begin() + static_cast<std::ptrdiff_t>(start), x.begin() + static_cast<std::ptrdiff_t>(end), value);
        start = end;
    }
    return x;
}

std::vector<double> add_noise(const std::vector<double>& signal, double noise_std, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> y = signal;
    for (double& v : y) v += noise_std * rng.normal();
    return y;
}

std::vector<double> gaussian_kernel(double width) {
    if (!(width > 0.0)) throw InputError("kernel width must be positive");
    const auto half = static_cast<long>(std::ceil(4.0 * width));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    for (long t = -half; t <= half; ++t) k[static_cast<std::size_t>(t + half)] = std::exp(-0.5 * static_cast<double>(t * t) / (width * width));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) v /= sum;
    return k;
}

std::vector<double> gaussian_filter(const std::vector<double>& signal, double width) {
    const std::vector<double> k = gaussian_kernel(width);
    const long half = static_cast<long>(k.size() / 2);
    const long n = static_cast<long>(signal.size());
    if (n == 0) return {};
    auto reflect = [n](long i) {
        if (n == 1) return 0L;
        const long period = 2 * (n - 1);
        i %= period;
        if (i < 0) i += period;
        return i < n ? i : period - i;
    };
    std::vector<double> out(signal.size());
    for (long i = 0; i < n; ++i) {
        double s = 0.0;
        for (long t = -half; t <= half; ++t) s += k[static_cast<std::size_t>(t + half)] * signal[static_cast<std::size_t>(reflect(i - t))];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

std::vector<std::vector<double>> gaussian_filter_bank(const std::vector<double>& signal, const std::vector<double>& widths) {
    std::vector<std::vector<double>> out;
    for (double w : widths) out.push_back(gaussian_filter(signal, w));
    return out;
}

std::vector<double> window_features(const std::vector<std::vector<double>>& versions, std::size_t i, std::size_t half) {
    std::vector<double> f;
    f.reserve(versions.size() * (2 * half + 1));
    for (const auto& v : versions) {
        if (i < half || i + half >= v.size()) throw DimensionError("window leaves the signal");
        f.insert(f.end(), v.begin() + static_cast<std::ptrdiff_t>(i - half), v.begin() + static_cast<std::ptrdiff_t>(i + half + 1));
    }
    return f;
}

namespace {

std::span<const double> central(const std::vector<double>& v, std::size_t len) {
    return std::span<const double>(v).subspan((v.size() - len) / 2, len);
}

}  // namespace

PwcReport run_pwc_experiment(const PwcConfig& train, const PwcConfig& test, const PwcNetConfig& net_cfg, std::uint64_t seed) {
    train.validate();
    test.validate();
    if (train.widths != test.widths || train.window_half != test.window_half)
        throw InputError("training and test configurations must share the filter bank and window");
    const Rng root(seed);

    const std::vector<double> x = generate_pwc(train, root.split(1).seed());
    const std::vector<double> y = add_noise(x, train.noise_std, root.split(2).seed());
    const auto versions = gaussian_filter_bank(y, train.widths);
    const std::size_t h = train.window_half;
    const std::size_t m = train.feature_length();

    const auto K = static_cast<Eigen::Index>(x.size() - 2 * h);
    nn::TrainingSet set;
    set.inputs.resize(K, static_cast<Eigen::Index>(m));
    set.targets.resize(K, 1);
    set.weights = Eigen::VectorXd::Ones(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const std::size_t i = static_cast<std::size_t>(k) + h;
        const auto f = window_features(versions, i, h);
        for (std::size_t j = 0; j < m; ++j) set.inputs(k, static_cast<Eigen::Index>(j)) = f[j];
        set.targets(k, 0) = x[i];
    }
    const nn::Normalization norm = nn::normalize_fit(std::span<const double>(set.inputs.data(), static_cast<std::size_t>(set.inputs.size())));
    nn::normalize_apply(std::span<double>(set.inputs.data(), static_cast<std::size_t>(set.inputs.size())), norm);
    nn::normalize_apply(std::span<double>(set.targets.data(), static_cast<std::size_t>(set.targets.size())), norm);

    nn::NeuralNet init = nn::NeuralNet::random({m, net_cfg.hidden, 1}, root.split(3).seed());
    init.norm_shift = norm.shift;
    init.norm_scale = norm.scale;
    nn::TrainConfig tc = net_cfg.train;
    tc.seed = root.split(4).seed();
    const nn::NeuralNet net = nn::train(init, set, tc).net;

    PwcReport report;
    report.test_clean = generate_pwc(test, root.split(5).seed());
    report.test_noisy = add_noise(report.test_clean, test.noise_std, root.split(6).seed());
    const auto test_versions = gaussian_filter_bank(report.test_noisy, test.widths);
    const std::size_t n = report.test_clean.size();
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(n - 2 * h), static_cast<Eigen::Index>(m));
    for (std::size_t i = h; i + h < n; ++i) {
        const auto f = window_features(test_versions, i, h);
        for (std::size_t j = 0; j < m; ++j) raw(static_cast<Eigen::Index>(i - h), static_cast<Eigen::Index>(j)) = f[j];
    }
    const Eigen::MatrixXd pred = nn::predict_raw(net, raw);
    report.test_fused = report.test_noisy;
    for (std::size_t i = h; i + h < n; ++i) report.test_fused[i] = pred(static_cast<Eigen::Index>(i - h), 0);

    const auto ref = central(report.test_clean, test.eval_length);
    report.noisy = metrics::snr(ref, central(report.test_noisy, test.eval_length));
    report.fused = metrics::snr(ref, central(report.test_fused, test.eval_length));
    for (std::size_t v = 0; v < test_versions.size(); ++v) {
        report.filtered.push_back(metrics::snr(ref, central(test_versions[v], test.eval_length)));
        if (v == 0 || report.filtered[v] > report.best_filtered) {
            report.best_filtered = report.filtered[v];
            report.best_index = v;
        }
    }
    return report;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InputError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PwcSummary run_pwc_seeds(const PwcConfig& train, const PwcConfig& test, const PwcNetConfig& net, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw InputError("at least one seed is required");
    PwcSummary s;
    std::vector<double> noisy, best, fused;
    for (std::uint64_t seed : seeds) {
        s.runs.push_back(run_pwc_experiment(train, test, net, seed));
        noisy.push_back(s.runs.back().noisy);
        best.push_back(s.runs.back().best_filtered);
        fused.push_back(s.runs.back().fused);
    }
    s.median_noisy = median(noisy);
    s.median_best_filtered = median(best);
    s.median_fused = median(fused);
    return s;
}

}  // namespace tomofuse::pwc
