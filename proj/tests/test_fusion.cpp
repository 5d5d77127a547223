#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "tomofuse/error.hpp"
#include "tomofuse/fusion.hpp"
#include "tomofuse/noise.hpp"
#include "tomofuse/phantom.hpp"
#include "tomofuse/projector.hpp"
#include "tomofuse/rng.hpp"

using namespace tomofuse;
using namespace tomofuse::fusion;

namespace {

Image ramp_image(std::size_t n, double scale = 1.0) {
    Image im(n, n, 1.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) im(r, c) = scale * (static_cast<double>(r * n + c) + 0.1 * static_cast<double>(c * c));
    return im;
}

Image noisy_copy(const Image& im, double sd, std::uint64_t seed) {
    Rng rng(seed);
    Image out = im;
    for (double& v : out.values()) v += sd * rng.normal();
    return out;
}

// Network with one linear hidden unit path that returns a constant c in
// raw units regardless of its inputs.
nn::NeuralNet constant_net(std::size_t inputs, std::size_t outputs, double c) {
    nn::NeuralNet net({inputs, 2, outputs});
    net.norm_shift = 0.0;
    net.norm_scale = 1.0;
    for (Eigen::Index o = 0; o < static_cast<Eigen::Index>(outputs); ++o) net.layers()[1].bias(o) = c;
    return net;
}

}  // namespace

TEST_SUITE("fusion") {
    TEST_CASE("disk cardinalities and ordering") {
        const std::size_t expected[] = {1, 5, 13, 29, 49};
        for (int r = 0; r <= 4; ++r) {
            CHECK(disk_count(r) == expected[r]);
            const DiskOffsets d(r);
            CHECK(d.size() == expected[r]);
            for (std::size_t i = 1; i < d.size(); ++i) {
                const Offset a = d.offsets()[i - 1], b = d.offsets()[i];
                CHECK((a.dy < b.dy || (a.dy == b.dy && a.dx < b.dx)));
            }
            for (const Offset& o : d.offsets()) CHECK(o.dx * o.dx + o.dy * o.dy <= r * r);
        }
        CHECK_THROWS_AS(DiskOffsets(-1), InputError);
    }

    TEST_CASE("feature lengths of the standard configurations") {
        CHECK(FusionConfig::fbp_default().input_size() == 87);
        CHECK(FusionConfig::fbp_default().output_size() == 29);
        CHECK(FusionConfig::pwls_default().input_size() == 103);
        CHECK(FusionConfig::pwls_default().output_size() == 1);
    }

    TEST_CASE("disk extraction") {
        const Image im = ramp_image(16);
        CHECK(extract_disk(im, {5, 7}, 0) == std::vector<double>{im(5, 7)});
        const auto d = extract_disk(im, {8, 8}, 3);
        REQUIRE(d.size() == 29);
        const DiskOffsets off(3);
        for (std::size_t i = 0; i < d.size(); ++i)
            CHECK(d[i] == im(static_cast<std::size_t>(8 + off.offsets()[i].dy), static_cast<std::size_t>(8 + off.offsets()[i].dx)));
        const Image flat(16, 16, 1.0, 4.5);
        for (double v : extract_disk(flat, {6, 9}, 4)) CHECK(v == 4.5);
        CHECK_THROWS_AS(extract_disk(im, {2, 8}, 3), std::out_of_range);
        CHECK_THROWS_AS(extract_disk(im, {8, 13}, 3), std::out_of_range);
    }

    TEST_CASE("feature concatenation and stack order") {
        const Image a = ramp_image(16), b = ramp_image(16, -2.0), c = ramp_image(16, 0.5);
        const auto f = build_features({a, b, c}, {8, 8}, {3, 3, 3});
        CHECK(f.size() == 87);
        const auto g = build_features({a, b, c}, {8, 8}, {4, 1, 4});
        CHECK(g.size() == 103);
        const auto h = build_features({c, a, b}, {8, 8}, {3, 3, 3});
        for (std::size_t i = 0; i < 29; ++i) {
            CHECK(h[i] == f[58 + i]);
            CHECK(h[29 + i] == f[i]);
            CHECK(h[58 + i] == f[29 + i]);
        }
        CHECK_THROWS_AS(build_features({a, b}, {8, 8}, {3, 3, 3}), DimensionError);
    }

    TEST_CASE("feature variance") {
        CHECK(feature_variance(std::vector<double>{2.0, 2.0, 2.0}) == 0.0);
        CHECK(feature_variance(std::vector<double>{1.0, 3.0}) == doctest::Approx(1.0));
    }

    TEST_CASE("gradient magnitude uses central differences") {
        Image im(8, 8, 1.0);
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c) im(r, c) = 3.0 * static_cast<double>(c) + 4.0 * static_cast<double>(r);
        const Image g = gradient_magnitude(im);
        for (double v : g.values()) CHECK(v == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(accumulated_gradient(g, {4, 4}, 1) == doctest::Approx(25.0));
    }

    TEST_CASE("example weight rules") {
        const FusionConfig cfg;
        const WeightStats stats{10.0, 1000.0};
        CHECK(compute_example_weight(0.0, 5.0, stats, cfg) == 0.0);
        CHECK(compute_example_weight(0.9e-5, 5.0, stats, cfg) == 0.0);
        CHECK(compute_example_weight(1.0, 1000.0, stats, cfg) == 0.0);
        CHECK(compute_example_weight(1.0, 21.0, stats, cfg) == 0.0);
        CHECK(compute_example_weight(1.0, 10.0, stats, cfg) == doctest::Approx(0.01).epsilon(1e-15));
        CHECK(compute_example_weight(1.0, 20.0, stats, cfg) == doctest::Approx(0.02).epsilon(1e-15));
        CHECK(compute_example_weight(1.0, 0.0, stats, cfg) == 0.0);
        CHECK(is_low_variance(0.99e-5, stats, cfg));
        CHECK(is_low_variance(0.0, WeightStats{0.0, 1.0}, cfg));
        CHECK(!is_low_variance(1.1e-5, stats, cfg));
    }

    TEST_CASE("config validation") {
        FusionConfig cfg;
        CHECK_NOTHROW(cfg.validate());
        cfg.stride = 0;
        CHECK_THROWS_AS(cfg.validate(), InputError);
        cfg = {};
        cfg.gradient_cap = 1.5;
        CHECK_THROWS_AS(cfg.validate(), InputError);
        cfg = {};
        cfg.radii = {};
        CHECK_THROWS_AS(cfg.validate(), InputError);
    }

    TEST_CASE("candidate grid count") {
        const Image ref = rasterize_phantom(random_tissue(3, 10.24), 256, 256, 0.08);
        const TrainingPair pair{{noisy_copy(ref, 20.0, 1), noisy_copy(ref, 5.0, 2), noisy_copy(ref, 40.0, 3)}, ref};
        FusionConfig cfg = FusionConfig::fbp_default();
        cfg.max_examples = 100000;
        const FusionDataset ds = build_training_set({pair}, cfg);
        CHECK(ds.candidates == 83 * 83);
        CHECK(ds.set.size() + ds.variance_pruned == ds.candidates);
        CHECK(ds.set.size() > 5000);
        CHECK(ds.zero_weight > 0);
        CHECK(ds.zero_weight < ds.set.size());
        CHECK(ds.set.inputs.cols() == 87);
        CHECK(ds.set.targets.cols() == 29);
        CHECK(ds.set.inputs.minCoeff() == 0.0);
        CHECK(std::abs(ds.set.inputs.maxCoeff() - 1.0) <= 0x1p-52);
    }

    TEST_CASE("dataset pruning fixture") {
        // Left half air (constant), right half tissue with one strong step.
        const std::size_t n = 40;
        Image ref(n, n, 1.0, -1000.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 20; c < n; ++c) ref(r, c) = (c >= 30 ? 1000.0 : 0.0) + 3.0 * std::sin(0.7 * static_cast<double>(r + c));
        const Image noisy_right = [&] {
            Image im = ref;
            Rng rng(4);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 20; c < n; ++c) im(r, c) += 10.0 * rng.normal();
            return im;
        }();
        const TrainingPair pair{{noisy_right}, ref};
        FusionConfig cfg;
        cfg.radii = {2};
        cfg.output_radius = 1;
        cfg.stride = 1;
        const FusionDataset ds = build_training_set({pair}, cfg);
        const Image grad = gradient_magnitude(ref);
        double gmax = 0.0;
        for (std::size_t r = 2; r + 2 < n; ++r)
            for (std::size_t c = 2; c + 2 < n; ++c) gmax = std::max(gmax, accumulated_gradient(grad, {r, c}, 1));
        for (std::size_t k = 0; k < ds.set.size(); ++k) {
            const Location q = ds.locations[k];
            CHECK(q.col + 2 >= 20);
            const double acc = accumulated_gradient(grad, q, 1);
            const double rho = ds.set.weights(static_cast<Eigen::Index>(k));
            if (acc > 0.02 * gmax)
                CHECK(rho == 0.0);
            else
                CHECK(rho == doctest::Approx(acc / gmax).epsilon(1e-12));
        }
        CHECK(ds.variance_pruned > 0);

        FusionConfig strict = cfg;
        strict.variance_prune = 0.5;
        CHECK(build_training_set({pair}, strict).set.size() <= ds.set.size());
    }

    TEST_CASE("all-air training data is rejected") {
        const Image air(24, 24, 1.0, -1000.0);
        CHECK_THROWS_AS(build_training_set({TrainingPair{{air, air, air}, air}}, FusionConfig::fbp_default()), NumericalError);
    }

    TEST_CASE("example cap uses seeded subsampling") {
        const Image ref = rasterize_phantom(random_tissue(3, 5.12), 64, 64, 0.08);
        const TrainingPair pair{{noisy_copy(ref, 20.0, 1)}, ref};
        FusionConfig cfg;
        cfg.radii = {2};
        cfg.output_radius = 0;
        cfg.stride = 1;
        cfg.max_examples = 500;
        const FusionDataset a = build_training_set({pair}, cfg);
        const FusionDataset b = build_training_set({pair}, cfg);
        CHECK(a.set.size() == 500);
        CHECK(a.set.inputs == b.set.inputs);
        cfg.seed = 2;
        CHECK(build_training_set({pair}, cfg).set.inputs != a.set.inputs);
    }

    TEST_CASE("fusion with a single output pixel assigns the network output") {
        const Image im = ramp_image(12);
        FusionConfig cfg;
        cfg.radii = {1};
        cfg.output_radius = 0;
        nn::NeuralNet net = nn::NeuralNet::random({5, 3, 1}, 2);
        net.norm_shift = 10.0;
        net.norm_scale = 0.01;
        const FuseResult r = fuse_with_coverage({im}, net, cfg);
        for (double v : r.coverage.values()) CHECK(v == 1.0);
        const nn::Normalization norm{net.norm_shift, net.norm_scale};
        for (std::size_t row = 1; row < 11; ++row)
            for (std::size_t col = 1; col < 11; ++col) {
                auto x = extract_disk(im, {row, col}, 1);
                nn::normalize_apply(x, norm);
                const double expect = forward(net, x)[0] / net.norm_scale + net.norm_shift;
                CHECK(r.image(row, col) == doctest::Approx(expect).epsilon(1e-12));
            }
    }

    TEST_CASE("overlapping output disks are averaged") {
        const Image im = ramp_image(20);
        const FusionConfig cfg = FusionConfig::fbp_default();
        const FuseResult r = fuse_with_coverage({im, im, im}, constant_net(87, 29, 0.37), cfg);
        for (std::size_t row = 3; row < 17; ++row)
            for (std::size_t col = 3; col < 17; ++col) CHECK(r.coverage(row, col) == 29.0);
        for (double v : r.image.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
        CHECK(r.coverage(0, 0) == 11.0);
    }

    TEST_CASE("fusion rejects mismatched networks and is deterministic") {
        const Image im = ramp_image(16);
        const FusionConfig cfg = FusionConfig::fbp_default();
        CHECK_THROWS_AS(fuse({im, im, im}, nn::NeuralNet({86, 2, 29}), cfg), DimensionError);
        CHECK_THROWS_AS(fuse({im, im}, nn::NeuralNet({87, 2, 29}), cfg), DimensionError);
        nn::NeuralNet net = nn::NeuralNet::random({87, 4, 29}, 5);
        net.norm_scale = 1e-3;
        CHECK(fuse({im, im, im}, net, cfg).values() == fuse({im, im, im}, net, cfg).values());
    }

    TEST_CASE("single-version stack is legal") {
        const Image im = ramp_image(16);
        FusionConfig cfg;
        cfg.radii = {3};
        const Image out = fuse({im}, constant_net(29, 29, -2.0), cfg);
        for (double v : out.values()) CHECK(v == doctest::Approx(-2.0));
    }

    TEST_CASE("end-to-end FBP boost equals sweep plus fusion") {
        const Grid grid{48, 48, 0.32};
        const Calibration cal;
        const Image ref = rasterize_phantom(random_tissue(7, 7.68), 48, 48, 0.32);
        const CountsData counts =
            simulate_counts(radon_forward(cal.to_attenuation(ref), geometry_for(grid, 60, 1e4)), 3);
        const FilterBank bank = default_filter_bank();
        const auto versions = fbp_versions(counts, bank, grid, cal);
        REQUIRE(versions.size() == 3);
        nn::NeuralNet net = nn::NeuralNet::random({87, 5, 29}, 1);
        net.norm_shift = -1000.0;
        net.norm_scale = 1.0 / 3000.0;
        const FusionConfig cfg = FusionConfig::fbp_default();
        const Image a = end_to_end_fbp_boost(counts, bank, net, cfg, grid, cal);
        CHECK(a.values() == fuse(versions, net, cfg).values());
        // HU scale: soft tissue near zero, air near -1000.
        CHECK(std::abs(versions[0](24, 24) - ref(24, 24)) < 300.0);
    }

    TEST_CASE("dataset files round trip") {
        const Image ref = rasterize_phantom(random_tissue(3, 5.12), 64, 64, 0.08);
        FusionConfig cfg;
        cfg.radii = {1, 1};
        cfg.output_radius = 0;
        const FusionDataset ds = build_training_set({TrainingPair{{noisy_copy(ref, 20.0, 1), noisy_copy(ref, 9.0, 2)}, ref}}, cfg);
        const auto path = std::filesystem::temp_directory_path() / "tomofuse_test_ds.tfds";
        save_dataset(path, ds.set, ds.norm);
        nn::Normalization norm;
        const nn::TrainingSet back = load_dataset(path, norm);
        CHECK(back.inputs == ds.set.inputs);
        CHECK(back.targets == ds.set.targets);
        CHECK(back.weights == ds.set.weights);
        CHECK(norm.shift == ds.norm.shift);
        CHECK(norm.scale == ds.norm.scale);
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
        CHECK_THROWS_AS(load_dataset(path, norm), ParseError);
        std::filesystem::remove(path);
    }
}
