#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "tomofuse/error.hpp"
#include "tomofuse/fbp.hpp"
#include "tomofuse/metrics.hpp"
#include "tomofuse/noise.hpp"
#include "tomofuse/phantom.hpp"
#include "tomofuse/projector.hpp"
#include "tomofuse/rng.hpp"

using namespace tomofuse;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
        out[k] = acc;
    }
    return out;
}

Sinogram disk_scan(double radius, std::size_t n, double ps, std::size_t views) {
    Phantom p;
    p.ellipses.push_back({0.0, 0.0, radius, radius, 0.0, 1.0});
    return radon_forward(rasterize_phantom(p, n, n, ps), geometry_for(Grid{n, n, ps}, views, 1e4));
}

}  // namespace

TEST_SUITE("fbp") {
    TEST_CASE("Butterworth gain") {
        for (int p : {1, 3}) {
            const FilterParams f{0.4, p};
            CHECK(butterworth_gain(0.0, f) == 1.0);
            CHECK(std::abs(butterworth_gain(0.4, f) - 1.0 / std::sqrt(2.0)) < 1e-12);
        }
        for (double w : {0.0, 0.3, 1.0, 50.0}) CHECK(butterworth_gain(w, FilterParams{kInf, 3}) == 1.0);
    }

    TEST_CASE("Butterworth gain is monotone in frequency and cut-off") {
        for (double w = 0.0; w < 2.0; w += 0.01) {
            CHECK(butterworth_gain(w + 0.01, {0.4, 3}) <= butterworth_gain(w, {0.4, 3}));
            CHECK(butterworth_gain(w, {0.4, 3}) <= butterworth_gain(w, {1.15, 3}));
            CHECK(butterworth_gain(w, {1.15, 3}) <= butterworth_gain(w, {kInf, 3}));
        }
    }

    TEST_CASE("filter parameter validation") {
        CHECK_THROWS_AS(FilterParams({0.0, 3}).validate(), InputError);
        CHECK_THROWS_AS(FilterParams({0.4, 0}).validate(), InputError);
        CHECK_THROWS_AS(validate_bank({}), InputError);
        CHECK_THROWS_AS(validate_bank({{0.4, 3}, {0.4, 3}}), InputError);
        CHECK_NOTHROW(validate_bank(default_filter_bank()));
        CHECK(default_filter_bank().size() == 3);
    }

    TEST_CASE("padded length") {
        CHECK(padded_length(367) == 1024);
        CHECK(padded_length(31) == 64);
        CHECK(padded_length(32) == 64);
    }

    TEST_CASE("zero view filters to zero") {
        const std::vector<double> zero(31, 0.0);
        for (double v : filter_projection(zero, 1.0, {0.4, 3})) CHECK(v == 0.0);
    }

    TEST_CASE("response follows the ramp times the window") {
        const std::size_t bins = 367;
        const double ds = 0.08;
        for (const FilterParams& f : default_filter_bank()) {
            const auto resp = filter_response(bins, ds, f);
            const std::size_t pad = padded_length(bins);
            REQUIRE(resp.size() == pad / 2 + 1);
            for (std::size_t k = 1; k < resp.size(); ++k) {
                const double ramp = static_cast<double>(k) / (static_cast<double>(pad) * ds);
                const double expect = ramp * butterworth_gain(2.0 * static_cast<double>(k) / static_cast<double>(pad), f);
                // Truncating the spatial kernel to the padded circle leaves an
                // offset bounded by twice its discarded tail.
                CHECK(std::abs(resp[k] - expect) <= 4.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(pad) * ds));
                if (k >= pad / 32) CHECK(std::abs(resp[k] - expect) <= 2e-3 * expect);
            }
            CHECK(resp[0] > 0.0);
            CHECK(resp[0] < 0.5 / (static_cast<double>(pad) * ds));
        }
    }

    TEST_CASE("white-noise spectral ratio") {
        const std::size_t bins = 31;
        const FilterParams f{0.6, 3};
        const std::size_t pad = padded_length(bins);
        std::vector<double> ratio(pad / 2 + 1, 0.0);
        Rng rng(3);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> view(bins);
            for (double& v : view) v = rng.normal();
            const auto out = filter_projection_padded(view, 1.0, f);
            std::vector<double> in(pad, 0.0);
            std::copy(view.begin(), view.end(), in.begin());
            const auto a = direct_dft(in);
            const auto b = direct_dft(out);
            for (std::size_t k = 0; k < ratio.size(); ++k) ratio[k] += std::abs(b[k]) / std::abs(a[k]) / 100.0;
        }
        for (std::size_t k = pad / 16; k < ratio.size(); ++k) {
            const double expect = static_cast<double>(k) / static_cast<double>(pad) *
                                  butterworth_gain(2.0 * static_cast<double>(k) / static_cast<double>(pad), f);
            CHECK(std::abs(ratio[k] - expect) <= 0.02 * expect);
        }
    }

    TEST_CASE("filtering is linear") {
        Rng rng(5);
        std::vector<double> a(41), b(41), s(41);
        for (std::size_t i = 0; i < 41; ++i) {
            a[i] = rng.normal();
            b[i] = rng.normal();
            s[i] = 2.0 * a[i] - 0.5 * b[i];
        }
        const auto fa = filter_projection(a, 0.5, {1.15, 3});
        const auto fb = filter_projection(b, 0.5, {1.15, 3});
        const auto fs = filter_projection(s, 0.5, {1.15, 3});
        REQUIRE(fs.size() == 41);
        for (std::size_t i = 0; i < 41; ++i) CHECK(fs[i] == doctest::Approx(2.0 * fa[i] - 0.5 * fb[i]).epsilon(1e-10));
    }

    TEST_CASE("back-projection of zero and of a constant sinogram") {
        const ScanGeometry g = geometry_for(Grid{32, 32, 1.0}, 90, 1e4);
        const Image zero = backproject(Sinogram(g), 32, 32, 1.0);
        for (double v : zero.values()) CHECK(v == 0.0);
        Sinogram ones(g);
        std::fill(ones.data.begin(), ones.data.end(), 1.0);
        const Image pi_image = backproject(ones, 32, 32, 1.0);
        for (double v : pi_image.values()) CHECK(v == doctest::Approx(std::numbers::pi).epsilon(1e-12));
    }

    TEST_CASE("back-projection of one detector sample is an interpolated line") {
        const ScanGeometry g = geometry_for(Grid{32, 32, 1.0}, 12, 1e4);
        Sinogram s(g);
        const std::size_t view = 5, bin = 20;
        s.at(view, bin) = 1.0;
        const Image im = backproject(s, 32, 32, 1.0);
        const double th = g.angle(view);
        for (std::size_t r = 0; r < 32; ++r)
            for (std::size_t c = 0; c < 32; ++c) {
                const double pos = im.x_of(c) * std::cos(th) + im.y_of(r) * std::sin(th);
                const double w = std::max(0.0, 1.0 - std::abs(pos - g.bin_position(bin)) / g.bin_spacing);
                CHECK(im(r, c) == doctest::Approx(std::numbers::pi / 12.0 * w).epsilon(1e-12));
            }
    }

    TEST_CASE("noiseless disk reconstruction") {
        const std::size_t n = 256;
        const double ps = 0.08, radius = 7.0;
        const Sinogram s = disk_scan(radius, n, ps, 360);
        const Image rec = fbp_reconstruct(s, {kInf, 3}, n, n, ps);
        Phantom p;
        p.ellipses.push_back({0.0, 0.0, radius, radius, 0.0, 1.0});
        const Image ref = rasterize_phantom(p, n, n, ps);
        metrics::ObjectMask mask = metrics::ObjectMask::full(n, n);
        for (std::size_t i = 0; i < mask.inside.size(); ++i) mask.inside[i] = ref.values()[i] > 0.0;
        CHECK(metrics::snr(ref, rec, mask) >= 15.0);
        // Interior of the uniform disk reproduces its value.
        double centre = 0.0;
        for (std::size_t r = 118; r < 138; ++r)
            for (std::size_t c = 118; c < 138; ++c) centre += rec(r, c) / 400.0;
        CHECK(std::abs(centre - 1.0) < 0.01);
    }

    TEST_CASE("reconstruction is linear") {
        const ScanGeometry g = geometry_for(Grid{32, 32, 1.0}, 30, 1e4);
        Rng rng(8);
        Sinogram a(g), b(g), sum(g);
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            a.data[i] = rng.normal();
            b.data[i] = rng.normal();
            sum.data[i] = a.data[i] + b.data[i];
        }
        const Image ra = fbp_reconstruct(a, {0.4, 3}, 32, 32, 1.0);
        const Image rb = fbp_reconstruct(b, {0.4, 3}, 32, 32, 1.0);
        const Image rs = fbp_reconstruct(sum, {0.4, 3}, 32, 32, 1.0);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            err += std::pow(rs.values()[i] - ra.values()[i] - rb.values()[i], 2);
            ref += rs.values()[i] * rs.values()[i];
        }
        CHECK(std::sqrt(err / ref) < 1e-10);
    }

    TEST_CASE("sweep matches individual reconstructions in order") {
        const Sinogram s = disk_scan(10.0, 32, 1.0, 30);
        const auto one = fbp_sweep(s, {{0.8, 3}}, 32, 32, 1.0);
        REQUIRE(one.size() == 1);
        CHECK(one[0].values() == fbp_reconstruct(s, {0.8, 3}, 32, 32, 1.0).values());
        const auto bank = default_filter_bank();
        const auto three = fbp_sweep(s, bank, 32, 32, 1.0);
        REQUIRE(three.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(three[i].values() == fbp_reconstruct(s, bank[i], 32, 32, 1.0).values());
    }

    TEST_CASE("permuting views permutes filtered views") {
        const Sinogram s = disk_scan(6.0, 32, 0.5, 16);
        Sinogram swapped = s;
        const std::size_t nb = s.geometry.num_bins;
        std::swap_ranges(swapped.view(2).begin(), swapped.view(2).end(), swapped.view(9).begin());
        const auto a = filter_projection(s.view(2), 0.5, {0.4, 3});
        const auto b = filter_projection(swapped.view(9), 0.5, {0.4, 3});
        for (std::size_t i = 0; i < nb; ++i) CHECK(a[i] == b[i]);
    }

    TEST_CASE("noise variance decreases with the cut-off") {
        const std::size_t n = 64;
        const double ps = 0.32;
        const Image ref = rasterize_phantom(random_tissue(4, 10.0), n, n, ps);
        const Calibration cal;
        const ScanGeometry g = geometry_for(Grid{n, n, ps}, 120, 1e4);
        const Sinogram clean = radon_forward(cal.to_attenuation(ref), g);
        const FilterBank bank = default_filter_bank();
        const auto truth = fbp_sweep(clean, bank, n, n, ps);
        std::vector<double> var(bank.size(), 0.0);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto noisy = fbp_sweep(counts_to_sinogram(simulate_counts(clean, seed)), bank, n, n, ps);
            for (std::size_t b = 0; b < bank.size(); ++b)
                for (std::size_t i = 0; i < noisy[b].size(); ++i) var[b] += std::pow(noisy[b].values()[i] - truth[b].values()[i], 2);
        }
        CHECK(var[0] < var[1]);
        CHECK(var[1] < var[2]);
    }

    TEST_CASE("strong low-pass widens the local impulse response") {
        const std::size_t n = 64;
        const double ps = 0.32;
        const Image ref = rasterize_phantom(random_tissue(4, 10.0), n, n, ps);
        const ScanGeometry g = geometry_for(Grid{n, n, ps}, 120, 1e4);
        auto recon_with = [&](double cutoff) {
            return [&, cutoff](const Image& im) { return fbp_reconstruct(radon_forward(im, g), {cutoff, 3}, n, n, ps); };
        };
        const std::vector<metrics::Pixel> probes{{32, 32}, {20, 40}, {40, 24}};
        const auto blurred = metrics::lir_fwhm(recon_with(0.4), ref, probes);
        const auto sharp = metrics::lir_fwhm(recon_with(kInf), ref, probes);
        for (std::size_t i = 0; i < probes.size(); ++i) CHECK(blurred[i] > sharp[i]);
    }
}
