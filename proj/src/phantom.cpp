#include "tomofuse/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tomofuse/error.hpp"
#include "tomofuse/raster_io.hpp"
#include "tomofuse/rng.hpp"

namespace tomofuse {

bool Ellipse::contains(double x, double y) const {
    const double t = angle_deg * std::numbers::pi / 180.0;
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = dx * std::cos(t) + dy * std::sin(t);
    const double v = -dx * std::sin(t) + dy * std::cos(t);
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

void Phantom::validate() const {
    for (const auto& e : ellipses)
        if (!(e.a > 0.0) || !(e.b > 0.0)) throw InputError("phantom ellipse semi-axes must be positive");
    if (!texture.empty() && (!(texture_support.a > 0.0) || !(texture_support.b > 0.0)))
        throw InputError("texture support semi-axes must be positive");
}

Image rasterize_phantom(const Phantom& phantom, std::size_t width, std::size_t height, double pixel_size) {
    phantom.validate();
    Image img(width, height, pixel_size, phantom.background);
    for (std::size_t r = 0; r < height; ++r) {
        const double y = img.y_of(r);
        for (std::size_t c = 0; c < width; ++c) {
            const double x = img.x_of(c);
            double v = phantom.background;
            for (const auto& e : phantom.ellipses)
                if (e.contains(x, y)) v += e.value;
            if (!phantom.texture.empty() && phantom.texture_support.contains(x, y))
                for (const auto& w : phantom.texture) v += w.amplitude * std::cos(w.kx * x + w.ky * y + w.phase);
            img(r, c) = v;
        }
    }
    return img;
}

Phantom shepp_logan(double fov_radius) {
    // Toft's modified Shepp-Logan geometry; values re-expressed in HU.
    struct Row {
        double cx, cy, a, b, angle, value;
    };
    static constexpr Row rows[] = {
        {0.0, 0.0, 0.69, 0.92, 0.0, 2000.0},       {0.0, -0.0184, 0.6624, 0.874, 0.0, -960.0},
        {0.22, 0.0, 0.11, 0.31, -18.0, -100.0},    {-0.22, 0.0, 0.16, 0.41, 18.0, -100.0},
        {0.0, 0.35, 0.21, 0.25, 0.0, 40.0},        {0.0, 0.1, 0.046, 0.046, 0.0, 40.0},
        {0.0, -0.1, 0.046, 0.046, 0.0, 40.0},      {-0.08, -0.605, 0.046, 0.023, 0.0, 40.0},
        {0.0, -0.605, 0.023, 0.023, 0.0, 40.0},    {0.06, -0.605, 0.023, 0.046, 0.0, 40.0},
    };
    Phantom p;
    p.background = -1000.0;
    for (const auto& r : rows)
        p.ellipses.push_back({r.cx * fov_radius, r.cy * fov_radius, r.a * fov_radius, r.b * fov_radius, r.angle, r.value});
    return p;
}

namespace {

// Uniform point inside an ellipse shrunk by `scale`.
std::pair<double, double> point_inside(const Ellipse& e, double scale, Rng& rng) {
    const double radius = scale * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double u = radius * e.a * std::cos(phi);
    const double v = radius * e.b * std::sin(phi);
    const double t = e.angle_deg * std::numbers::pi / 180.0;
    return {e.cx + u * std::cos(t) - v * std::sin(t), e.cy + u * std::sin(t) + v * std::cos(t)};
}

}  // namespace

Phantom random_tissue(std::uint64_t seed, double fov_radius) {
    Rng rng(seed);
    const double R = fov_radius;
    Phantom p;
    p.background = -1000.0;

    Ellipse body{rng.uniform(-0.04, 0.04) * R, rng.uniform(-0.04, 0.04) * R, rng.uniform(0.74, 0.86) * R,
                 rng.uniform(0.56, 0.70) * R, rng.uniform(-15.0, 15.0), 900.0};  // fat, -100 HU
    p.ellipses.push_back(body);
    const double inner = rng.uniform(0.82, 0.9);
    Ellipse muscle{body.cx, body.cy, body.a * inner, body.b * inner, body.angle_deg, 150.0};  // 50 HU
    p.ellipses.push_back(muscle);

    const int bones = rng.uniform() < 0.5 ? 1 : 2;
    for (int i = 0; i < bones; ++i) {
        const double offset = bones == 1 ? 0.0 : (i == 0 ? -0.4 : 0.4);
        const double rb = rng.uniform(0.11, 0.16) * R;
        Ellipse bone{muscle.cx + offset * muscle.a + rng.uniform(-0.05, 0.05) * R,
                     muscle.cy + rng.uniform(-0.12, 0.12) * R, rb * rng.uniform(0.9, 1.1), rb * rng.uniform(0.9, 1.1),
                     rng.uniform(0.0, 180.0), 1150.0};
        p.ellipses.push_back(bone);
        const double m = rng.uniform(0.5, 0.65);
        p.ellipses.push_back({bone.cx, bone.cy, bone.a * m, bone.b * m, bone.angle_deg, -1100.0});  // marrow ~100 HU
    }

    const int fat_streaks = 2 + static_cast<int>(rng.below(4));
    for (int i = 0; i < fat_streaks; ++i) {
        auto [x, y] = point_inside(muscle, 0.8, rng);
        p.ellipses.push_back({x, y, rng.uniform(0.08, 0.2) * R, rng.uniform(0.01, 0.025) * R, rng.uniform(0.0, 180.0), -150.0});
    }

    const int pockets = static_cast<int>(rng.below(3));
    for (int i = 0; i < pockets; ++i) {
        auto [x, y] = point_inside(muscle, 0.85, rng);
        const double ra = rng.uniform(0.025, 0.05) * R;
        p.ellipses.push_back({x, y, ra, ra * rng.uniform(0.6, 1.0), rng.uniform(0.0, 180.0), -1050.0});
    }

    const int lesions = 4 + static_cast<int>(rng.below(5));
    for (int i = 0; i < lesions; ++i) {
        auto [x, y] = point_inside(muscle, 0.8, rng);
        const double ra = rng.uniform(0.03, 0.08) * R;
        const double contrast = rng.uniform(30.0, 80.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        p.ellipses.push_back({x, y, ra, ra * rng.uniform(0.6, 1.0), rng.uniform(0.0, 180.0), contrast});
    }

    p.texture_support = body;
    p.texture_support.value = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double wavelength = rng.uniform(0.08, 0.35) * R;
        const double dir = rng.uniform(0.0, std::numbers::pi);
        const double k = 2.0 * std::numbers::pi / wavelength;
        p.texture.push_back({rng.uniform(4.0, 10.0), k * std::cos(dir), k * std::sin(dir), rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
    return p;
}

Phantom parse_phantom(const std::string& text) {
    Phantom p;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    bool have_support = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        auto num = [&](std::size_t i) {
            try {
                return parse_double(tok.at(i));
            } catch (const std::exception&) {
                throw ParseError("bad phantom number", line_no);
            }
        };
        if (tok[0] == "background") {
            if (tok.size() != 2) throw ParseError("background takes one value", line_no);
            p.background = num(1);
        } else if (tok[0] == "wave") {
            if (tok.size() != 5) throw ParseError("wave takes four values", line_no);
            p.texture.push_back({num(1), num(2), num(3), num(4)});
        } else if (tok[0] == "support") {
            if (tok.size() != 6) throw ParseError("support takes five values", line_no);
            p.texture_support = {num(1), num(2), num(3), num(4), num(5), 0.0};
            have_support = true;
        } else {
            if (tok.size() != 6) throw ParseError("ellipse line needs 'cx cy a b angle_deg value'", line_no);
            Ellipse e{num(0), num(1), num(2), num(3), num(4), num(5)};
            if (!(e.a > 0.0) || !(e.b > 0.0)) throw ParseError("ellipse semi-axes must be positive", line_no);
            p.ellipses.push_back(e);
        }
    }
    if (!p.texture.empty() && !have_support) throw ParseError("texture waves need a support line", line_no);
    return p;
}

std::string format_phantom(const Phantom& p) {
    std::ostringstream out;
    out << "background " << format_double(p.background) << '\n';
    for (const auto& e : p.ellipses)
        out << format_double(e.cx) << ' ' << format_double(e.cy) << ' ' << format_double(e.a) << ' '
            << format_double(e.b) << ' ' << format_double(e.angle_deg) << ' ' << format_double(e.value) << '\n';
    if (!p.texture.empty()) {
        const auto& s = p.texture_support;
        out << "support " << format_double(s.cx) << ' ' << format_double(s.cy) << ' ' << format_double(s.a) << ' '
            << format_double(s.b) << ' ' << format_double(s.angle_deg) << '\n';
        for (const auto& w : p.texture)
            out << "wave " << format_double(w.amplitude) << ' ' << format_double(w.kx) << ' ' << format_double(w.ky)
                << ' ' << format_double(w.phase) << '\n';
    }
    return out.str();
}

Phantom load_phantom(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_phantom(buf.str());
}

}  // namespace tomofuse
