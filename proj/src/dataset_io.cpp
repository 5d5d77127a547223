#include <charconv>
#include <fstream>
#include <sstream>

#include "binary_le.hpp"
#include "tomofuse/error.hpp"
#include "tomofuse/fusion.hpp"
#include "tomofuse/raster_io.hpp"

namespace tomofuse::fusion {
namespace {

constexpr const char* kMagic = "TFDS1";

std::size_t parse_size(const std::string& text) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw ParseError("bad integer '" + text + "'", 2);
    return v;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const nn::TrainingSet& set, const nn::Normalization& norm) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << kMagic << '\n'
        << "examples=" << set.size() << " inputs=" << set.inputs.cols() << " outputs=" << set.targets.cols()
        << " norm_shift=" << format_double(norm.shift) << " norm_scale=" << format_double(norm.scale) << '\n';
    for (Eigen::Index k = 0; k < set.inputs.rows(); ++k) {
        detail::put_le(out, set.weights(k));
        for (Eigen::Index j = 0; j < set.inputs.cols(); ++j) detail::put_le(out, set.inputs(k, j));
        for (Eigen::Index j = 0; j < set.targets.cols(); ++j) detail::put_le(out, set.targets(k, j));
    }
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

nn::TrainingSet load_dataset(const std::filesystem::path& path, nn::Normalization& norm) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string magic;
    if (!std::getline(in, magic) || magic != kMagic) throw ParseError("missing TFDS1 magic", 1);
    std::string header;
    if (!std::getline(in, header)) throw ParseError("missing header line", 2);

    std::size_t K = 0, m = 0, n = 0;
    bool have[5] = {false, false, false, false, false};
    std::istringstream fields(header);
    for (std::string field; fields >> field;) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ParseError("malformed header field '" + field + "'", 2);
        const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        try {
            if (key == "examples") K = parse_size(value), have[0] = true;
            else if (key == "inputs") m = parse_size(value), have[1] = true;
            else if (key == "outputs") n = parse_size(value), have[2] = true;
            else if (key == "norm_shift") norm.shift = parse_double(value), have[3] = true;
            else if (key == "norm_scale") norm.scale = parse_double(value), have[4] = true;
            else throw ParseError("unknown header field '" + key + "'", 2);
        } catch (const InputError&) {
            throw ParseError("bad value in header field '" + field + "'", 2);
        }
    }
    for (bool h : have)
        if (!h) throw ParseError("incomplete header", 2);
    if (K == 0 || m == 0 || n == 0) throw ParseError("empty dataset", 2);

    const long payload_start = static_cast<long>(in.tellg());
    const std::size_t row = 1 + m + n;
    std::vector<unsigned char> bytes(K * row * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw ParseError("truncated payload", payload_start + static_cast<long>(in.gcount()));
    if (in.peek() != std::char_traits<char>::eof())
        throw ParseError("trailing bytes after payload", payload_start + static_cast<long>(bytes.size()));

    nn::TrainingSet set;
    set.inputs.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(m));
    set.targets.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(n));
    set.weights.resize(static_cast<Eigen::Index>(K));
    const unsigned char* p = bytes.data();
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k) {
        set.weights(k) = detail::get_le(p), p += 8;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j) set.inputs(k, j) = detail::get_le(p), p += 8;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) set.targets(k, j) = detail::get_le(p), p += 8;
    }
    try {
        set.validate();
    } catch (const std::exception& e) {
        throw ParseError(e.what(), payload_start);
    }
    return set;
}

}  // namespace tomofuse::fusion
