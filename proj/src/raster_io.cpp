#include "tomofuse/raster_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_le.hpp"
#include "tomofuse/error.hpp"

namespace tomofuse {
namespace {

using detail::get_le;
using detail::put_le;

constexpr const char* kMagic = "TFR1";

std::size_t parse_count(const std::string& text, long line) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw ParseError("bad integer '" + text + "'", line);
    return v;
}

}  // namespace

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
    if (text == "inf" || text == "Inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* begin = text.data();
    if (!text.empty() && text[0] == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || begin == ptr)
        throw InputError("not a number: '" + text + "'");
    return v;
}

void write_raster(const std::filesystem::path& path, const RasterFile& file) {
    if (file.data.size() != file.rows * file.cols) throw DimensionError("raster data does not match rows*cols");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << kMagic << '\n';
    out << "kind=" << file.kind << " rows=" << file.rows << " cols=" << file.cols
        << " pixel_size=" << format_double(file.pixel_size) << " extra=";
    bool first = true;
    for (const auto& [k, v] : file.extra) {
        if (!first) out << ',';
        out << k << '=' << v;
        first = false;
    }
    out << '\n';
    for (double v : file.data) put_le(out, v);
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

RasterFile read_raster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::string magic;
    if (!std::getline(in, magic) || magic != kMagic) throw ParseError("missing TFR1 magic", 1);
    std::string header;
    if (!std::getline(in, header)) throw ParseError("missing header line", 2);

    RasterFile file;
    bool have_kind = false, have_rows = false, have_cols = false, have_ps = false;
    std::istringstream fields(header);
    std::string field;
    while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ParseError("malformed header field '" + field + "'", 2);
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "kind") {
            if (value != "image" && value != "sinogram") throw ParseError("unknown kind '" + value + "'", 2);
            file.kind = value;
            have_kind = true;
        } else if (key == "rows") {
            file.rows = parse_count(value, 2);
            have_rows = true;
        } else if (key == "cols") {
            file.cols = parse_count(value, 2);
            have_cols = true;
        } else if (key == "pixel_size") {
            try {
                file.pixel_size = parse_double(value);
            } catch (const InputError&) {
                throw ParseError("bad pixel_size '" + value + "'", 2);
            }
            have_ps = true;
        } else if (key == "extra") {
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) {
                if (item.empty()) continue;
                const auto e = item.find('=');
                if (e == std::string::npos) throw ParseError("malformed extra entry '" + item + "'", 2);
                file.extra[item.substr(0, e)] = item.substr(e + 1);
            }
        } else {
            throw ParseError("unknown header field '" + key + "'", 2);
        }
    }
    if (!(have_kind && have_rows && have_cols && have_ps)) throw ParseError("incomplete header", 2);
    if (file.rows == 0 || file.cols == 0) throw ParseError("empty raster", 2);

    const long payload_start = static_cast<long>(in.tellg());
    const std::size_t count = file.rows * file.cols;
    std::vector<unsigned char> bytes(count * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw ParseError("truncated payload", payload_start + static_cast<long>(in.gcount()));
    if (in.peek() != std::char_traits<char>::eof())
        throw ParseError("trailing bytes after payload", payload_start + static_cast<long>(bytes.size()));
    file.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) file.data[i] = get_le(bytes.data() + 8 * i);
    return file;
}

void save_image(const std::filesystem::path& path, const Image& image, const std::map<std::string, std::string>& extra) {
    RasterFile f;
    f.kind = "image";
    f.rows = image.height();
    f.cols = image.width();
    f.pixel_size = image.pixel_size();
    f.extra = extra;
    f.data = image.values();
    write_raster(path, f);
}

Image load_image(const std::filesystem::path& path) {
    RasterFile f = read_raster(path);
    if (f.kind != "image") throw InputError("'" + path.string() + "' holds a " + f.kind + ", expected an image");
    return Image(f.cols, f.rows, f.pixel_size, std::move(f.data));
}

namespace {

RasterFile sinogram_file(const ScanGeometry& g, const std::vector<double>& data, const char* content) {
    RasterFile f;
    f.kind = "sinogram";
    f.rows = g.num_views;
    f.cols = g.num_bins;
    f.pixel_size = g.bin_spacing;
    f.extra["blank"] = format_double(g.blank_count);
    f.extra["content"] = content;
    f.data = data;
    return f;
}

ScanGeometry geometry_of(const RasterFile& f, const std::filesystem::path& path) {
    if (f.kind != "sinogram") throw InputError("'" + path.string() + "' holds an " + f.kind + ", expected a sinogram");
    ScanGeometry g;
    g.num_views = f.rows;
    g.num_bins = f.cols;
    g.bin_spacing = f.pixel_size;
    auto it = f.extra.find("blank");
    if (it != f.extra.end()) g.blank_count = parse_double(it->second);
    g.validate();
    return g;
}

}  // namespace

void save_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
    write_raster(path, sinogram_file(sino.geometry, sino.data, "lineint"));
}

Sinogram load_sinogram(const std::filesystem::path& path) {
    RasterFile f = read_raster(path);
    Sinogram s;
    s.geometry = geometry_of(f, path);
    auto it = f.extra.find("content");
    if (it != f.extra.end() && it->second != "lineint")
        throw InputError("'" + path.string() + "' holds " + it->second + ", expected line integrals");
    s.data = std::move(f.data);
    return s;
}

void save_counts(const std::filesystem::path& path, const CountsData& counts) {
    write_raster(path, sinogram_file(counts.geometry, counts.counts, "counts"));
}

CountsData load_counts(const std::filesystem::path& path) {
    RasterFile f = read_raster(path);
    CountsData c;
    c.geometry = geometry_of(f, path);
    auto it = f.extra.find("content");
    if (it == f.extra.end() || it->second != "counts")
        throw InputError("'" + path.string() + "' does not hold photon counts");
    c.counts = std::move(f.data);
    return c;
}

}  // namespace tomofuse
