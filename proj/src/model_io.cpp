#include <cstdio>
#include <fstream>
#include <sstream>

#include "tomofuse/error.hpp"
#include "tomofuse/neuralnet.hpp"
#include "tomofuse/raster_io.hpp"

namespace tomofuse::nn {
namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    std::vector<std::string> next(const char* what) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            std::istringstream fields(line);
            std::vector<std::string> tok;
            for (std::string t; fields >> t;) tok.push_back(t);
            if (!tok.empty()) return tok;
        }
        throw ParseError(std::string("unexpected end of model file, expected ") + what, line_ + 1);
    }

    double number(const std::string& text) const {
        try {
            return parse_double(text);
        } catch (const std::exception&) {
            throw ParseError("bad number '" + text + "'", line_);
        }
    }

    std::size_t count(const std::string& text) const {
        const double v = number(text);
        if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) throw ParseError("bad size '" + text + "'", line_);
        return static_cast<std::size_t>(v);
    }

    void expect(const std::vector<std::string>& tok, const std::string& keyword, std::size_t fields) const {
        if (tok.empty() || tok[0] != keyword || tok.size() != fields)
            throw ParseError("expected '" + keyword + "' line with " + std::to_string(fields - 1) + " values", line_);
    }

    bool exhausted() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return false;
        }
        return true;
    }

    long line() const { return line_; }

private:
    std::istringstream in_;
    long line_ = 0;
};

}  // namespace

std::string format_model(const NeuralNet& net) {
    net.validate();
    std::ostringstream out;
    out << "TFNN1\nlayers";
    for (std::size_t s : net.layer_sizes()) out << ' ' << s;
    out << "\nnorm_shift " << fmt17(net.norm_shift) << "\nnorm_scale " << fmt17(net.norm_scale) << '\n';
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const Layer& layer = net.layers()[l];
        out << "weights " << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) out << (j ? " " : "") << fmt17(layer.weights(i, j));
            out << '\n';
        }
        out << "bias " << layer.bias.size() << '\n';
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) out << (i ? " " : "") << fmt17(layer.bias(i));
        out << '\n';
    }
    out << "end\n";
    return out.str();
}

NeuralNet parse_model(const std::string& text) {
    LineReader reader(text);
    auto tok = reader.next("TFNN1 header");
    if (tok.size() != 1 || tok[0] != "TFNN1") throw ParseError("missing TFNN1 header", reader.line());

    tok = reader.next("layer sizes");
    if (tok.size() < 3 || tok[0] != "layers") throw ParseError("expected 'layers' with at least two sizes", reader.line());
    std::vector<std::size_t> sizes;
    for (std::size_t i = 1; i < tok.size(); ++i) sizes.push_back(reader.count(tok[i]));
    NeuralNet net(sizes);

    tok = reader.next("norm_shift");
    reader.expect(tok, "norm_shift", 2);
    net.norm_shift = reader.number(tok[1]);
    tok = reader.next("norm_scale");
    reader.expect(tok, "norm_scale", 2);
    net.norm_scale = reader.number(tok[1]);

    for (auto& layer : net.layers()) {
        tok = reader.next("weights");
        reader.expect(tok, "weights", 3);
        if (reader.count(tok[1]) != static_cast<std::size_t>(layer.weights.rows()) ||
            reader.count(tok[2]) != static_cast<std::size_t>(layer.weights.cols()))
            throw ParseError("weight block shape disagrees with layer sizes", reader.line());
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
            tok = reader.next("weight row");
            if (tok.size() != static_cast<std::size_t>(layer.weights.cols())) throw ParseError("weight row has the wrong length", reader.line());
            for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = reader.number(tok[static_cast<std::size_t>(j)]);
        }
        tok = reader.next("bias");
        reader.expect(tok, "bias", 2);
        if (reader.count(tok[1]) != static_cast<std::size_t>(layer.bias.size())) throw ParseError("bias length disagrees with layer sizes", reader.line());
        tok = reader.next("bias values");
        if (tok.size() != static_cast<std::size_t>(layer.bias.size())) throw ParseError("bias row has the wrong length", reader.line());
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = reader.number(tok[static_cast<std::size_t>(i)]);
    }
    tok = reader.next("end marker");
    if (tok.size() != 1 || tok[0] != "end") throw ParseError("expected 'end' after the last layer", reader.line());
    if (!reader.exhausted()) throw ParseError("trailing content after the last layer", reader.line());
    try {
        net.validate();
    } catch (const std::exception& e) {
        throw ParseError(e.what(), reader.line());
    }
    return net;
}

void save_model(const NeuralNet& net, const std::filesystem::path& path) {
    const std::string text = format_model(net);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

NeuralNet load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str());
}

}  // namespace tomofuse::nn
