#include "jdda/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace jdda {

namespace {

constexpr const char* kCheckpointMagic = "jdda-checkpoint";
constexpr int kCheckpointVersion = 1;

double leaky(double z) noexcept { return z > 0.0 ? z : kLeakySlope * z; }
double leaky_grad(double z) noexcept { return z > 0.0 ? 1.0 : kLeakySlope; }

Matrix affine(const Matrix& x, const DenseLayer& layer) {
    Matrix z = matmul(x, layer.weights);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto r = z.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
    }
    return z;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("checkpoint: cannot format value");
    return std::string(buf, end);
}

double parse_double(const std::string& token) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || end != token.data() + token.size())
        throw std::runtime_error("checkpoint: malformed value '" + token + "'");
    return v;
}

std::string expect_token(std::istream& in, const char* what) {
    std::string token;
    if (!(in >> token)) throw std::runtime_error(std::string("checkpoint: truncated, expected ") + what);
    return token;
}

std::size_t parse_count(std::istream& in, const char* what) {
    const std::string token = expect_token(in, what);
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || end != token.data() + token.size() || v == 0)
        throw std::runtime_error(std::string("checkpoint: bad ") + what + " '" + token + "'");
    return v;
}

}  // namespace

NetworkParams::NetworkParams(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.size() < 2)
        throw std::invalid_argument("NetworkParams: need a bottleneck layer and a classifier head");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& l = layers_[k];
        if (l.in_dim() == 0 || l.out_dim() == 0 || l.bias.size() != l.out_dim())
            throw std::invalid_argument("NetworkParams: layer " + std::to_string(k) +
                                        " has an invalid shape");
        if (k > 0 && layers_[k - 1].out_dim() != l.in_dim())
            throw std::invalid_argument("NetworkParams: layer " + std::to_string(k) +
                                        " input does not chain with the previous output");
    }
}

std::size_t NetworkParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
}

std::vector<std::size_t> NetworkParams::layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.push_back(input_dim());
    for (const auto& l : layers_) sizes.push_back(l.out_dim());
    return sizes;
}

NetworkParams init_params(std::span<const std::size_t> sizes, std::uint64_t seed) {
    if (sizes.size() < 3)
        throw std::invalid_argument("init_params: need at least input, bottleneck and class sizes");
    if (std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; }))
        throw std::invalid_argument("init_params: layer sizes must be >= 1");

    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const std::size_t in = sizes[k];
        const std::size_t out = sizes[k + 1];
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        DenseLayer layer{Matrix(in, out), std::vector<double>(out, 0.0)};
        for (double& w : layer.weights.values()) w = dist(rng);
        layers.push_back(std::move(layer));
    }
    return NetworkParams(std::move(layers));
}

ForwardTrace forward(const NetworkParams& params, const Matrix& batch) {
    if (batch.cols() != params.input_dim())
        throw std::invalid_argument("forward: batch has " + std::to_string(batch.cols()) +
                                    " columns, network expects " +
                                    std::to_string(params.input_dim()));
    const auto layers = params.layers();
    ForwardTrace trace;
    trace.inputs.reserve(layers.size());
    trace.pre_activations.reserve(layers.size());
    trace.inputs.push_back(batch);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        Matrix z = affine(trace.inputs.back(), layers[k]);
        const bool head = k + 1 == layers.size();
        if (head) {
            trace.logits = z;
        } else {
            Matrix a = z;
            for (double& v : a.values()) v = leaky(v);
            trace.inputs.push_back(std::move(a));
        }
        trace.pre_activations.push_back(std::move(z));
    }
    return trace;
}

GradientSet GradientSet::zeros_like(const NetworkParams& params) {
    GradientSet g;
    for (const auto& l : params.layers()) {
        g.weights.emplace_back(l.in_dim(), l.out_dim());
        g.bias.emplace_back(l.out_dim(), 0.0);
    }
    return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
    if (weights.size() != other.weights.size())
        throw std::invalid_argument("GradientSet: layer count mismatch");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        weights[k] += other.weights[k];
        if (bias[k].size() != other.bias[k].size())
            throw std::invalid_argument("GradientSet: bias shape mismatch");
        for (std::size_t j = 0; j < bias[k].size(); ++j) bias[k][j] += other.bias[k][j];
    }
    return *this;
}

GradientSet& GradientSet::operator*=(double s) noexcept {
    for (auto& w : weights) w *= s;
    for (auto& b : bias)
        for (double& v : b) v *= s;
    return *this;
}

double GradientSet::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& w : weights)
        for (double v : w.values()) m = std::max(m, std::abs(v));
    for (const auto& b : bias)
        for (double v : b) m = std::max(m, std::abs(v));
    return m;
}

GradientSet backward(const NetworkParams& params, const ForwardTrace& trace,
                     const Matrix& d_logits, const Matrix& d_bottleneck) {
    const auto layers = params.layers();
    const std::size_t n = trace.batch_size();
    if (d_logits.rows() != n || d_logits.cols() != params.num_classes())
        throw std::invalid_argument("backward: d_logits shape does not match the trace");
    const bool has_feature_grad = !d_bottleneck.empty();
    if (has_feature_grad &&
        (d_bottleneck.rows() != n || d_bottleneck.cols() != params.bottleneck_dim()))
        throw std::invalid_argument("backward: d_bottleneck shape does not match the trace");

    GradientSet grads = GradientSet::zeros_like(params);
    Matrix delta = d_logits;  // gradient w.r.t. the pre-activation of layer k
    for (std::size_t k = layers.size(); k-- > 0;) {
        const Matrix& input = trace.inputs[k];
        grads.weights[k] = matmul_tn(input, delta);
        auto& gb = grads.bias[k];
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            auto r = delta.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) gb[j] += r[j];
        }
        if (k == 0) break;

        Matrix d_input = matmul_nt(delta, layers[k].weights);
        if (k == layers.size() - 1 && has_feature_grad) d_input += d_bottleneck;
        const Matrix& z_prev = trace.pre_activations[k - 1];
        auto dv = d_input.values();
        auto zv = z_prev.values();
        for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= leaky_grad(zv[i]);
        delta = std::move(d_input);
    }
    return grads;
}

std::vector<int> predict(const NetworkParams& params, const Matrix& batch) {
    const ForwardTrace trace = forward(params, batch);
    std::vector<int> out(batch.rows());
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        auto r = trace.logits.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

void save_checkpoint(const NetworkParams& params, std::ostream& out) {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "layers " << params.layers().size() << '\n';
    for (const auto& l : params.layers()) {
        out << "layer " << l.in_dim() << ' ' << l.out_dim() << '\n';
        for (std::size_t i = 0; i < l.in_dim(); ++i) {
            for (std::size_t j = 0; j < l.out_dim(); ++j)
                out << (j ? " " : "") << format_double(l.weights(i, j));
            out << '\n';
        }
        for (std::size_t j = 0; j < l.out_dim(); ++j) out << (j ? " " : "") << format_double(l.bias[j]);
        out << '\n';
    }
}

NetworkParams load_checkpoint(std::istream& in) {
    if (expect_token(in, "magic") != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic");
    if (expect_token(in, "version") != std::to_string(kCheckpointVersion))
        throw std::runtime_error("checkpoint: unsupported version");
    if (expect_token(in, "'layers'") != "layers") throw std::runtime_error("checkpoint: expected 'layers'");
    const std::size_t count = parse_count(in, "layer count");
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < count; ++k) {
        if (expect_token(in, "'layer'") != "layer") throw std::runtime_error("checkpoint: expected 'layer'");
        const std::size_t rows = parse_count(in, "layer input size");
        const std::size_t cols = parse_count(in, "layer output size");
        DenseLayer layer{Matrix(rows, cols), std::vector<double>(cols)};
        for (double& w : layer.weights.values()) w = parse_double(expect_token(in, "weight"));
        for (double& b : layer.bias) b = parse_double(expect_token(in, "bias"));
        layers.push_back(std::move(layer));
    }
    return NetworkParams(std::move(layers));
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    save_checkpoint(params, out);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace jdda
