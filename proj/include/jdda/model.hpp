#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "jdda/matrix.hpp"

namespace jdda {

inline constexpr double kLeakySlope = 0.01;

struct DenseLayer {
    Matrix weights;              // in × out
    std::vector<double> bias;    // out

    std::size_t in_dim() const noexcept { return weights.rows(); }
    std::size_t out_dim() const noexcept { return weights.cols(); }
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected network: leaky-ReLU hidden layers, the last of which is
/// the bottleneck, followed by a linear classifier head producing logits.
///
/// The same parameters are evaluated on the source and the target batch, so
/// the "two streams" share every weight by construction.
class NetworkParams {
public:
    NetworkParams() = default;
    /// Validates that dimensions chain; throws std::invalid_argument otherwise.
    explicit NetworkParams(std::vector<DenseLayer> layers);

    std::span<const DenseLayer> layers() const noexcept { return layers_; }
    std::span<DenseLayer> layers() noexcept { return layers_; }

    std::size_t input_dim() const noexcept { return layers_.front().in_dim(); }
    std::size_t bottleneck_dim() const noexcept { return layers_.back().in_dim(); }
    std::size_t num_classes() const noexcept { return layers_.back().out_dim(); }
    /// Index of the layer whose activations are the adaptation features.
    std::size_t bottleneck_index() const noexcept { return layers_.size() - 2; }
    std::size_t parameter_count() const noexcept;
    std::vector<std::size_t> layer_sizes() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

private:
    std::vector<DenseLayer> layers_;
};

/// `sizes` lists every layer width: input, hidden..., bottleneck, classes.
/// Weights are N(0, 2/fan_in); biases start at zero.
NetworkParams init_params(std::span<const std::size_t> sizes, std::uint64_t seed);

struct ForwardTrace {
    std::vector<Matrix> inputs;          // inputs[k] feeds layer k; inputs[0] is the batch
    std::vector<Matrix> pre_activations; // one per layer
    Matrix logits;

    std::size_t batch_size() const noexcept { return logits.rows(); }
    /// Bottleneck activations (n × L), i.e. the input of the classifier head.
    const Matrix& bottleneck() const noexcept { return inputs.back(); }
};

ForwardTrace forward(const NetworkParams& params, const Matrix& batch);

/// Per-parameter gradients, congruent with NetworkParams.
struct GradientSet {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;

    static GradientSet zeros_like(const NetworkParams& params);
    GradientSet& operator+=(const GradientSet& other);
    GradientSet& operator*=(double s) noexcept;
    double max_abs() const noexcept;
};

/// Reverse-mode gradients of ⟨d_logits, logits⟩ + ⟨d_bottleneck, bottleneck⟩.
/// `d_bottleneck` may be empty (0×0) when no loss acts on the features.
GradientSet backward(const NetworkParams& params, const ForwardTrace& trace,
                     const Matrix& d_logits, const Matrix& d_bottleneck);

std::vector<int> predict(const NetworkParams& params, const Matrix& batch);

// Checkpoint format (text, one token stream):
//   jdda-checkpoint 1
//   layers <n>
//   layer <in> <out>          then in*out weights row-major, then out biases
// Values are written in shortest round-trip decimal form.
void save_checkpoint(const NetworkParams& params, std::ostream& out);
NetworkParams load_checkpoint(std::istream& in);
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace jdda
