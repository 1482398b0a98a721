#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jdda/data.hpp"
#include "jdda/losses.hpp"
#include "jdda/model.hpp"

namespace jdda {

enum class OptimizerKind { sgd, adam };

inline constexpr double kDefaultLambda2Instance = 0.03;
inline constexpr double kDefaultLambda2Center = 0.01;

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    Variant variant = Variant::jdda_center;
    std::size_t batch_per_domain = 128;
    std::size_t iterations = 1000;
    double eta = 1e-4;
    OptimizerConfig optimizer;
    double lambda1 = 1.0;   // base CORAL weight, scaled by the progressive schedule
    /// Unset means the per-variant default (0.03 instance, 0.01 center).
    std::optional<double> lambda2;
    double mu = 10.0;
    double gamma = 0.5;
    double alpha = 1.0;
    double beta = 1.0;
    double m1 = 0.0;
    double m2 = 100.0;
    std::size_t eval_interval = 100;
    std::uint64_t seed = 0;
    /// Hidden widths before the bottleneck, then the bottleneck width.
    std::vector<std::size_t> hidden{64};
    std::size_t bottleneck_dim = 16;

    void validate() const;
    double effective_lambda2() const noexcept;
    LossWeights loss_weights(double progress) const;
};

/// Moment accumulators for the adaptive optimizer; empty for plain SGD.
struct OptimizerState {
    std::uint64_t step = 0;
    GradientSet first;
    GradientSet second;

    static OptimizerState for_params(const NetworkParams& params, const OptimizerConfig& config);
};

/// In-place parameter update from a gradient.
void apply_update(NetworkParams& params, OptimizerState& state, const GradientSet& grads,
                  const OptimizerConfig& config, double eta);

/// 2/(1 + exp(−μ·p)) − 1.
double lambda_schedule(double progress, double mu);

struct StepMetrics {
    double total = 0.0;
    double source = 0.0;
    double coral = 0.0;
    double discriminative = 0.0;
    double lambda1 = 0.0;
};

/// Mutable training state: parameters, optimizer moments and (for JDDA-C) centers.
struct TrainState {
    NetworkParams params;
    OptimizerState optimizer;
    std::optional<CenterState> centers;
};

/// One joint update on a source batch (with labels) and a target batch.
///
/// For jdda_center, uninitialized centers are first set from the batch; the
/// loss uses the current centers and the centers then take one recursion step
/// from the same features, independently of the learning rate.
StepMetrics train_step(TrainState& state, const Matrix& source_batch, std::span<const int> source_labels,
                       const Matrix& target_batch, const TrainConfig& config, double progress);

/// Evaluates the joint loss without updating anything.
StepMetrics evaluate_losses(const TrainState& state, const Matrix& source_batch,
                            std::span<const int> source_labels, const Matrix& target_batch,
                            const TrainConfig& config, double progress);

struct EvalRecord {
    std::size_t iteration = 0;
    double source_loss = 0.0;
    double coral_loss = 0.0;
    double discriminative_loss = 0.0;
    double lambda1 = 0.0;
    double target_accuracy = 0.0;
    double source_accuracy = 0.0;
};

struct RunReport {
    std::vector<EvalRecord> records;
    double final_target_accuracy = 0.0;
    double final_source_accuracy = 0.0;
    double seconds_per_iteration = 0.0;
};

struct TrainResult {
    NetworkParams params;
    std::optional<CenterState> centers;
    RunReport report;
};

/// Target labels, when present, are used for the report only.
TrainResult train(const TrainConfig& config, const LabeledDataset& source, const UnlabeledDataset& target);

std::vector<std::size_t> layer_sizes_for(const TrainConfig& config, std::size_t input_dim,
                                         std::size_t num_classes);

// --- evaluation -------------------------------------------------------------

struct Accuracy {
    double overall = 0.0;
    /// nullopt for classes with no samples in the dataset.
    std::vector<std::optional<double>> per_class;
};

Accuracy evaluate(const NetworkParams& params, const LabeledDataset& dataset);
/// Throws std::invalid_argument if the dataset carries no held-out labels.
Accuracy evaluate(const NetworkParams& params, const UnlabeledDataset& dataset);

/// CSV with a version comment line, then
/// iteration,source_loss,coral_loss,discriminative_loss,lambda1,target_accuracy,source_accuracy
void write_report_csv(const RunReport& report, const std::string& path);

}  // namespace jdda
