#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jdda/data.hpp"
#include "jdda/trainer.hpp"

namespace jdda {

/// Invalid configuration: unknown key, malformed value or inconsistent spec.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A run (or file write) that failed during an experiment.
class RunFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TaskKind { gaussians, moons, idx };

struct IdxTaskSpec {
    std::string source_images;
    std::string source_labels;
    std::string target_images;
    std::string target_labels;  // optional; evaluation only
    std::size_t source_limit = 2000;
    std::size_t target_limit = 1800;
    std::uint64_t subsample_seed = 20180815;
    std::size_t image_side = 28;
};

struct TaskSpec {
    TaskKind kind = TaskKind::gaussians;
    SyntheticShiftSpec synthetic;
    IdxTaskSpec idx;
};

struct ExperimentSpec {
    TaskSpec task;
    std::vector<Variant> methods{Variant::source_only, Variant::coral_only, Variant::jdda_instance,
                                 Variant::jdda_center};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    /// Base training config; `train.lambda2` set means "override for every method".
    TrainConfig train;
    double lambda2_instance = kDefaultLambda2Instance;
    double lambda2_center = kDefaultLambda2Center;
    /// λ2 values to sweep for the discriminative methods; empty = no sweep.
    std::vector<double> sweep_lambda2;
    std::string output_dir = "jdda_out";
    std::size_t workers = 1;

    void validate() const;
    /// λ2 used for `method` when no sweep value applies.
    double lambda2_for(Variant method) const noexcept;
};

// --- configuration -----------------------------------------------------------

/// Raw key → value pairs, in the order they were set.
using ConfigMap = std::map<std::string, std::string>;

/// Every recognised key with a one-line description.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and
/// malformed lines raise ConfigError naming the line.
ConfigMap parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigMap read_config_file(const std::string& path);

/// Applies `overrides` on top of `base` (flags win over file values).
ConfigMap merge_config(ConfigMap base, const ConfigMap& overrides);

/// Resolves keys into a spec with defaults applied. Type errors name the key.
ExperimentSpec resolve_config(const ConfigMap& values);

/// File (optional) + flag overrides → spec.
ExperimentSpec parse_config(const std::optional<std::string>& path, const ConfigMap& flags = {});

// --- running -------------------------------------------------------------------

DomainPair load_task(const TaskSpec& task);

struct RunResult {
    Variant method = Variant::source_only;
    std::optional<double> lambda2;  // empty for methods without a discriminative term
    std::uint64_t seed = 0;
    double target_accuracy = 0.0;
    double source_accuracy = 0.0;
    double source_compactness = 0.0;
    double seconds_per_iteration = 0.0;
    RunReport report;
    NetworkParams params;
};

struct AggregateCell {
    Variant method = Variant::source_only;
    std::optional<double> lambda2;
    std::vector<std::uint64_t> seeds;
    std::vector<double> target_accuracy;  // per seed, fraction in [0,1]
    double mean_target_accuracy = 0.0;
    /// Sample standard deviation; absent with fewer than two seeds.
    std::optional<double> std_target_accuracy;
    double mean_source_accuracy = 0.0;
    double mean_source_compactness = 0.0;
};

struct AggregateResult {
    std::vector<RunResult> runs;
    std::vector<AggregateCell> cells;

    const AggregateCell* find(Variant method, std::optional<double> lambda2 = std::nullopt) const;
};

/// Trains every (method, seed, λ2) combination and writes
///   runs.csv, aggregate.csv, summary.json,
///   curves/<method>[_l2-<λ2>]_seed-<seed>.csv, checkpoints/<same stem>.ckpt
/// into spec.output_dir. Throws RunFailure if any run fails (after the others finish).
AggregateResult run_experiment(const ExperimentSpec& spec);

/// Runs without writing anything.
AggregateResult run_experiment_in_memory(const ExperimentSpec& spec);

/// Writes the CSV/JSON artifacts of `result` into spec.output_dir.
void write_experiment_outputs(const ExperimentSpec& spec, const AggregateResult& result);

/// TrainConfig for one (method, seed, λ2) cell of the experiment.
TrainConfig config_for_run(const ExperimentSpec& spec, Variant method, std::uint64_t seed,
                           std::optional<double> lambda2);

AggregateCell aggregate(Variant method, std::optional<double> lambda2, std::span<const RunResult> runs);

// --- feature analysis ----------------------------------------------------------

/// Mean squared distance of each sample to its class mean, divided by the
/// smallest squared distance between two class means. Classes with no samples
/// are ignored; returns +inf when fewer than two classes are present.
double compactness_ratio(const Matrix& features, std::span<const int> labels, std::size_t class_count);

/// Bottleneck features of both domains as CSV with header
/// "domain,label,f1,...,fL"; target rows carry the held-out label or -1.
void dump_features(const NetworkParams& params, const LabeledDataset& source,
                   const UnlabeledDataset& target, const std::string& path);
void dump_features(const NetworkParams& params, const LabeledDataset& dataset, const std::string& path);

Matrix bottleneck_features(const NetworkParams& params, const Matrix& inputs);

/// Percentage with two decimals, e.g. 0.91234 → "91.23".
std::string format_percent(double fraction);

}  // namespace jdda
