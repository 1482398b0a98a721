#include "jdda/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "jdda/numerics.hpp"

namespace jdda {

namespace fs = std::filesystem;

namespace {

bool is_discriminative(Variant v) { return v == Variant::jdda_instance || v == Variant::jdda_center; }

std::string short_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc() ? std::string(buf, end) : std::to_string(v);
}

std::string format_lambda2(const std::optional<double>& l2) { return l2 ? short_double(*l2) : std::string(); }

std::string format_sig(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

/// Writes through a temporary file and renames it into place.
void write_atomically(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw RunFailure("cannot write " + tmp.string());
        out << content;
        if (!out) throw RunFailure("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string run_stem(const RunResult& r) {
    std::string name(to_string(r.method));
    if (r.lambda2) name += "_l2-" + short_double(*r.lambda2);
    return name + "_seed-" + std::to_string(r.seed);
}

struct Job {
    Variant method;
    std::optional<double> lambda2;
    std::uint64_t seed;
};

std::vector<Job> plan_jobs(const ExperimentSpec& spec) {
    std::vector<Job> jobs;
    for (Variant m : spec.methods) {
        std::vector<std::optional<double>> lambdas;
        if (!is_discriminative(m))
            lambdas.emplace_back(std::nullopt);
        else if (spec.sweep_lambda2.empty())
            lambdas.emplace_back(spec.lambda2_for(m));
        else
            lambdas.assign(spec.sweep_lambda2.begin(), spec.sweep_lambda2.end());
        for (const auto& l2 : lambdas)
            for (std::uint64_t seed : spec.seeds) jobs.push_back({m, l2, seed});
    }
    return jobs;
}

LabeledDataset load_idx_domain(const std::string& images, const std::string& labels, std::size_t limit,
                               const IdxTaskSpec& idx) {
    LabeledDataset ds = load_idx(images, labels.empty() ? std::nullopt : std::optional<std::string>(labels));
    ds = subsample(ds, limit, idx.subsample_seed);
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(ds.features.cols()))));
    if (side != idx.image_side) ds = resample_image(ds, idx.image_side);
    return ds;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (methods.empty()) throw ConfigError("config key 'methods': at least one method is required");
    if (seeds.empty()) throw ConfigError("config key 'seeds': at least one seed is required");
    for (double v : sweep_lambda2)
        if (v < 0.0) throw ConfigError("config key 'sweep_lambda2': values must be non-negative");
    if (lambda2_instance < 0.0 || lambda2_center < 0.0)
        throw ConfigError("config: lambda2 values must be non-negative");
    if (workers == 0) throw ConfigError("config key 'workers': must be >= 1");
    if (task.kind == TaskKind::idx && (task.idx.source_images.empty() || task.idx.source_labels.empty() ||
                                       task.idx.target_images.empty()))
        throw ConfigError("config: task 'idx' needs source_images, source_labels and target_images");
    try {
        TrainConfig probe = train;
        probe.lambda2 = 0.0;
        probe.validate();
        if (task.kind != TaskKind::idx) task.synthetic.validate();
        if (task.kind == TaskKind::moons && task.synthetic.class_count != 2)
            throw std::invalid_argument("task 'moons' needs classes = 2");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

double ExperimentSpec::lambda2_for(Variant method) const noexcept {
    if (train.lambda2) return *train.lambda2;
    return method == Variant::jdda_instance ? lambda2_instance : lambda2_center;
}

const AggregateCell* AggregateResult::find(Variant method, std::optional<double> lambda2) const {
    for (const auto& c : cells)
        if (c.method == method && (!lambda2 || c.lambda2 == lambda2)) return &c;
    return nullptr;
}

DomainPair load_task(const TaskSpec& task) {
    switch (task.kind) {
        case TaskKind::gaussians: return generate_shifted_gaussians(task.synthetic);
        case TaskKind::moons: return generate_shifted_moons(task.synthetic);
        case TaskKind::idx: {
            const auto& idx = task.idx;
            LabeledDataset source = load_idx_domain(idx.source_images, idx.source_labels, idx.source_limit, idx);
            LabeledDataset target = load_idx_domain(idx.target_images, idx.target_labels, idx.target_limit, idx);
            if (idx.target_labels.empty()) return {std::move(source), UnlabeledDataset(target.features, target.provenance)};
            const std::size_t classes = std::max(source.class_count, target.class_count);
            source.class_count = classes;
            return {std::move(source), UnlabeledDataset(std::move(target.features), std::move(target.labels),
                                                        classes, target.provenance)};
        }
    }
    throw ConfigError("unknown task kind");
}

TrainConfig config_for_run(const ExperimentSpec& spec, Variant method, std::uint64_t seed,
                           std::optional<double> lambda2) {
    TrainConfig c = spec.train;
    c.variant = method;
    c.seed = seed;
    c.lambda2 = lambda2.value_or(is_discriminative(method) ? spec.lambda2_for(method) : 0.0);
    return c;
}

AggregateCell aggregate(Variant method, std::optional<double> lambda2, std::span<const RunResult> runs) {
    AggregateCell cell;
    cell.method = method;
    cell.lambda2 = lambda2;
    double sum = 0.0, src = 0.0, compact = 0.0;
    for (const auto& r : runs) {
        if (r.method != method || r.lambda2 != lambda2) continue;
        cell.seeds.push_back(r.seed);
        cell.target_accuracy.push_back(r.target_accuracy);
        sum += r.target_accuracy;
        src += r.source_accuracy;
        compact += r.source_compactness;
    }
    const auto n = static_cast<double>(cell.seeds.size());
    if (cell.seeds.empty()) return cell;
    cell.mean_target_accuracy = sum / n;
    cell.mean_source_accuracy = src / n;
    cell.mean_source_compactness = compact / n;
    if (cell.seeds.size() >= 2) {
        double ss = 0.0;
        for (double a : cell.target_accuracy) ss += (a - cell.mean_target_accuracy) * (a - cell.mean_target_accuracy);
        cell.std_target_accuracy = std::sqrt(ss / (n - 1.0));
    }
    return cell;
}

AggregateResult run_experiment_in_memory(const ExperimentSpec& spec) {
    spec.validate();
    const DomainPair data = load_task(spec.task);
    const std::vector<Job> jobs = plan_jobs(spec);

    AggregateResult result;
    result.runs.resize(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            try {
                const TrainConfig config = config_for_run(spec, job.method, job.seed, job.lambda2);
                TrainResult trained = train(config, data.source, data.target);
                RunResult& r = result.runs[i];
                r.method = job.method;
                r.lambda2 = job.lambda2;
                r.seed = job.seed;
                r.target_accuracy = trained.report.final_target_accuracy;
                r.source_accuracy = trained.report.final_source_accuracy;
                r.seconds_per_iteration = trained.report.seconds_per_iteration;
                r.source_compactness = compactness_ratio(bottleneck_features(trained.params, data.source.features),
                                                         data.source.labels, data.source.class_count);
                r.report = std::move(trained.report);
                r.params = std::move(trained.params);
            } catch (const std::exception& e) {
                errors[i] = std::string(to_string(job.method)) + " seed " + std::to_string(job.seed) + ": " + e.what();
            }
        }
    };
    const std::size_t slots = std::min(spec.workers, jobs.size());
    if (slots <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < slots; ++w) pool.emplace_back(worker);
    }

    std::string failures;
    for (const auto& e : errors)
        if (!e.empty()) failures += (failures.empty() ? "" : "; ") + e;
    if (!failures.empty()) throw RunFailure("run failed: " + failures);

    for (const Job& job : jobs) {
        const bool seen = std::any_of(result.cells.begin(), result.cells.end(), [&](const AggregateCell& c) {
            return c.method == job.method && c.lambda2 == job.lambda2;
        });
        if (!seen) result.cells.push_back(aggregate(job.method, job.lambda2, result.runs));
    }
    return result;
}

void write_experiment_outputs(const ExperimentSpec& spec, const AggregateResult& result) {
    const fs::path dir(spec.output_dir);
    std::error_code ec;
    fs::create_directories(dir / "curves", ec);
    if (!ec) fs::create_directories(dir / "checkpoints", ec);
    if (ec) throw RunFailure("cannot create output directory " + dir.string() + ": " + ec.message());

    std::ostringstream runs;
    runs << "# jdda-runs v1\n";
    runs << "method,lambda2,seed,target_accuracy,source_accuracy,source_compactness\n";
    for (const auto& r : result.runs)
        runs << to_string(r.method) << ',' << format_lambda2(r.lambda2) << ',' << r.seed << ','
             << format_percent(r.target_accuracy) << ',' << format_percent(r.source_accuracy) << ','
             << format_sig(r.source_compactness) << '\n';
    write_atomically(dir / "runs.csv", runs.str());

    std::ostringstream agg;
    agg << "# jdda-aggregate v1\n";
    agg << "method,lambda2,seeds,mean_target_accuracy,std_target_accuracy,mean_source_accuracy,mean_source_compactness\n";
    for (const auto& c : result.cells)
        agg << to_string(c.method) << ',' << format_lambda2(c.lambda2) << ',' << c.seeds.size() << ','
            << format_percent(c.mean_target_accuracy) << ','
            << (c.std_target_accuracy ? format_percent(*c.std_target_accuracy) : std::string()) << ','
            << format_percent(c.mean_source_accuracy) << ',' << format_sig(c.mean_source_compactness) << '\n';
    write_atomically(dir / "aggregate.csv", agg.str());

    for (const auto& r : result.runs) {
        const fs::path curve = dir / "curves" / (run_stem(r) + ".csv");
        fs::path tmp = curve;
        tmp += ".tmp";
        write_report_csv(r.report, tmp.string());
        fs::rename(tmp, curve);
        std::ostringstream ckpt;
        save_checkpoint(r.params, ckpt);
        write_atomically(dir / "checkpoints" / (run_stem(r) + ".ckpt"), ckpt.str());
    }

    nlohmann::json summary;
    summary["format"] = "jdda-summary v1";
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    summary["generated_at"] = stamp;
    summary["output_dir"] = spec.output_dir;
    summary["iterations"] = spec.train.iterations;
    summary["batch_per_domain"] = spec.train.batch_per_domain;
    for (const auto& c : result.cells) {
        nlohmann::json cell;
        cell["method"] = std::string(to_string(c.method));
        cell["lambda2"] = c.lambda2 ? nlohmann::json(*c.lambda2) : nlohmann::json(nullptr);
        cell["seeds"] = c.seeds;
        cell["target_accuracy"] = c.target_accuracy;
        cell["mean_target_accuracy"] = c.mean_target_accuracy;
        cell["std_target_accuracy"] = c.std_target_accuracy ? nlohmann::json(*c.std_target_accuracy) : nlohmann::json(nullptr);
        cell["mean_source_accuracy"] = c.mean_source_accuracy;
        cell["mean_source_compactness"] = c.mean_source_compactness;
        summary["cells"].push_back(cell);
    }
    for (const auto& r : result.runs)
        summary["runs"].push_back({{"method", std::string(to_string(r.method))},
                                   {"lambda2", r.lambda2 ? nlohmann::json(*r.lambda2) : nlohmann::json(nullptr)},
                                   {"seed", r.seed},
                                   {"target_accuracy", r.target_accuracy},
                                   {"source_accuracy", r.source_accuracy},
                                   {"source_compactness", r.source_compactness},
                                   {"seconds_per_iteration", r.seconds_per_iteration}});
    write_atomically(dir / "summary.json", summary.dump(2) + "\n");
}

AggregateResult run_experiment(const ExperimentSpec& spec) {
    AggregateResult result = run_experiment_in_memory(spec);
    write_experiment_outputs(spec, result);
    return result;
}

// ---------------------------------------------------------------------------

double compactness_ratio(const Matrix& features, std::span<const int> labels, std::size_t class_count) {
    std::vector<std::size_t> counts;
    const Matrix means = batch_class_means(features, labels, class_count, counts);
    double intra = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i)
        intra += squared_distance(features.row(i), means.row(static_cast<std::size_t>(labels[i])));
    intra /= static_cast<double>(features.rows());

    double min_between = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < class_count; ++k)
        for (std::size_t l = k + 1; l < class_count; ++l)
            if (counts[k] && counts[l])
                min_between = std::min(min_between, squared_distance(means.row(k), means.row(l)));
    if (!std::isfinite(min_between)) return std::numeric_limits<double>::infinity();
    if (min_between == 0.0) return intra == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return intra / min_between;
}

Matrix bottleneck_features(const NetworkParams& params, const Matrix& inputs) {
    return forward(params, inputs).bottleneck();
}

namespace {

void append_rows(std::ostream& out, const char* domain, const Matrix& features, std::span<const int> labels) {
    for (std::size_t i = 0; i < features.rows(); ++i) {
        out << domain << ',' << (labels.empty() ? -1 : labels[i]);
        for (double v : features.row(i)) out << ',' << v;
        out << '\n';
    }
}

std::ostringstream feature_header(std::size_t dim) {
    std::ostringstream out;
    out << "domain,label";
    for (std::size_t k = 0; k < dim; ++k) out << ",feature_" << (k + 1);
    out << '\n';
    out.precision(10);
    return out;
}

}  // namespace

void dump_features(const NetworkParams& params, const LabeledDataset& source, const UnlabeledDataset& target,
                   const std::string& path) {
    auto out = feature_header(params.bottleneck_dim());
    append_rows(out, "source", bottleneck_features(params, source.features), source.labels);
    const Labels none;
    append_rows(out, "target", bottleneck_features(params, target.features()),
                target.has_held_out_labels() ? std::span<const int>(EvaluationAccess::labels(target))
                                             : std::span<const int>(none));
    write_atomically(path, out.str());
}

void dump_features(const NetworkParams& params, const LabeledDataset& dataset, const std::string& path) {
    auto out = feature_header(params.bottleneck_dim());
    append_rows(out, "source", bottleneck_features(params, dataset.features), dataset.labels);
    write_atomically(path, out.str());
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

}  // namespace jdda
