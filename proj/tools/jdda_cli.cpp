// jdda: run, sweep and inspect domain adaptation experiments.
//
// Exit codes: 0 success, 1 configuration error, 2 run failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "jdda/experiment.hpp"
#include "jdda/gradcheck.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;

const std::vector<double> kDefaultSweep{0.0001, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0};

struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    // Every config key becomes a --key option on `cmd`.
    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "config file (key = value lines)");
        for (const auto& [key, help] : jdda::config_keys())
            cmd->add_option("--" + key, values[key], help);
    }

    jdda::ExperimentSpec resolve() const {
        jdda::ConfigMap flags;
        for (const auto& [k, v] : values)
            if (!v.empty()) flags[k] = v;
        const std::optional<std::string> path =
            config_path.empty() ? std::nullopt : std::optional<std::string>(config_path);
        return jdda::parse_config(path, flags);
    }
};

void print_cells(const jdda::AggregateResult& result) {
    std::printf("%-14s %8s %6s %10s %8s %10s %12s\n", "method", "lambda2", "seeds", "target%", "std", "source%",
                "compactness");
    for (const auto& c : result.cells) {
        const std::string l2 = c.lambda2 ? std::to_string(*c.lambda2).substr(0, 7) : "-";
        const std::string sd = c.std_target_accuracy ? jdda::format_percent(*c.std_target_accuracy) : "-";
        std::printf("%-14s %8s %6zu %10s %8s %10s %12.5g\n", std::string(jdda::to_string(c.method)).c_str(),
                    l2.c_str(), c.seeds.size(), jdda::format_percent(c.mean_target_accuracy).c_str(), sd.c_str(),
                    jdda::format_percent(c.mean_source_accuracy).c_str(), c.mean_source_compactness);
    }
}

int run_verb(jdda::ExperimentSpec spec) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = jdda::run_experiment(spec);
    print_cells(result);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("wrote %s (%.1f s)\n", spec.output_dir.c_str(), secs);
    return 0;
}

int dump_verb(const jdda::ExperimentSpec& spec, const std::string& method, std::uint64_t seed,
              const std::string& out) {
    const jdda::Variant variant = jdda::parse_variant(method);
    const jdda::DomainPair data = jdda::load_task(spec.task);
    const jdda::TrainConfig config = jdda::config_for_run(spec, variant, seed, std::nullopt);
    const jdda::TrainResult trained = jdda::train(config, data.source, data.target);
    jdda::dump_features(trained.params, data.source, data.target, out);
    const double ratio = jdda::compactness_ratio(jdda::bottleneck_features(trained.params, data.source.features),
                                                 data.source.labels, data.source.class_count);
    std::printf("%s seed %llu: target %s%%, source compactness %.6g, features -> %s\n", method.c_str(),
                static_cast<unsigned long long>(seed),
                jdda::format_percent(trained.report.final_target_accuracy).c_str(), ratio, out.c_str());
    return 0;
}

int gradcheck_verb(const jdda::GradCheckOptions& options) {
    bool ok = true;
    for (const auto& r : jdda::run_gradient_suite(options)) {
        std::printf("%-30s instances=%zu entries=%zu max_rel_error=%.3e %s\n", r.name.c_str(), r.instances, r.entries,
                    r.max_rel_error, r.passed() ? "ok" : "FAILED");
        ok = ok && r.passed();
    }
    return ok ? 0 : kExitRun;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint domain alignment and discriminative feature learning experiments"};
    app.require_subcommand(1);

    ConfigFlags run_flags, sweep_flags, dump_flags;
    auto* run = app.add_subcommand("run", "train every method and seed, write metrics");
    run_flags.attach(run);

    auto* sweep = app.add_subcommand("sweep", "lambda2 sweep; baselines without a lambda2 run once per seed");
    sweep_flags.attach(sweep);

    auto* dump = app.add_subcommand("dump-features", "train one run and write its bottleneck features as CSV");
    dump_flags.attach(dump);
    std::string dump_method = "jdda_center";
    std::uint64_t dump_seed = 1;
    std::string dump_out = "features.csv";
    dump->add_option("--method", dump_method, "method to train");
    dump->add_option("--seed", dump_seed, "training seed");
    dump->add_option("-o,--out", dump_out, "output CSV path");

    auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
    jdda::GradCheckOptions grad_options;
    grad->add_option("--instances", grad_options.instances, "random instances per check");
    grad->add_option("--seed", grad_options.seed, "seed");
    grad->add_option("--tolerance", grad_options.tolerance, "max relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return run_verb(run_flags.resolve());
        if (*sweep) {
            jdda::ExperimentSpec spec = sweep_flags.resolve();
            if (spec.sweep_lambda2.empty()) spec.sweep_lambda2 = kDefaultSweep;
            return run_verb(spec);
        }
        if (*dump) return dump_verb(dump_flags.resolve(), dump_method, dump_seed, dump_out);
        if (*grad) return gradcheck_verb(grad_options);
    } catch (const jdda::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return kExitRun;
    }
    return 0;
}
