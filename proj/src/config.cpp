#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "jdda/experiment.hpp"

namespace jdda {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
    return parts;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const std::string t = trim(value);
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || end != t.data() + t.size() || !std::isfinite(v))
        bad_value(key, value, "a number");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const std::string t = trim(value);
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || end != t.data() + t.size())
        bad_value(key, value, "a non-negative integer");
    return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(to_u64(key, value));
}

template <class T, class Conv>
std::vector<T> to_list(const std::string& key, const std::string& value, Conv conv) {
    std::vector<T> out;
    if (trim(value).empty()) return out;
    for (const auto& part : split(value, ',')) out.push_back(conv(key, part));
    return out;
}

Matrix to_means(const std::string& key, const std::string& value) {
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    for (const auto& row : split(value, ';')) {
        if (row.empty()) continue;
        const auto entries = to_list<double>(key, row, to_double);
        if (cols == 0) cols = entries.size();
        if (entries.size() != cols || cols == 0) bad_value(key, value, "rows of equal length separated by ';'");
        values.insert(values.end(), entries.begin(), entries.end());
        ++rows;
    }
    return Matrix(rows, cols, std::move(values));
}

using Setter = std::function<void(ExperimentSpec&, const std::string& key, const std::string& value)>;

struct KeyInfo {
    std::string help;
    Setter set;
};

const std::map<std::string, KeyInfo>& key_table() {
    static const std::map<std::string, KeyInfo> table = [] {
        std::map<std::string, KeyInfo> t;
        auto add = [&](const char* name, const char* help, Setter s) { t.emplace(name, KeyInfo{help, std::move(s)}); };

        // experiment
        add("task", "gaussians | moons | idx", [](ExperimentSpec& e, const std::string& k, const std::string& v) {
            if (v == "gaussians") e.task.kind = TaskKind::gaussians;
            else if (v == "moons") e.task.kind = TaskKind::moons;
            else if (v == "idx") e.task.kind = TaskKind::idx;
            else bad_value(k, v, "gaussians, moons or idx");
        });
        add("methods", "comma list of source_only, coral_only, jdda_instance, jdda_center",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) {
                e.methods.clear();
                for (const auto& name : split(v, ',')) {
                    try {
                        e.methods.push_back(parse_variant(name));
                    } catch (const std::invalid_argument&) {
                        bad_value(k, v, "a list of method names");
                    }
                }
            });
        add("seeds", "comma list of run seeds (vary initialization and batch order)",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.seeds = to_list<std::uint64_t>(k, v, to_u64); });
        add("output_dir", "directory for CSV/JSON outputs",
            [](ExperimentSpec& e, const std::string&, const std::string& v) { e.output_dir = v; });
        add("workers", "parallel run slots", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.workers = to_size(k, v); });
        add("sweep_lambda2", "comma list of lambda2 values for the discriminative methods",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.sweep_lambda2 = to_list<double>(k, v, to_double); });

        // training
        add("iterations", "training iterations", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.iterations = to_size(k, v); });
        add("batch_per_domain", "samples per domain per iteration", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.batch_per_domain = to_size(k, v); });
        add("eta", "learning rate", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.eta = to_double(k, v); });
        add("optimizer", "adam | sgd", [](ExperimentSpec& e, const std::string& k, const std::string& v) {
            if (v == "adam") e.train.optimizer.kind = OptimizerKind::adam;
            else if (v == "sgd") e.train.optimizer.kind = OptimizerKind::sgd;
            else bad_value(k, v, "adam or sgd");
        });
        add("adam_beta1", "first-moment decay", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.optimizer.beta1 = to_double(k, v); });
        add("adam_beta2", "second-moment decay", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.optimizer.beta2 = to_double(k, v); });
        add("adam_epsilon", "denominator offset", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.optimizer.epsilon = to_double(k, v); });
        add("lambda1", "base CORAL weight (scaled by the progressive schedule)", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.lambda1 = to_double(k, v); });
        add("lambda2", "discriminative weight for every method (overrides the per-method defaults)",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.lambda2 = to_double(k, v); });
        add("lambda2_instance", "discriminative weight of jdda_instance", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.lambda2_instance = to_double(k, v); });
        add("lambda2_center", "discriminative weight of jdda_center", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.lambda2_center = to_double(k, v); });
        add("mu", "schedule sharpness", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.mu = to_double(k, v); });
        add("gamma", "global center learning rate", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.gamma = to_double(k, v); });
        add("alpha", "instance loss intra/inter balance", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.alpha = to_double(k, v); });
        add("beta", "center loss intra weight", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.beta = to_double(k, v); });
        add("m1", "intra-class margin", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.m1 = to_double(k, v); });
        add("m2", "inter-class margin", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.m2 = to_double(k, v); });
        add("eval_interval", "iterations between report records", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.eval_interval = to_size(k, v); });
        add("hidden", "comma list of hidden widths before the bottleneck",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.hidden = to_list<std::size_t>(k, v, to_size); });
        add("bottleneck_dim", "bottleneck width L", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.train.bottleneck_dim = to_size(k, v); });

        // synthetic task
        add("classes", "synthetic class count", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.class_count = to_size(k, v); });
        add("dim", "synthetic input dimension", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.dim = to_size(k, v); });
        add("source_per_class", "synthetic source samples per class", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.source_per_class = to_size(k, v); });
        add("target_per_class", "synthetic target samples per class", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.target_per_class = to_size(k, v); });
        add("means", "class means, rows separated by ';' (empty = circle of `radius`)",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.means = to_means(k, v); });
        add("radius", "circle radius for default means", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.radius = to_double(k, v); });
        add("spread", "blob standard deviation (one value or one per axis)",
            [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.spread = to_list<double>(k, v, to_double); });
        add("rotation_deg", "target rotation in degrees", [](ExperimentSpec& e, const std::string& k, const std::string& v) {
            e.task.synthetic.rotation = to_double(k, v) * std::numbers::pi / 180.0;
        });
        add("translation", "target translation vector", [](ExperimentSpec& e, const std::string& k, const std::string& v) {
            e.task.synthetic.translation = to_list<double>(k, v, to_double);
        });
        add("scale", "target scale factor", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.scale = to_double(k, v); });
        add("noise", "isotropic noise added to every generated point", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.noise = to_double(k, v); });
        add("data_seed", "seed of the synthetic generator", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.synthetic.seed = to_u64(k, v); });

        // idx task
        add("source_images", "IDX images of the source domain", [](ExperimentSpec& e, const std::string&, const std::string& v) { e.task.idx.source_images = v; });
        add("source_labels", "IDX labels of the source domain", [](ExperimentSpec& e, const std::string&, const std::string& v) { e.task.idx.source_labels = v; });
        add("target_images", "IDX images of the target domain", [](ExperimentSpec& e, const std::string&, const std::string& v) { e.task.idx.target_images = v; });
        add("target_labels", "IDX labels of the target domain (evaluation only)", [](ExperimentSpec& e, const std::string&, const std::string& v) { e.task.idx.target_labels = v; });
        add("source_limit", "source subsample size (0 = all)", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.idx.source_limit = to_size(k, v); });
        add("target_limit", "target subsample size (0 = all)", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.idx.target_limit = to_size(k, v); });
        add("subsample_seed", "seed of the IDX subsample", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.idx.subsample_seed = to_u64(k, v); });
        add("image_side", "images are resampled to this side length", [](ExperimentSpec& e, const std::string& k, const std::string& v) { e.task.idx.image_side = to_size(k, v); });
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys = [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [name, info] : key_table()) out.emplace_back(name, info.help);
        return out;
    }();
    return keys;
}

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
    ConfigMap values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string content = trim(line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        const std::string where = origin + ":" + std::to_string(line_no);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(std::string_view(content).substr(0, eq));
        if (!key_table().contains(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
        values[key] = trim(std::string_view(content).substr(eq + 1));
    }
    return values;
}

ConfigMap read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

ConfigMap merge_config(ConfigMap base, const ConfigMap& overrides) {
    for (const auto& [k, v] : overrides) base[k] = v;
    return base;
}

ExperimentSpec resolve_config(const ConfigMap& values) {
    ExperimentSpec spec;
    for (const auto& [key, value] : values) {
        const auto it = key_table().find(key);
        if (it == key_table().end()) throw ConfigError("unknown config key '" + key + "'");
        it->second.set(spec, key, value);
    }
    spec.validate();
    return spec;
}

ExperimentSpec parse_config(const std::optional<std::string>& path, const ConfigMap& flags) {
    ConfigMap values = path ? read_config_file(*path) : ConfigMap{};
    for (const auto& [k, v] : flags)
        if (!key_table().contains(k)) throw ConfigError("unknown config key '" + k + "'");
    return resolve_config(merge_config(std::move(values), flags));
}

}  // namespace jdda
