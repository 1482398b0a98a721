#include "jdda/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace jdda {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool uses_target(Variant v) { return v != Variant::source_only; }

struct Evaluated {
    ForwardTrace source;
    ForwardTrace target;
    JointLoss loss;
    StepMetrics metrics;
};

Evaluated evaluate_joint(const TrainState& state, const Matrix& source_batch,
                         std::span<const int> source_labels, const Matrix& target_batch,
                         const TrainConfig& config, double progress) {
    Evaluated e;
    e.source = forward(state.params, source_batch);
    if (uses_target(config.variant)) {
        if (target_batch.rows() != source_batch.rows())
            throw std::invalid_argument("train_step: source and target batches differ in size");
        e.target = forward(state.params, target_batch);
    }
    const LossWeights weights = config.loss_weights(progress);
    e.loss = joint_loss(e.source.logits, e.source.bottleneck(), e.target.bottleneck(), source_labels,
                        weights, config.variant, state.centers ? &*state.centers : nullptr);
    e.metrics = {e.loss.total.value, e.loss.source, e.loss.coral, e.loss.discriminative,
                 weights.lambda1};
    return e;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_per_domain == 0) throw std::invalid_argument("config: batch_per_domain must be >= 1");
    if (!(eta >= 0.0)) throw std::invalid_argument("config: eta must be >= 0");
    if (lambda1 < 0.0) throw std::invalid_argument("config: lambda1 must be >= 0");
    if (effective_lambda2() < 0.0) throw std::invalid_argument("config: lambda2 must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma must lie in (0, 1]");
    if (eval_interval == 0) throw std::invalid_argument("config: eval_interval must be >= 1");
    if (bottleneck_dim == 0) throw std::invalid_argument("config: bottleneck_dim must be >= 1");
    loss_weights(0.0).validate();
}

double TrainConfig::effective_lambda2() const noexcept {
    if (lambda2) return *lambda2;
    return variant == Variant::jdda_instance ? kDefaultLambda2Instance : kDefaultLambda2Center;
}

LossWeights TrainConfig::loss_weights(double progress) const {
    LossWeights w;
    w.lambda1 = lambda1 * lambda_schedule(progress, mu);
    w.lambda2 = effective_lambda2();
    w.alpha = alpha;
    w.beta = beta;
    w.m1 = m1;
    w.m2 = m2;
    return w;
}

double lambda_schedule(double progress, double mu) {
    if (!(progress >= 0.0 && progress <= 1.0))
        throw std::invalid_argument("lambda_schedule: progress must lie in [0, 1]");
    return 2.0 / (1.0 + std::exp(-mu * progress)) - 1.0;
}

OptimizerState OptimizerState::for_params(const NetworkParams& params, const OptimizerConfig& config) {
    OptimizerState s;
    if (config.kind == OptimizerKind::adam) {
        s.first = GradientSet::zeros_like(params);
        s.second = GradientSet::zeros_like(params);
    }
    return s;
}

void apply_update(NetworkParams& params, OptimizerState& state, const GradientSet& grads,
                  const OptimizerConfig& config, double eta) {
    ++state.step;
    auto layers = params.layers();
    if (config.kind == OptimizerKind::sgd) {
        for (std::size_t k = 0; k < layers.size(); ++k) {
            auto w = layers[k].weights.values();
            auto g = grads.weights[k].values();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * g[i];
            for (std::size_t j = 0; j < layers[k].bias.size(); ++j) layers[k].bias[j] -= eta * grads.bias[k][j];
        }
        return;
    }

    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto adam = [&](double& p, double& m, double& v, double g) {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        p -= eta * (m / c1) / (std::sqrt(v / c2) + config.epsilon);
    };
    for (std::size_t k = 0; k < layers.size(); ++k) {
        auto w = layers[k].weights.values();
        auto g = grads.weights[k].values();
        auto m = state.first.weights[k].values();
        auto v = state.second.weights[k].values();
        for (std::size_t i = 0; i < w.size(); ++i) adam(w[i], m[i], v[i], g[i]);
        auto& b = layers[k].bias;
        for (std::size_t j = 0; j < b.size(); ++j)
            adam(b[j], state.first.bias[k][j], state.second.bias[k][j], grads.bias[k][j]);
    }
}

StepMetrics evaluate_losses(const TrainState& state, const Matrix& source_batch,
                            std::span<const int> source_labels, const Matrix& target_batch,
                            const TrainConfig& config, double progress) {
    if (config.variant == Variant::jdda_center && !(state.centers && state.centers->initialized())) {
        TrainState probe = state;
        const ForwardTrace trace = forward(probe.params, source_batch);
        probe.centers = CenterState(probe.params.num_classes(), probe.params.bottleneck_dim(), config.gamma);
        probe.centers->update(trace.bottleneck(), source_labels);
        return evaluate_joint(probe, source_batch, source_labels, target_batch, config, progress).metrics;
    }
    return evaluate_joint(state, source_batch, source_labels, target_batch, config, progress).metrics;
}

StepMetrics train_step(TrainState& state, const Matrix& source_batch, std::span<const int> source_labels,
                       const Matrix& target_batch, const TrainConfig& config, double progress) {
    const bool center_variant = config.variant == Variant::jdda_center;
    if (center_variant && !state.centers)
        state.centers = CenterState(state.params.num_classes(), state.params.bottleneck_dim(), config.gamma);

    if (center_variant && !state.centers->initialized()) {
        const ForwardTrace trace = forward(state.params, source_batch);
        state.centers->update(trace.bottleneck(), source_labels);
    }
    const Evaluated e = evaluate_joint(state, source_batch, source_labels, target_batch, config, progress);

    GradientSet grads = backward(state.params, e.source, e.loss.total.grad_logits, e.loss.total.grad_source);
    if (uses_target(config.variant)) {
        const Matrix no_logit_grad(e.target.batch_size(), state.params.num_classes());
        grads += backward(state.params, e.target, no_logit_grad, e.loss.total.grad_target);
    }
    apply_update(state.params, state.optimizer, grads, config.optimizer, config.eta);
    if (center_variant) state.centers->update(e.source.bottleneck(), source_labels);
    return e.metrics;
}

std::vector<std::size_t> layer_sizes_for(const TrainConfig& config, std::size_t input_dim,
                                         std::size_t num_classes) {
    std::vector<std::size_t> sizes{input_dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(config.bottleneck_dim);
    sizes.push_back(num_classes);
    return sizes;
}

TrainResult train(const TrainConfig& config, const LabeledDataset& source, const UnlabeledDataset& target) {
    config.validate();
    source.validate();
    if (target.size() == 0) throw std::invalid_argument("train: target dataset is empty");
    if (target.features().cols() != source.features.cols())
        throw std::invalid_argument("train: source and target feature dimensions differ");
    if (target.has_held_out_labels() && target.class_count() != source.class_count)
        throw std::invalid_argument("train: target class count " + std::to_string(target.class_count()) +
                                    " differs from source class count " +
                                    std::to_string(source.class_count));
    const std::size_t batch = config.batch_per_domain;
    if (batch > source.size() || (uses_target(config.variant) && batch > target.size()))
        throw std::invalid_argument("train: batch_per_domain exceeds a dataset size");

    const auto sizes = layer_sizes_for(config, source.features.cols(), source.class_count);
    TrainState state{init_params(sizes, mix_seed(config.seed, 0)), {}, std::nullopt};
    state.optimizer = OptimizerState::for_params(state.params, config.optimizer);

    BatchSampler source_sampler(source.size(), batch, mix_seed(config.seed, 1));
    std::optional<BatchSampler> target_sampler;
    if (uses_target(config.variant)) target_sampler.emplace(target.size(), batch, mix_seed(config.seed, 2));

    // Fixed probe batches for loss curves, drawn from their own streams.
    const auto probe_src_idx = BatchSampler(source.size(), batch, mix_seed(config.seed, 3)).next();
    const Matrix probe_source = gather_rows(source.features, probe_src_idx);
    Labels probe_labels;
    for (std::size_t i : probe_src_idx) probe_labels.push_back(source.labels[i]);
    Matrix probe_target;
    if (uses_target(config.variant))
        probe_target = gather_rows(target.features(),
                                   BatchSampler(target.size(), batch, mix_seed(config.seed, 4)).next());

    TrainResult result;
    auto record = [&](std::size_t iteration) {
        const double progress = config.iterations == 0
                                    ? 0.0
                                    : static_cast<double>(iteration) / static_cast<double>(config.iterations);
        const StepMetrics m = evaluate_losses(state, probe_source, probe_labels, probe_target, config, progress);
        EvalRecord r;
        r.iteration = iteration;
        r.source_loss = m.source;
        r.coral_loss = m.coral;
        r.discriminative_loss = m.discriminative;
        r.lambda1 = m.lambda1;
        r.source_accuracy = evaluate(state.params, source).overall;
        r.target_accuracy = target.has_held_out_labels() ? evaluate(state.params, target).overall
                                                         : std::nan("");
        result.report.records.push_back(r);
    };

    record(0);
    const auto start = std::chrono::steady_clock::now();
    Labels batch_labels(batch);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto src_idx = source_sampler.next();
        const Matrix source_batch = gather_rows(source.features, src_idx);
        for (std::size_t i = 0; i < batch; ++i) batch_labels[i] = source.labels[src_idx[i]];
        Matrix target_batch;
        if (target_sampler) target_batch = gather_rows(target.features(), target_sampler->next());
        const double progress = static_cast<double>(it) / static_cast<double>(config.iterations);
        train_step(state, source_batch, batch_labels, target_batch, config, progress);

        const std::size_t done = it + 1;
        if (done % config.eval_interval == 0 || done == config.iterations) record(done);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    if (config.iterations > 0)
        result.report.seconds_per_iteration = elapsed.count() / static_cast<double>(config.iterations);

    result.report.final_source_accuracy = result.report.records.back().source_accuracy;
    result.report.final_target_accuracy = result.report.records.back().target_accuracy;
    result.params = std::move(state.params);
    result.centers = std::move(state.centers);
    return result;
}

}  // namespace jdda
