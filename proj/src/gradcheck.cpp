#include "jdda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "jdda/losses.hpp"
#include "jdda/model.hpp"
#include "jdda/numerics.hpp"

namespace jdda {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform_count(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd) {
    std::normal_distribution<double> n01(0.0, sd);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = n01(rng);
    return m;
}

Labels random_labels(Rng& rng, std::size_t n, std::size_t classes) {
    Labels y(n);
    for (int& v : y) v = static_cast<int>(uniform_count(rng, 0, classes - 1));
    return y;
}

LossWeights random_weights(Rng& rng) {
    LossWeights w;
    w.lambda1 = uniform(rng, 0.1, 1.0);
    w.lambda2 = uniform(rng, 0.05, 0.5);
    w.alpha = uniform(rng, 0.5, 2.0);
    w.beta = uniform(rng, 0.5, 2.0);
    w.m1 = uniform(rng, 0.0, 0.5);
    w.m2 = uniform(rng, 0.5, 4.0);
    return w;
}

// Smallest distance of any hinge or norm argument to its kink.
double instance_min_slack(const Matrix& h, std::span<const int> labels, const LossWeights& w) {
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = i + 1; j < h.rows(); ++j) {
            const double d = std::sqrt(squared_distance(h.row(i), h.row(j)));
            slack = std::min(slack, d);
            slack = std::min(slack, labels[i] == labels[j] ? std::abs(d - w.m1) : std::abs(w.m2 - d));
        }
    return slack;
}

double center_min_slack(const Matrix& h, std::span<const int> labels, const Matrix& centers,
                        const LossWeights& w) {
    double slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h.rows(); ++i)
        slack = std::min(slack, std::abs(squared_distance(h.row(i), centers.row(labels[i])) - w.m1));
    std::vector<std::size_t> counts;
    const Matrix means = batch_class_means(h, labels, centers.rows(), counts);
    for (std::size_t k = 0; k < centers.rows(); ++k)
        for (std::size_t l = k + 1; l < centers.rows(); ++l)
            if (counts[k] && counts[l])
                slack = std::min(slack, std::abs(w.m2 - squared_distance(means.row(k), means.row(l))));
    return slack;
}

void compare(GradCheckReport& report, const Matrix& analytic, const Matrix& numeric) {
    auto a = analytic.values();
    auto n = numeric.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        report.max_rel_error = std::max(report.max_rel_error, relative_error(a[i], n[i]));
        ++report.entries;
    }
}

GradCheckReport make_report(const char* name, const GradCheckOptions& options) {
    GradCheckReport r;
    r.name = name;
    r.tolerance = options.tolerance;
    return r;
}

}  // namespace

double relative_error(double analytic, double numeric) noexcept {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

Matrix numeric_gradient(const std::function<double()>& f, std::span<double> x, std::size_t rows,
                        std::size_t cols, double step) {
    Matrix g(rows, cols);
    auto gv = g.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double up = f();
        x[i] = saved - step;
        const double down = f();
        x[i] = saved;
        gv[i] = (up - down) / (2.0 * step);
    }
    return g;
}

GradCheckReport check_softmax_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed ^ 0x50F7);
    auto report = make_report("source_softmax_loss", options);
    for (std::size_t t = 0; t < options.instances; ++t) {
        const std::size_t b = uniform_count(rng, 1, 8);
        const std::size_t c = uniform_count(rng, 2, 4);
        Matrix logits = normal_matrix(rng, b, c, 2.0);
        const Labels y = random_labels(rng, b, c);
        const LossValue analytic = source_softmax_loss(logits, y);
        const Matrix numeric = numeric_gradient([&] { return source_softmax_loss(logits, y).value; },
                                                logits.values(), b, c, options.step);
        compare(report, analytic.grad_logits, numeric);
        ++report.instances;
    }
    return report;
}

GradCheckReport check_coral_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed ^ 0xC0A1);
    auto report = make_report("coral_loss", options);
    for (std::size_t t = 0; t < options.instances; ++t) {
        const std::size_t b = uniform_count(rng, 2, 8);
        const std::size_t dim = uniform_count(rng, 1, 6);
        Matrix hs = normal_matrix(rng, b, dim, 1.0);
        Matrix ht = normal_matrix(rng, b, dim, 1.5);
        const LossValue analytic = coral_loss(hs, ht);
        auto f = [&] { return coral_loss(hs, ht).value; };
        compare(report, analytic.grad_source, numeric_gradient(f, hs.values(), b, dim, options.step));
        compare(report, analytic.grad_target, numeric_gradient(f, ht.values(), b, dim, options.step));
        ++report.instances;
    }
    return report;
}

GradCheckReport check_instance_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed ^ 0x1257);
    auto report = make_report("instance_discriminative_loss", options);
    while (report.instances < options.instances) {
        const std::size_t b = uniform_count(rng, 2, 8);
        const std::size_t dim = uniform_count(rng, 1, 6);
        const std::size_t c = uniform_count(rng, 2, 4);
        Matrix h = normal_matrix(rng, b, dim, 1.0);
        const Labels y = random_labels(rng, b, c);
        const LossWeights w = random_weights(rng);
        if (instance_min_slack(h, y, w) <= options.kink_margin) continue;
        const LossValue analytic = instance_discriminative_loss(h, y, w);
        const Matrix numeric = numeric_gradient(
            [&] { return instance_discriminative_loss(h, y, w).value; }, h.values(), b, dim, options.step);
        compare(report, analytic.grad_source, numeric);
        ++report.instances;
    }
    return report;
}

GradCheckReport check_center_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed ^ 0xCE47);
    auto report = make_report("center_discriminative_loss", options);
    while (report.instances < options.instances) {
        const std::size_t b = uniform_count(rng, 2, 8);
        const std::size_t dim = uniform_count(rng, 1, 6);
        const std::size_t c = uniform_count(rng, 2, 4);
        Matrix h = normal_matrix(rng, b, dim, 1.0);
        const Labels y = random_labels(rng, b, c);
        const LossWeights w = random_weights(rng);
        const CenterState centers = CenterState::from_centers(normal_matrix(rng, c, dim, 1.0), 0.5);
        if (center_min_slack(h, y, centers.centers(), w) <= options.kink_margin) continue;
        const LossValue analytic = center_discriminative_loss(h, y, centers, w);
        const Matrix numeric = numeric_gradient(
            [&] { return center_discriminative_loss(h, y, centers, w).value; }, h.values(), b, dim,
            options.step);
        compare(report, analytic.grad_source, numeric);
        ++report.instances;
    }
    return report;
}

GradCheckReport check_network_gradients(const GradCheckOptions& options) {
    Rng rng(options.seed ^ 0x4E7);
    auto report = make_report("network_backprop", options);
    constexpr Variant variants[] = {Variant::source_only, Variant::coral_only, Variant::jdda_instance,
                                    Variant::jdda_center};
    while (report.instances < options.instances) {
        std::vector<std::size_t> sizes{uniform_count(rng, 1, 4)};
        if (uniform_count(rng, 0, 1) == 1) sizes.push_back(uniform_count(rng, 2, 8));
        sizes.push_back(uniform_count(rng, 1, 4));  // bottleneck
        const std::size_t c = uniform_count(rng, 2, 4);
        sizes.push_back(c);
        NetworkParams params = init_params(sizes, rng());
        for (auto& layer : params.layers())
            for (double& v : layer.bias) v = uniform(rng, -0.5, 0.5);

        const std::size_t b = uniform_count(rng, 2, 6);
        const Matrix xs = normal_matrix(rng, b, sizes.front(), 1.0);
        const Matrix xt = normal_matrix(rng, b, sizes.front(), 1.3);
        const Labels y = random_labels(rng, b, c);
        const LossWeights w = random_weights(rng);
        const Variant variant = variants[report.instances % 4];
        const std::size_t dim = params.bottleneck_dim();
        const CenterState centers = CenterState::from_centers(normal_matrix(rng, c, dim, 1.0), 0.5);

        const ForwardTrace ts = forward(params, xs);
        const ForwardTrace tt = forward(params, xt);
        bool near_kink = false;
        for (const ForwardTrace* tr : {&ts, &tt})
            for (std::size_t k = 0; k + 1 < tr->pre_activations.size(); ++k)
                for (double z : tr->pre_activations[k].values())
                    near_kink = near_kink || std::abs(z) <= options.kink_margin;
        if (variant == Variant::jdda_instance)
            near_kink = near_kink || instance_min_slack(ts.bottleneck(), y, w) <= options.kink_margin;
        if (variant == Variant::jdda_center)
            near_kink = near_kink || center_min_slack(ts.bottleneck(), y, centers.centers(), w) <= options.kink_margin;
        if (near_kink) continue;

        auto total = [&] {
            const ForwardTrace s = forward(params, xs);
            const ForwardTrace t = forward(params, xt);
            return joint_loss(s.logits, s.bottleneck(), t.bottleneck(), y, w, variant, &centers).total.value;
        };
        const JointLoss loss = joint_loss(ts.logits, ts.bottleneck(), tt.bottleneck(), y, w, variant, &centers);
        GradientSet analytic = backward(params, ts, loss.total.grad_logits, loss.total.grad_source);
        if (variant != Variant::source_only)
            analytic += backward(params, tt, Matrix(b, c), loss.total.grad_target);

        auto layers = params.layers();
        for (std::size_t k = 0; k < layers.size(); ++k) {
            auto& layer = layers[k];
            compare(report, analytic.weights[k],
                    numeric_gradient(total, layer.weights.values(), layer.in_dim(), layer.out_dim(), options.step));
            const Matrix bias_numeric = numeric_gradient(total, layer.bias, 1, layer.out_dim(), options.step);
            compare(report, Matrix(1, layer.out_dim(), analytic.bias[k]), bias_numeric);
        }
        ++report.instances;
    }
    return report;
}

std::vector<GradCheckReport> run_gradient_suite(const GradCheckOptions& options) {
    return {check_softmax_gradients(options), check_coral_gradients(options),
            check_instance_gradients(options), check_center_gradients(options),
            check_network_gradients(options)};
}

}  // namespace jdda
