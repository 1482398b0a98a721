#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "jdda/data.hpp"
#include "jdda/trainer.hpp"

using jdda::Labels;
using jdda::Matrix;
using jdda::TrainConfig;
using jdda::Variant;

namespace {

jdda::DomainPair small_task(std::uint64_t seed = 3) {
    jdda::SyntheticShiftSpec spec;
    spec.class_count = 3;
    spec.source_per_class = 30;
    spec.target_per_class = 30;
    spec.rotation = 0.5;
    spec.seed = seed;
    return jdda::generate_shifted_gaussians(spec);
}

TrainConfig small_config(Variant v) {
    TrainConfig c;
    c.variant = v;
    c.batch_per_domain = 16;
    c.iterations = 30;
    c.eta = 1e-3;
    c.hidden = {8};
    c.bottleneck_dim = 4;
    c.eval_interval = 10;
    c.seed = 5;
    c.lambda1 = 0.1;
    c.m2 = 4.0;
    return c;
}

jdda::TrainState fresh_state(const TrainConfig& c, std::size_t in, std::size_t classes, std::uint64_t seed) {
    jdda::TrainState s{jdda::init_params(jdda::layer_sizes_for(c, in, classes), seed), {}, std::nullopt};
    s.optimizer = jdda::OptimizerState::for_params(s.params, c.optimizer);
    return s;
}

struct Batches {
    Matrix source, target;
    Labels labels;
};

Batches first_batches(const jdda::DomainPair& d, std::size_t b) {
    std::vector<std::size_t> idx(b);
    for (std::size_t i = 0; i < b; ++i) idx[i] = i * (d.source.size() / b);
    Batches out{jdda::gather_rows(d.source.features, idx), jdda::gather_rows(d.target.features(), idx), {}};
    for (std::size_t i : idx) out.labels.push_back(d.source.labels[i]);
    return out;
}

}  // namespace

TEST(LambdaSchedule, Values) {
    EXPECT_EQ(jdda::lambda_schedule(0.0, 10.0), 0.0);
    EXPECT_NEAR(jdda::lambda_schedule(1.0, 10.0), 2.0 / (1.0 + std::exp(-10.0)) - 1.0, 1e-15);
    EXPECT_NEAR(jdda::lambda_schedule(1.0, 10.0), 0.999909, 1e-6);
    EXPECT_NEAR(jdda::lambda_schedule(0.5, 10.0), 0.986614, 1e-6);
}

TEST(LambdaSchedule, MonotoneAndBounded) {
    double prev = -1.0;
    for (int i = 0; i <= 1000; ++i) {
        const double v = jdda::lambda_schedule(i / 1000.0, 10.0);
        EXPECT_GE(v, prev);
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        prev = v;
    }
    EXPECT_THROW(jdda::lambda_schedule(-0.1, 10.0), std::invalid_argument);
    EXPECT_THROW(jdda::lambda_schedule(1.1, 10.0), std::invalid_argument);
}

TEST(TrainConfig, DefaultsAndValidation) {
    TrainConfig c;
    EXPECT_EQ(c.batch_per_domain, 128u);
    EXPECT_EQ(c.eta, 1e-4);
    EXPECT_EQ(c.gamma, 0.5);
    EXPECT_EQ(c.m1, 0.0);
    EXPECT_EQ(c.m2, 100.0);
    EXPECT_EQ(c.mu, 10.0);
    c.variant = Variant::jdda_instance;
    EXPECT_EQ(c.effective_lambda2(), 0.03);
    c.variant = Variant::jdda_center;
    EXPECT_EQ(c.effective_lambda2(), 0.01);
    EXPECT_NO_THROW(c.validate());
    c.gamma = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch_per_domain = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.lambda2 = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainConfig, LambdaOneFollowsSchedule) {
    TrainConfig c;
    c.lambda1 = 0.5;
    EXPECT_EQ(c.loss_weights(0.0).lambda1, 0.0);
    EXPECT_NEAR(c.loss_weights(1.0).lambda1, 0.5 * jdda::lambda_schedule(1.0, 10.0), 1e-15);
    EXPECT_EQ(c.loss_weights(0.3).lambda2, c.loss_weights(0.9).lambda2);
}

TEST(TrainStep, ZeroWeightsReduceToSoftmaxStep) {
    const auto data = small_task();
    TrainConfig c = small_config(Variant::jdda_instance);
    c.optimizer.kind = jdda::OptimizerKind::sgd;
    c.lambda1 = 0.0;
    c.lambda2 = 0.0;
    const auto b = first_batches(data, 16);
    auto state = fresh_state(c, 2, 3, 9);

    // Manual softmax-classifier SGD step.
    jdda::NetworkParams expected = state.params;
    const auto trace = jdda::forward(expected, b.source);
    const auto g = jdda::backward(expected, trace, jdda::source_softmax_loss(trace.logits, b.labels).grad_logits,
                                  Matrix());
    for (std::size_t k = 0; k < expected.layers().size(); ++k) {
        auto w = expected.layers()[k].weights.values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c.eta * g.weights[k].values()[i];
        for (std::size_t j = 0; j < expected.layers()[k].bias.size(); ++j)
            expected.layers()[k].bias[j] -= c.eta * g.bias[k][j];
    }
    jdda::train_step(state, b.source, b.labels, b.target, c, 0.5);
    for (std::size_t k = 0; k < expected.layers().size(); ++k) {
        auto got = state.params.layers()[k].weights.values();
        auto want = expected.layers()[k].weights.values();
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
    }
}

TEST(TrainStep, ZeroLearningRateStillMovesCenters) {
    const auto data = small_task();
    TrainConfig c = small_config(Variant::jdda_center);
    c.eta = 0.0;
    const auto b = first_batches(data, 16);
    auto state = fresh_state(c, 2, 3, 9);
    const auto before = state.params;
    jdda::train_step(state, b.source, b.labels, b.target, c, 0.2);
    EXPECT_EQ(state.params, before);
    ASSERT_TRUE(state.centers);
    const Matrix after_first = state.centers->centers();

    // Shift the features so the batch mean differs from the centers, then step again.
    Matrix shifted = b.source;
    for (double& v : shifted.values()) v += 1.0;
    jdda::train_step(state, shifted, b.labels, b.target, c, 0.3);
    EXPECT_EQ(state.params, before);
    EXPECT_NE(state.centers->centers(), after_first);
}

TEST(TrainStep, DeterministicAcrossRuns) {
    const auto data = small_task();
    for (Variant v : {Variant::source_only, Variant::coral_only, Variant::jdda_instance, Variant::jdda_center}) {
        const TrainConfig c = small_config(v);
        const auto b = first_batches(data, 16);
        auto s1 = fresh_state(c, 2, 3, 4), s2 = fresh_state(c, 2, 3, 4);
        for (int i = 0; i < 5; ++i) {
            jdda::train_step(s1, b.source, b.labels, b.target, c, i / 5.0);
            jdda::train_step(s2, b.source, b.labels, b.target, c, i / 5.0);
        }
        EXPECT_EQ(s1.params, s2.params) << jdda::to_string(v);
    }
}

TEST(TrainStep, RepeatedSgdStepsDecreaseLossOnFixedBatch) {
    const auto data = small_task();
    for (Variant v : {Variant::source_only, Variant::coral_only, Variant::jdda_instance, Variant::jdda_center}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            TrainConfig c = small_config(v);
            c.optimizer.kind = jdda::OptimizerKind::sgd;
            c.eta = 1e-3;
            c.lambda2 = 0.01;
            const auto b = first_batches(data, 16);
            auto state = fresh_state(c, 2, 3, seed);
            double prev = jdda::evaluate_losses(state, b.source, b.labels, b.target, c, 1.0).total;
            for (int i = 0; i < 10; ++i) {
                jdda::train_step(state, b.source, b.labels, b.target, c, 1.0);
                const double now = jdda::evaluate_losses(state, b.source, b.labels, b.target, c, 1.0).total;
                EXPECT_LT(now, prev) << jdda::to_string(v) << " seed " << seed << " step " << i;
                prev = now;
            }
        }
    }
}

TEST(TrainStep, CentersStayBounded) {
    const auto data = small_task();
    TrainConfig c = small_config(Variant::jdda_center);
    auto state = fresh_state(c, 2, 3, 2);
    jdda::BatchSampler sampler(data.source.size(), 16, 1);
    auto row_norm = [](std::span<const double> r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return std::sqrt(s);
    };
    double max_feature = 0.0, initial_center = -1.0;
    for (int it = 0; it < 60; ++it) {
        const auto idx = sampler.next();
        const Matrix xs = jdda::gather_rows(data.source.features, idx);
        Labels y;
        for (std::size_t i : idx) y.push_back(data.source.labels[i]);
        const Matrix h = jdda::forward(state.params, xs).bottleneck();
        for (std::size_t i = 0; i < h.rows(); ++i) max_feature = std::max(max_feature, row_norm(h.row(i)));
        jdda::train_step(state, xs, y, jdda::gather_rows(data.target.features(), idx), c, it / 60.0);
        const Matrix& centers = state.centers->centers();
        if (initial_center < 0.0)
            for (std::size_t j = 0; j < centers.rows(); ++j) initial_center = std::max(initial_center, row_norm(centers.row(j)));
        ASSERT_TRUE(jdda::all_finite(centers));
        for (std::size_t j = 0; j < centers.rows(); ++j)
            EXPECT_LE(row_norm(centers.row(j)), std::max(max_feature, initial_center) + 1.0);
    }
}

TEST(Optimizer, AdamFirstStepMovesByEta) {
    jdda::NetworkParams p = jdda::init_params(std::vector<std::size_t>{2, 3, 2, 2}, 1);
    const auto before = p;
    jdda::OptimizerConfig cfg;
    auto state = jdda::OptimizerState::for_params(p, cfg);
    auto g = jdda::GradientSet::zeros_like(p);
    g.weights[0](0, 0) = 0.37;
    g.weights[1](1, 0) = -12.0;
    jdda::apply_update(p, state, g, cfg, 0.01);
    // Bias-corrected first step is eta·sign(g) up to epsilon.
    EXPECT_NEAR(p.layers()[0].weights(0, 0), before.layers()[0].weights(0, 0) - 0.01, 1e-9);
    EXPECT_NEAR(p.layers()[1].weights(1, 0), before.layers()[1].weights(1, 0) + 0.01, 1e-9);
    EXPECT_EQ(p.layers()[2].weights, before.layers()[2].weights);
}

TEST(Train, ReportShapeAndMonotoneSchedule) {
    const auto data = small_task();
    const auto r = jdda::train(small_config(Variant::jdda_center), data.source, data.target);
    const auto& recs = r.report.records;
    ASSERT_EQ(recs.size(), 4u);  // 0, 10, 20, 30
    for (std::size_t i = 1; i < recs.size(); ++i) {
        EXPECT_GT(recs[i].iteration, recs[i - 1].iteration);
        EXPECT_GE(recs[i].lambda1, recs[i - 1].lambda1);
    }
    EXPECT_EQ(recs.front().lambda1, 0.0);
    EXPECT_GT(r.report.seconds_per_iteration, 0.0);
    EXPECT_EQ(r.report.final_target_accuracy, recs.back().target_accuracy);
}

TEST(Train, ZeroIterationsGivesOnlyInitialRecord) {
    const auto data = small_task();
    TrainConfig c = small_config(Variant::jdda_center);
    c.iterations = 0;
    const auto r = jdda::train(c, data.source, data.target);
    ASSERT_EQ(r.report.records.size(), 1u);
    EXPECT_EQ(r.report.records[0].iteration, 0u);
}

TEST(Train, DeterministicReports) {
    const auto data = small_task();
    for (Variant v : {Variant::source_only, Variant::jdda_instance, Variant::jdda_center}) {
        const auto a = jdda::train(small_config(v), data.source, data.target);
        const auto b = jdda::train(small_config(v), data.source, data.target);
        EXPECT_EQ(a.params, b.params);
        ASSERT_EQ(a.report.records.size(), b.report.records.size());
        for (std::size_t i = 0; i < a.report.records.size(); ++i) {
            EXPECT_EQ(a.report.records[i].source_loss, b.report.records[i].source_loss);
            EXPECT_EQ(a.report.records[i].target_accuracy, b.report.records[i].target_accuracy);
        }
    }
}

TEST(Train, SourceOnlyIgnoresTargetFeatures) {
    const auto data = small_task();
    Matrix scrambled = data.target.features();
    for (double& v : scrambled.values()) v = v * -3.0 + 7.0;
    const jdda::UnlabeledDataset other(scrambled);
    const auto a = jdda::train(small_config(Variant::source_only), data.source, data.target);
    const auto b = jdda::train(small_config(Variant::source_only), data.source, other);
    EXPECT_EQ(a.params, b.params);
    EXPECT_TRUE(std::isnan(b.report.final_target_accuracy));
}

TEST(Train, TargetLabelsDoNotInfluenceTraining) {
    const auto data = small_task();
    const jdda::UnlabeledDataset unlabeled(data.target.features());
    const auto a = jdda::train(small_config(Variant::jdda_center), data.source, data.target);
    const auto b = jdda::train(small_config(Variant::jdda_center), data.source, unlabeled);
    EXPECT_EQ(a.params, b.params);
}

TEST(Train, RejectsBadInputs) {
    const auto data = small_task();
    EXPECT_THROW(jdda::train(small_config(Variant::coral_only), data.source, jdda::UnlabeledDataset(Matrix(0, 2))),
                 std::invalid_argument);
    TrainConfig big = small_config(Variant::coral_only);
    big.batch_per_domain = 1000;
    EXPECT_THROW(jdda::train(big, data.source, data.target), std::invalid_argument);
    Labels wrong(data.target.size(), 0);
    const jdda::UnlabeledDataset mismatched(data.target.features(), wrong, 5);
    EXPECT_THROW(jdda::train(small_config(Variant::coral_only), data.source, mismatched), std::invalid_argument);
}

TEST(Evaluate, PerfectAndAbsentClasses) {
    // Identity-like net: logits equal inputs.
    jdda::NetworkParams p({{Matrix{{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0}},
                           {Matrix{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {0.0, 0.0, -1.0}}});
    jdda::LabeledDataset d{Matrix{{2.0, 1.0}, {0.5, 3.0}, {4.0, 0.0}}, {0, 1, 0}, 3, "fixture"};
    const auto acc = jdda::evaluate(p, d);
    EXPECT_EQ(acc.overall, 1.0);
    ASSERT_EQ(acc.per_class.size(), 3u);
    EXPECT_EQ(acc.per_class[0], 1.0);
    EXPECT_EQ(acc.per_class[1], 1.0);
    EXPECT_FALSE(acc.per_class[2].has_value());
}

TEST(Evaluate, RandomLabelsNearChance) {
    const std::size_t n = 3000, c = 3;
    std::mt19937_64 rng(77);
    jdda::LabeledDataset d{Matrix(n, 2), Labels(n), c, "random"};
    for (int& y : d.labels) y = std::uniform_int_distribution<int>(0, 2)(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& v : d.features.values()) v = g(rng);
    const auto p = jdda::init_params(std::vector<std::size_t>{2, 8, 4, 3}, 3);
    const double acc = jdda::evaluate(p, d).overall;
    const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / static_cast<double>(n));
    EXPECT_NEAR(acc, 1.0 / 3.0, 3.0 * sigma);
}

TEST(Evaluate, UnlabeledTargetNeedsHeldOutLabels) {
    const auto p = jdda::init_params(std::vector<std::size_t>{2, 3, 2, 2}, 1);
    EXPECT_THROW(jdda::evaluate(p, jdda::UnlabeledDataset(Matrix(3, 2))), std::invalid_argument);
}

TEST(ReportCsv, HeaderAndRows) {
    const auto data = small_task();
    const auto r = jdda::train(small_config(Variant::coral_only), data.source, data.target);
    const std::string path = ::testing::TempDir() + "/report.csv";
    jdda::write_report_csv(r.report, path);
    std::ifstream in(path);
    std::string first, header;
    std::getline(in, first);
    std::getline(in, header);
    EXPECT_EQ(first, "# jdda-curve v1");
    EXPECT_EQ(header, "iteration,source_loss,coral_loss,discriminative_loss,lambda1,target_accuracy,source_accuracy");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, r.report.records.size());
}

// Held-out target labels must only be readable from the evaluation translation unit.
TEST(AccessAudit, TrainingSourcesNeverTouchHeldOutLabels) {
    // has_held_out_labels() only reports presence and is allowed.
    const std::regex reader(R"((^|[^_[:alnum:]])held_out_labels[[:space:]]*\()");
    ASSERT_TRUE(std::regex_search(std::string("t.held_out_labels (key)"), reader));
    ASSERT_FALSE(std::regex_search(std::string("t.has_held_out_labels()"), reader));
    for (const char* file : {"src/trainer.cpp", "src/losses.cpp", "src/model.cpp", "src/numerics.cpp"}) {
        std::ifstream in(std::string(JDDA_SOURCE_DIR) + "/" + file);
        ASSERT_TRUE(in) << file;
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        EXPECT_EQ(text.find("EvaluationAccess"), std::string::npos) << file;
        EXPECT_FALSE(std::regex_search(text, reader)) << file;
        EXPECT_EQ(text.find("EvaluationKey"), std::string::npos) << file;
    }
}
