#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "jdda/gradcheck.hpp"
#include "jdda/model.hpp"

using jdda::DenseLayer;
using jdda::Matrix;
using jdda::NetworkParams;

namespace {

NetworkParams small_net(std::vector<std::size_t> sizes, std::uint64_t seed) { return jdda::init_params(sizes, seed); }

double leaky(double z) { return z > 0.0 ? z : jdda::kLeakySlope * z; }

}  // namespace

TEST(InitParams, ShapesFollowSpec) {
    const NetworkParams p = small_net({2, 8, 2, 3}, 7);
    ASSERT_EQ(p.layers().size(), 3u);
    EXPECT_EQ(p.layers()[0].weights.rows(), 2u);
    EXPECT_EQ(p.layers()[0].weights.cols(), 8u);
    EXPECT_EQ(p.layers()[1].weights.rows(), 8u);
    EXPECT_EQ(p.layers()[1].weights.cols(), 2u);
    EXPECT_EQ(p.layers()[2].weights.rows(), 2u);
    EXPECT_EQ(p.layers()[2].weights.cols(), 3u);
    EXPECT_EQ(p.bottleneck_dim(), 2u);
    EXPECT_EQ(p.num_classes(), 3u);
    EXPECT_EQ(p.bottleneck_index(), 1u);
    EXPECT_EQ(p.parameter_count(), 2u * 8 + 8 + 8 * 2 + 2 + 2 * 3 + 3);
    for (const auto& layer : p.layers())
        for (double b : layer.bias) EXPECT_EQ(b, 0.0);
}

TEST(InitParams, DeterministicPerSeed) {
    EXPECT_EQ(small_net({4, 6, 3, 2}, 11), small_net({4, 6, 3, 2}, 11));
    EXPECT_NE(small_net({4, 6, 3, 2}, 11), small_net({4, 6, 3, 2}, 12));
}

TEST(InitParams, RejectsInvalidSpecs) {
    EXPECT_THROW(small_net({4, 3}, 1), std::invalid_argument);
    EXPECT_THROW(small_net({4, 0, 3}, 1), std::invalid_argument);
}

TEST(InitParams, FanInScale) {
    const NetworkParams p = small_net({200, 300, 4, 2}, 5);
    double ss = 0.0;
    for (double w : p.layers()[0].weights.values()) ss += w * w;
    const double var = ss / static_cast<double>(p.layers()[0].weights.size());
    EXPECT_NEAR(var, 2.0 / 200.0, 0.1 * 2.0 / 200.0);
}

TEST(NetworkParams, RejectsBrokenChain) {
    std::vector<DenseLayer> layers{{Matrix(2, 3), std::vector<double>(3)}, {Matrix(4, 2), std::vector<double>(2)}};
    EXPECT_THROW(NetworkParams(std::move(layers)), std::invalid_argument);
}

TEST(Forward, HandComputedTwoLayerNet) {
    // 2 → 2 (leaky) → 2 logits.
    NetworkParams p({{Matrix{{1.0, -2.0}, {0.5, 1.0}}, {0.1, -0.2}}, {Matrix{{2.0, 0.0}, {1.0, -1.0}}, {0.0, 0.5}}});
    const Matrix x{{1.0, 2.0}};
    const double z0 = 1.0 * 1.0 + 2.0 * 0.5 + 0.1;   // 2.1
    const double z1 = 1.0 * -2.0 + 2.0 * 1.0 - 0.2;  // -0.2
    const double a0 = leaky(z0), a1 = leaky(z1);
    const auto trace = jdda::forward(p, x);
    EXPECT_NEAR(trace.bottleneck()(0, 0), a0, 1e-15);
    EXPECT_NEAR(trace.bottleneck()(0, 1), a1, 1e-15);
    EXPECT_NEAR(trace.logits(0, 0), 2.0 * a0 + 1.0 * a1, 1e-15);
    EXPECT_NEAR(trace.logits(0, 1), -1.0 * a1 + 0.5, 1e-15);
}

TEST(Forward, ZeroParametersGiveZeroLogits) {
    NetworkParams p = small_net({3, 5, 2, 4}, 1);
    for (auto& layer : p.layers()) {
        for (double& w : layer.weights.values()) w = 0.0;
        for (double& b : layer.bias) b = 0.0;
    }
    const auto trace = jdda::forward(p, Matrix{{1, 2, 3}, {-4, 5, 6}});
    EXPECT_EQ(trace.logits, Matrix(2, 4));
}

TEST(Forward, SharedWeightsGiveIdenticalStreams) {
    const NetworkParams p = small_net({3, 7, 4, 3}, 9);
    const Matrix x{{0.3, -1.0, 2.0}, {1.5, 0.2, -0.7}};
    const auto a = jdda::forward(p, x), b = jdda::forward(p, x);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.bottleneck(), b.bottleneck());
    EXPECT_EQ(a.bottleneck().rows(), 2u);
    EXPECT_EQ(a.bottleneck().cols(), 4u);
}

TEST(Forward, RejectsWrongInputWidth) {
    EXPECT_THROW(jdda::forward(small_net({3, 4, 2, 2}, 1), Matrix(2, 5)), std::invalid_argument);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    const NetworkParams p = small_net({3, 4, 2, 3}, 2);
    const auto trace = jdda::forward(p, Matrix{{1, 2, 3}});
    const auto g = jdda::backward(p, trace, Matrix(1, 3), Matrix(1, 2));
    EXPECT_EQ(g.max_abs(), 0.0);
}

TEST(Backward, LinearInUpstreamGradients) {
    const NetworkParams p = small_net({3, 5, 2, 3}, 4);
    const auto trace = jdda::forward(p, Matrix{{1, -2, 3}, {0.5, 0.1, -1}});
    const Matrix dl{{0.2, -0.1, 0.4}, {-0.3, 0.6, 0.05}};
    const Matrix db{{1.0, -0.5}, {0.25, 2.0}};
    const auto g1 = jdda::backward(p, trace, dl, Matrix());
    auto g2 = jdda::backward(p, trace, dl * 2.0, Matrix());
    const auto split_a = jdda::backward(p, trace, dl, Matrix());
    const auto split_b = jdda::backward(p, trace, Matrix(2, 3), db);
    const auto both = jdda::backward(p, trace, dl, db);
    for (std::size_t k = 0; k < g1.weights.size(); ++k) {
        for (std::size_t i = 0; i < g1.weights[k].size(); ++i) {
            EXPECT_DOUBLE_EQ(g2.weights[k].values()[i], 2.0 * g1.weights[k].values()[i]);
            EXPECT_NEAR(both.weights[k].values()[i],
                        split_a.weights[k].values()[i] + split_b.weights[k].values()[i], 1e-14);
        }
        for (std::size_t i = 0; i < g1.bias[k].size(); ++i)
            EXPECT_NEAR(both.bias[k][i], split_a.bias[k][i] + split_b.bias[k][i], 1e-14);
    }
}

TEST(Backward, SingleWeightMatchesFiniteDifference) {
    NetworkParams p = small_net({3, 6, 4, 3}, 8);
    const Matrix x{{0.7, -1.2, 0.4}, {1.1, 0.3, -0.8}, {-0.2, 0.9, 1.4}};
    const Matrix dl{{0.3, -0.2, 0.1}, {-0.4, 0.2, 0.5}, {0.1, 0.1, -0.3}};
    const Matrix db{{0.5, -1.0, 0.2, 0.1}, {0.0, 0.3, -0.6, 0.2}, {0.7, 0.1, 0.1, -0.4}};
    // Scalar loss whose upstream gradients are exactly dl and db.
    auto loss = [&] {
        const auto t = jdda::forward(p, x);
        double s = 0.0;
        for (std::size_t i = 0; i < dl.size(); ++i) s += dl.values()[i] * t.logits.values()[i];
        for (std::size_t i = 0; i < db.size(); ++i) s += db.values()[i] * t.bottleneck().values()[i];
        return s;
    };
    const auto g = jdda::backward(p, jdda::forward(p, x), dl, db);
    const double eps = 1e-5;
    for (std::size_t k = 0; k < p.layers().size(); ++k) {
        auto w = p.layers()[k].weights.values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + eps;
            const double up = loss();
            w[i] = saved - eps;
            const double down = loss();
            w[i] = saved;
            EXPECT_LE(jdda::relative_error(g.weights[k].values()[i], (up - down) / (2 * eps)), 1e-4);
        }
    }
}

TEST(Predict, ArgmaxOfLogits) {
    NetworkParams p({{Matrix{{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0}}, {Matrix{{1.0, 0.0}, {0.0, 1.0}}, {0.0, 0.0}}});
    EXPECT_EQ(jdda::predict(p, Matrix{{2.0, 1.0}, {0.5, 3.0}}), (std::vector<int>{0, 1}));
}

TEST(Checkpoint, RoundTripIsExact) {
    NetworkParams p = small_net({5, 9, 3, 4}, 21);
    p.layers()[1].bias[2] = 1.0 / 3.0;
    std::stringstream buf;
    jdda::save_checkpoint(p, buf);
    EXPECT_EQ(buf.str().rfind("jdda-checkpoint 1", 0), 0u);
    EXPECT_EQ(jdda::load_checkpoint(buf), p);
}

TEST(Checkpoint, RejectsBadHeaderAndTruncation) {
    std::stringstream bad("not-a-checkpoint 1\n");
    EXPECT_THROW(jdda::load_checkpoint(bad), std::runtime_error);
    std::stringstream full;
    jdda::save_checkpoint(small_net({2, 3, 2, 2}, 1), full);
    const std::string text = full.str();
    std::stringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(jdda::load_checkpoint(truncated), std::runtime_error);
}
