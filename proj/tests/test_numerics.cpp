#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jdda/numerics.hpp"

using jdda::Matrix;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double sd = 1.0) {
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(r, c);
    for (double& v : m.values()) v = n(rng);
    return m;
}

// Explicit Hᵀ (I − 11ᵀ/b) H, built the long way.
Matrix oracle_covariance(const Matrix& h) {
    const std::size_t b = h.rows(), l = h.cols();
    Matrix j(b, b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < b; ++k) j(i, k) = (i == k ? 1.0 : 0.0) - 1.0 / static_cast<double>(b);
    Matrix out(l, l);
    for (std::size_t p = 0; p < l; ++p)
        for (std::size_t q = 0; q < l; ++q) {
            double s = 0.0;
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t k = 0; k < b; ++k) s += h(i, p) * j(i, k) * h(k, q);
            out(p, q) = s;
        }
    return out;
}

}  // namespace

TEST(Matrix, ShapeMismatchOnConstruction) {
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Matrix, ProductsAgreeWithTransposes) {
    std::mt19937_64 rng(3);
    const Matrix a = random_matrix(rng, 4, 3), b = random_matrix(rng, 4, 5), c = random_matrix(rng, 2, 3);
    const Matrix tn = jdda::matmul_tn(a, b), ref_tn = jdda::matmul(jdda::transpose(a), b);
    const Matrix nt = jdda::matmul_nt(a, c), ref_nt = jdda::matmul(a, jdda::transpose(c));
    for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.values()[i], ref_tn.values()[i], 1e-12);
    for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.values()[i], ref_nt.values()[i], 1e-12);
    EXPECT_THROW(jdda::matmul(a, a), std::invalid_argument);
}

TEST(PairwiseEuclidean, ThreeFourFive) {
    const Matrix d = jdda::pairwise_euclidean(Matrix{{0, 0}, {3, 4}}, false);
    EXPECT_EQ(d, (Matrix{{0, 5}, {5, 0}}));
    EXPECT_EQ(jdda::pairwise_euclidean(Matrix{{0, 0}, {3, 4}}, true), (Matrix{{0, 25}, {25, 0}}));
}

TEST(PairwiseEuclidean, SingleRowAndIdenticalRows) {
    EXPECT_EQ(jdda::pairwise_euclidean(Matrix{{1.5, -2.0, 7.0}}, false), Matrix(1, 1));
    EXPECT_EQ(jdda::pairwise_euclidean(Matrix{{1, 1}, {1, 1}}, false), Matrix(2, 2));
}

TEST(PairwiseEuclidean, RejectsEmpty) {
    EXPECT_THROW(jdda::pairwise_euclidean(Matrix(0, 3), false), std::invalid_argument);
}

TEST(PairwiseEuclidean, SymmetricZeroDiagonalAndMatchesDirectDistance) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix h = random_matrix(rng, 7, 5, 3.0);
        const Matrix d = jdda::pairwise_euclidean(h, false);
        for (std::size_t i = 0; i < 7; ++i) {
            EXPECT_EQ(d(i, i), 0.0);
            for (std::size_t j = 0; j < 7; ++j) {
                EXPECT_EQ(d(i, j), d(j, i));
                double s = 0.0;
                for (std::size_t k = 0; k < 5; ++k) s += (h(i, k) - h(j, k)) * (h(i, k) - h(j, k));
                EXPECT_NEAR(d(i, j), std::sqrt(s), 1e-9);
            }
        }
    }
}

TEST(PairwiseEuclidean, NearlyEqualRowsStayFinite) {
    const Matrix h{{1e8, 1e8}, {1e8, 1e8 + 1e-8}};
    const Matrix d = jdda::pairwise_euclidean(h, false);
    EXPECT_TRUE(jdda::all_finite(d));
    EXPECT_GE(d(0, 1), 0.0);
}

TEST(CenteredCovariance, IdentityExample) {
    EXPECT_EQ(jdda::centered_covariance(Matrix::identity(2)), (Matrix{{0.5, -0.5}, {-0.5, 0.5}}));
}

TEST(CenteredCovariance, ConstantRowsAndSingleRowGiveZero) {
    EXPECT_EQ(jdda::centered_covariance(Matrix{{2, 3, 4}, {2, 3, 4}, {2, 3, 4}}), Matrix(3, 3));
    EXPECT_EQ(jdda::centered_covariance(Matrix{{5, -1}}), Matrix(2, 2));
}

TEST(CenteredCovariance, MatchesExplicitCenteringMatrix) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix h = random_matrix(rng, 6, 4);
        const Matrix c = jdda::centered_covariance(h), ref = oracle_covariance(h);
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.values()[i], ref.values()[i], 1e-12);
    }
}

TEST(CenteredCovariance, TranslationInvariantAndPsd) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix h = random_matrix(rng, 8, 5);
        Matrix shifted = h;
        std::vector<double> offset(5);
        for (double& v : offset) v = 10.0 * n(rng);
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t k = 0; k < 5; ++k) shifted(i, k) += offset[k];
        const Matrix c = jdda::centered_covariance(h), cs = jdda::centered_covariance(shifted);
        for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c.values()[i], cs.values()[i], 1e-9);
        for (int probe = 0; probe < 10; ++probe) {
            std::vector<double> x(5);
            double norm_sq = 0.0;
            for (double& v : x) {
                v = n(rng);
                norm_sq += v * v;
            }
            double q = 0.0;
            for (std::size_t p = 0; p < 5; ++p)
                for (std::size_t r = 0; r < 5; ++r) q += x[p] * c(p, r) * x[r];
            EXPECT_GE(q, -1e-9 * norm_sq);
        }
    }
}

TEST(FrobeniusSq, Examples) {
    EXPECT_EQ(jdda::frobenius_sq(Matrix(3, 2)), 0.0);
    EXPECT_EQ(jdda::frobenius_sq(Matrix{{1, 2}, {3, 4}}), 30.0);
    EXPECT_EQ(jdda::frobenius_sq(Matrix{{-1}}), 1.0);
}

TEST(MaskedSum, Examples) {
    const Matrix a{{1, 2}, {3, 4}};
    EXPECT_EQ(jdda::masked_sum(a, Matrix(2, 2, 1.0)), 10.0);
    EXPECT_EQ(jdda::masked_sum(a, Matrix(2, 2)), 0.0);
    EXPECT_EQ(jdda::masked_sum(a, Matrix{{0, 1}, {1, 0}}), 5.0);
    EXPECT_THROW(jdda::masked_sum(a, Matrix(2, 3)), std::invalid_argument);
}

TEST(MaskedSum, FrobeniusIdentity) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = random_matrix(rng, 5, 3, 4.0);
        const double f = jdda::frobenius_sq(a);
        const double m = jdda::masked_sum(jdda::hadamard(a, a), Matrix(5, 3, 1.0));
        EXPECT_LE(std::abs(f - m), 1e-12 * std::abs(f));
    }
}
