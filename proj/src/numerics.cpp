#include "jdda/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace jdda {

Matrix pairwise_euclidean(const Matrix& features, bool squared) {
    const std::size_t b = features.rows();
    if (b == 0) throw std::invalid_argument("pairwise_euclidean: empty feature matrix");

    std::vector<double> norms(b);
    for (std::size_t i = 0; i < b; ++i) {
        double acc = 0.0;
        for (double v : features.row(i)) acc += v * v;
        norms[i] = acc;
    }

    Matrix dist(b, b);
    for (std::size_t i = 0; i < b; ++i) {
        auto xi = features.row(i);
        for (std::size_t j = i + 1; j < b; ++j) {
            auto xj = features.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < xi.size(); ++k) dot += xi[k] * xj[k];
            double d = std::max(0.0, norms[i] + norms[j] - 2.0 * dot);
            if (!squared) d = std::sqrt(d);
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    return dist;
}

Matrix center_rows(const Matrix& features) {
    const std::size_t b = features.rows();
    Matrix centered = features;
    if (b == 0) return centered;
    std::vector<double> mean(features.cols(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
        auto r = features.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) mean[k] += r[k];
    }
    for (double& m : mean) m /= static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        auto r = centered.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) r[k] -= mean[k];
    }
    return centered;
}

Matrix centered_covariance(const Matrix& features) {
    // Hᵀ J H = (J H)ᵀ (J H) since J is symmetric and idempotent.
    const Matrix centered = center_rows(features);
    Matrix cov = matmul_tn(centered, centered);
    for (std::size_t i = 0; i < cov.rows(); ++i)
        for (std::size_t j = i + 1; j < cov.cols(); ++j) cov(j, i) = cov(i, j);
    return cov;
}

double frobenius_sq(const Matrix& a) noexcept {
    double acc = 0.0;
    for (double v : a.values()) acc += v * v;
    return acc;
}

double masked_sum(const Matrix& a, const Matrix& mask) {
    if (!a.same_shape(mask)) throw std::invalid_argument("masked_sum: shape mismatch");
    double acc = 0.0;
    auto av = a.values();
    auto mv = mask.values();
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * mv[i];
    return acc;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("hadamard: shape mismatch");
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    return out;
}

double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        acc += d * d;
    }
    return acc;
}

}  // namespace jdda
