#include "jdda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "jdda/numerics.hpp"

namespace jdda {

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes,
                  const char* who) {
    if (labels.size() != rows)
        throw std::invalid_argument(std::string(who) + ": " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(rows) + " rows");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw std::out_of_range(std::string(who) + ": label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
}

void axpy_row(std::span<double> dst, double scale, std::span<const double> x,
              std::span<const double> y) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * (x[k] - y[k]);
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::source_only: return "source_only";
        case Variant::coral_only: return "coral_only";
        case Variant::jdda_instance: return "jdda_instance";
        case Variant::jdda_center: return "jdda_center";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : {Variant::source_only, Variant::coral_only, Variant::jdda_instance,
                      Variant::jdda_center})
        if (to_string(v) == name) return v;
    throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

void LossWeights::validate() const {
    if (lambda1 < 0 || lambda2 < 0 || alpha < 0 || beta < 0 || m1 < 0 || m2 < 0)
        throw std::invalid_argument("LossWeights: weights and margins must be non-negative");
    if (m2 < m1) throw std::invalid_argument("LossWeights: m2 must be >= m1");
}

Matrix batch_class_means(const Matrix& h, std::span<const int> labels, std::size_t num_classes,
                         std::vector<std::size_t>& counts) {
    Matrix means(num_classes, h.cols());
    counts.assign(num_classes, 0);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        ++counts[y];
        auto dst = means.row(y);
        auto src = h.row(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
    }
    return means;
}

// ---------------------------------------------------------------------------
// CenterState

CenterState::CenterState(std::size_t num_classes, std::size_t dim, double gamma)
    : centers_(num_classes, dim), gamma_(gamma), seen_(num_classes, 0) {
    if (num_classes == 0 || dim == 0)
        throw std::invalid_argument("CenterState: need at least one class and one dimension");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("CenterState: gamma must lie in (0, 1]");
}

CenterState CenterState::from_centers(Matrix centers, double gamma) {
    CenterState s(centers.rows(), centers.cols(), gamma);
    if (!all_finite(centers)) throw std::invalid_argument("CenterState: non-finite center");
    s.centers_ = std::move(centers);
    s.initialized_ = true;
    std::fill(s.seen_.begin(), s.seen_.end(), 1);
    return s;
}

void CenterState::update(const Matrix& h_source, std::span<const int> labels) {
    if (h_source.cols() != centers_.cols())
        throw std::invalid_argument("update_centers: feature dimension differs from centers");
    check_labels(labels, h_source.rows(), num_classes(), "update_centers");

    std::vector<std::size_t> counts;
    const Matrix means = batch_class_means(h_source, labels, num_classes(), counts);
    for (std::size_t j = 0; j < num_classes(); ++j) {
        const std::size_t n = counts[j];
        if (n == 0) continue;
        auto c = centers_.row(j);
        auto mean = means.row(j);
        if (!seen_[j]) {
            // First appearance of the class: start from its batch class center.
            std::copy(mean.begin(), mean.end(), c.begin());
            seen_[j] = 1;
            continue;
        }
        // Δc = Σ(c − h_i)/(1 + n) = n·(c − mean)/(1 + n)
        const double scale = gamma_ * static_cast<double>(n) / (1.0 + static_cast<double>(n));
        for (std::size_t k = 0; k < c.size(); ++k) c[k] -= scale * (c[k] - mean[k]);
    }
    initialized_ = true;
}

CenterState update_centers(CenterState state, const Matrix& h_source, std::span<const int> labels) {
    state.update(h_source, labels);
    return state;
}

// ---------------------------------------------------------------------------
// Losses

LossValue source_softmax_loss(const Matrix& logits, std::span<const int> labels) {
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    if (n == 0 || c == 0) throw std::invalid_argument("source_softmax_loss: empty logits");
    check_labels(labels, n, c, "source_softmax_loss");

    LossValue out;
    out.grad_logits = Matrix(n, c);
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto z = logits.row(i);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        const double log_denom = std::log(denom);
        const auto y = static_cast<std::size_t>(labels[i]);
        total += log_denom - (z[y] - zmax);
        auto g = out.grad_logits.row(i);
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(z[j] - zmax - log_denom);
            g[j] = (p - (j == y ? 1.0 : 0.0)) * inv_n;
        }
    }
    out.value = total * inv_n;
    out.terms = n;
    return out;
}

LossValue coral_loss(const Matrix& h_source, const Matrix& h_target) {
    if (!h_source.same_shape(h_target))
        throw std::invalid_argument("coral_loss: source and target batches differ in shape");
    if (h_source.rows() == 0) throw std::invalid_argument("coral_loss: empty batch");
    const auto dim = static_cast<double>(h_source.cols());
    const double scale = 1.0 / (4.0 * dim * dim);

    const Matrix centered_s = center_rows(h_source);
    const Matrix centered_t = center_rows(h_target);
    Matrix diff = centered_covariance(h_source) - centered_covariance(h_target);

    LossValue out;
    out.value = scale * frobenius_sq(diff);
    // d/dH ‖HᵀJH − C‖² = 4·J·H·(HᵀJH − C); the 1/(4L²) leaves 1/L².
    out.grad_source = matmul(centered_s, diff) * (4.0 * scale);
    out.grad_target = matmul(centered_t, diff) * (-4.0 * scale);
    out.terms = h_source.rows() * h_source.cols() * h_source.cols();
    return out;
}

LossValue instance_discriminative_loss(const Matrix& h_source, std::span<const int> labels,
                                       const LossWeights& weights) {
    const std::size_t b = h_source.rows();
    if (labels.size() != b)
        throw std::invalid_argument("instance_discriminative_loss: label count mismatch");
    for (int y : labels)
        if (y < 0) throw std::out_of_range("instance_discriminative_loss: negative label");

    const Matrix dist = pairwise_euclidean(h_source, false);
    LossValue out;
    out.grad_source = Matrix(b, h_source.cols());
    double intra = 0.0;
    double inter = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        auto gi = out.grad_source.row(i);
        for (std::size_t j = 0; j < b; ++j) {
            const double d = dist(i, j);
            double slope = 0.0;  // d(term)/d(distance)
            if (labels[i] == labels[j]) {
                const double slack = d - weights.m1;
                if (slack > 0.0) {
                    intra += slack * slack;
                    slope = 2.0 * weights.alpha * slack;
                }
            } else {
                const double slack = weights.m2 - d;
                if (slack > 0.0) {
                    inter += slack * slack;
                    slope = -2.0 * slack;
                }
            }
            // Pair (i,j) and its mirror (j,i) both move h_i.
            if (slope != 0.0 && d > 0.0)
                axpy_row(gi, 2.0 * slope / d, h_source.row(i), h_source.row(j));
        }
    }
    out.value = weights.alpha * intra + inter;
    out.terms = b * b;
    return out;
}

LossValue center_discriminative_loss(const Matrix& h_source, std::span<const int> labels,
                                     const CenterState& centers, const LossWeights& weights) {
    if (!centers.initialized())
        throw std::logic_error("center_discriminative_loss: centers are not initialized");
    const std::size_t b = h_source.rows();
    const std::size_t c = centers.num_classes();
    if (h_source.cols() != centers.centers().cols())
        throw std::invalid_argument("center_discriminative_loss: feature dimension differs from centers");
    check_labels(labels, b, c, "center_discriminative_loss");

    LossValue out;
    out.grad_source = Matrix(b, h_source.cols());

    double intra = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        auto center = centers.centers().row(static_cast<std::size_t>(labels[i]));
        const double slack = squared_distance(h_source.row(i), center) - weights.m1;
        if (slack > 0.0) {
            intra += slack;
            axpy_row(out.grad_source.row(i), 2.0 * weights.beta, h_source.row(i), center);
        }
    }

    std::vector<std::size_t> counts;
    const Matrix means = batch_class_means(h_source, labels, c, counts);
    Matrix grad_means(c, h_source.cols());
    double inter = 0.0;
    std::size_t pair_terms = 0;
    for (std::size_t k = 0; k < c; ++k) {
        if (counts[k] == 0) continue;
        for (std::size_t l = 0; l < c; ++l) {
            if (l == k || counts[l] == 0) continue;
            ++pair_terms;
            const double slack = weights.m2 - squared_distance(means.row(k), means.row(l));
            if (slack > 0.0) {
                inter += slack;
                // Ordered pair (k,l): ∂/∂ĉ_k = −2(ĉ_k − ĉ_l), ∂/∂ĉ_l = +2(ĉ_k − ĉ_l).
                axpy_row(grad_means.row(k), -2.0, means.row(k), means.row(l));
                axpy_row(grad_means.row(l), -2.0, means.row(l), means.row(k));
            }
        }
    }
    for (std::size_t i = 0; i < b; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const double inv = 1.0 / static_cast<double>(counts[y]);
        auto gi = out.grad_source.row(i);
        auto gm = grad_means.row(y);
        for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += gm[k] * inv;
    }

    out.value = weights.beta * intra + inter;
    out.terms = b + pair_terms;
    return out;
}

JointLoss joint_loss(const Matrix& logits, const Matrix& h_source, const Matrix& h_target,
                     std::span<const int> labels, const LossWeights& weights, Variant variant,
                     const CenterState* centers) {
    weights.validate();
    if (variant == Variant::jdda_center && centers == nullptr)
        throw std::invalid_argument("joint_loss: jdda_center requires class centers");

    JointLoss out;
    LossValue src = source_softmax_loss(logits, labels);
    out.source = src.value;
    out.total.value = src.value;
    out.total.grad_logits = std::move(src.grad_logits);
    out.total.grad_source = Matrix(h_source.rows(), h_source.cols());
    if (variant == Variant::source_only) return out;

    LossValue coral = coral_loss(h_source, h_target);
    out.coral = coral.value;
    out.total.value += weights.lambda1 * coral.value;
    out.total.grad_source += coral.grad_source * weights.lambda1;
    out.total.grad_target = coral.grad_target * weights.lambda1;
    if (variant == Variant::coral_only) return out;

    LossValue disc = variant == Variant::jdda_instance
                         ? instance_discriminative_loss(h_source, labels, weights)
                         : center_discriminative_loss(h_source, labels, *centers, weights);
    out.discriminative = disc.value;
    out.total.value += weights.lambda2 * disc.value;
    out.total.grad_source += disc.grad_source * weights.lambda2;
    return out;
}

}  // namespace jdda
