#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "jdda/matrix.hpp"

namespace jdda {

using Labels = std::vector<int>;

enum class Variant { source_only, coral_only, jdda_instance, jdda_center };

std::string_view to_string(Variant v) noexcept;
/// Accepts the canonical names above; throws std::invalid_argument otherwise.
Variant parse_variant(std::string_view name);

/// Trade-off weights and margins of the joint objective.
struct LossWeights {
    double lambda1 = 1.0;  // CORAL weight
    double lambda2 = 0.0;  // discriminative weight
    double alpha = 1.0;    // intra/inter balance of the instance loss
    double beta = 1.0;     // intra weight of the center loss
    double m1 = 0.0;
    double m2 = 100.0;

    /// Throws std::invalid_argument unless all entries are non-negative and m2 >= m1.
    void validate() const;
};

/// A scalar loss with gradients w.r.t. the inputs it was given. Gradients not
/// applicable to a loss are left empty.
struct LossValue {
    double value = 0.0;
    Matrix grad_logits;
    Matrix grad_source;
    Matrix grad_target;
    /// Elementary distance/hinge terms evaluated; used to audit cost scaling.
    std::size_t terms = 0;
};

/// Global class centers maintained across iterations.
class CenterState {
public:
    CenterState(std::size_t num_classes, std::size_t dim, double gamma);
    /// A state whose centers are already set (all classes marked seen).
    static CenterState from_centers(Matrix centers, double gamma);

    const Matrix& centers() const noexcept { return centers_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t num_classes() const noexcept { return centers_.rows(); }
    /// True once a first batch has set the centers.
    bool initialized() const noexcept { return initialized_; }
    bool seen(std::size_t cls) const noexcept { return seen_[cls] != 0; }

    /// One recursion step; on the first call centers become batch class means.
    void update(const Matrix& h_source, std::span<const int> labels);

private:
    Matrix centers_;
    double gamma_;
    bool initialized_ = false;
    std::vector<char> seen_;
};

/// Pure form of CenterState::update.
CenterState update_centers(CenterState state, const Matrix& h_source, std::span<const int> labels);

/// Mean softmax cross-entropy over the batch; gradient (softmax − onehot)/n.
LossValue source_softmax_loss(const Matrix& logits, std::span<const int> labels);

/// ‖Cov(Hs) − Cov(Ht)‖²_F / (4L²) with Cov(H) = Hᵀ J_b H.
LossValue coral_loss(const Matrix& h_source, const Matrix& h_target);

/// Pairwise hinge loss over all ordered pairs of the b×b distance matrix:
/// α·Σ_same max(0, d − m1)² + Σ_diff max(0, m2 − d)².
LossValue instance_discriminative_loss(const Matrix& h_source, std::span<const int> labels,
                                       const LossWeights& weights);

/// β·Σ_i max(0, ‖h_i − c_{y_i}‖² − m1) + Σ_{k≠l} max(0, m2 − ‖ĉ_k − ĉ_l‖²).
///
/// Global centers c are constants; batch centers ĉ of the classes present in
/// the batch carry gradient back to the features. Throws std::logic_error if
/// the centers have not been initialized.
LossValue center_discriminative_loss(const Matrix& h_source, std::span<const int> labels,
                                     const CenterState& centers, const LossWeights& weights);

/// Components of the joint objective, already unweighted.
struct JointLoss {
    LossValue total;  // value plus gradients for logits, h_source and h_target
    double source = 0.0;
    double coral = 0.0;
    double discriminative = 0.0;
};

/// L_s + λ1·L_c + λ2·L_d with the discriminative term picked by the variant.
/// source_only ignores λ1 and λ2 and may receive an empty h_target; coral_only
/// ignores λ2. Throws std::invalid_argument when jdda_center has no centers.
JointLoss joint_loss(const Matrix& logits, const Matrix& h_source, const Matrix& h_target,
                     std::span<const int> labels, const LossWeights& weights, Variant variant,
                     const CenterState* centers = nullptr);

/// Mean of the batch features of every class present; absent rows stay zero.
/// `counts` receives the per-class sample counts.
Matrix batch_class_means(const Matrix& h, std::span<const int> labels, std::size_t num_classes,
                         std::vector<std::size_t>& counts);

}  // namespace jdda
