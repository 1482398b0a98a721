#pragma once

#include "jdda/matrix.hpp"

namespace jdda {

/// Row-to-row Euclidean distances of a b×L feature batch, as a b×b matrix.
///
/// Uses max(0, |x|² + |y|² − 2xᵀy) so round-off never produces a negative
/// radicand. The result is exactly symmetric with an exactly zero diagonal.
/// Throws std::invalid_argument on a matrix with zero rows.
Matrix pairwise_euclidean(const Matrix& features, bool squared);

/// Hᵀ J_b H with J_b = I − (1/b)·11ᵀ. No 1/(b−1) normalization is applied.
Matrix centered_covariance(const Matrix& features);

/// Subtracts the column means from every row, i.e. J_b H.
Matrix center_rows(const Matrix& features);

double frobenius_sq(const Matrix& a) noexcept;

/// Σ a_ij·mask_ij. Throws std::invalid_argument on a shape mismatch.
double masked_sum(const Matrix& a, const Matrix& mask);

/// Element-wise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

double squared_distance(std::span<const double> x, std::span<const double> y) noexcept;

}  // namespace jdda
