#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jdda/matrix.hpp"

namespace jdda {

/// Outcome of comparing analytic gradients with central differences.
struct GradCheckReport {
    std::string name;
    std::size_t instances = 0;
    std::size_t entries = 0;      // gradient entries compared
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed() const noexcept { return max_rel_error <= tolerance; }
};

struct GradCheckOptions {
    std::size_t instances = 100;
    std::uint64_t seed = 0;
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Evaluation points whose hinge or activation slack is closer than this
    /// to a kink are redrawn.
    double kink_margin = 1e-3;
};

/// |a − n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric) noexcept;

/// Central difference of `f` w.r.t. every entry of `x`; `x` is restored.
Matrix numeric_gradient(const std::function<double()>& f, std::span<double> x, std::size_t rows,
                        std::size_t cols, double step);

GradCheckReport check_softmax_gradients(const GradCheckOptions& options);
GradCheckReport check_coral_gradients(const GradCheckOptions& options);
GradCheckReport check_instance_gradients(const GradCheckOptions& options);
GradCheckReport check_center_gradients(const GradCheckOptions& options);
/// Full network: joint loss of every variant back-propagated to every parameter.
GradCheckReport check_network_gradients(const GradCheckOptions& options);

std::vector<GradCheckReport> run_gradient_suite(const GradCheckOptions& options);

}  // namespace jdda
