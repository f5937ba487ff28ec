#pragma once

#include <string_view>

namespace rmpd {

/// Probabilities are clipped to [eps, 1 - eps] before logs and odds.
inline constexpr double kProbabilityEpsilon = 1e-6;

enum class DifferenceKind { subtraction, weight_of_evidence, info_difference };

/// Comparator g(a, b) between the full-input probability `a` and the
/// probability `b` with a feature or region removed.
struct DifferenceFunction {
    DifferenceKind kind = DifferenceKind::subtraction;

    double operator()(double a, double b) const noexcept;
};

/// Accepts "sub", "woe", "info" and the long enum names.
DifferenceKind parse_difference(std::string_view name);
std::string_view to_string(DifferenceKind kind) noexcept;

}  // namespace rmpd
