#include "rmpd/difference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rmpd/errors.hpp"

namespace rmpd {

namespace {

double clip(double p) noexcept { return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

double log2_odds(double p) noexcept {
    p = clip(p);
    return std::log2(p / (1.0 - p));
}

}  // namespace

double DifferenceFunction::operator()(double a, double b) const noexcept {
    switch (kind) {
        case DifferenceKind::subtraction: return a - b;
        case DifferenceKind::weight_of_evidence: return log2_odds(a) - log2_odds(b);
        case DifferenceKind::info_difference: return std::log2(clip(a)) - std::log2(clip(b));
    }
    return 0.0;
}

DifferenceKind parse_difference(std::string_view name) {
    if (name == "sub" || name == "subtraction") return DifferenceKind::subtraction;
    if (name == "woe" || name == "weight_of_evidence") return DifferenceKind::weight_of_evidence;
    if (name == "info" || name == "info_difference") return DifferenceKind::info_difference;
    throw InvalidArgument("unknown difference function '" + std::string(name) + "' (expected sub|woe|info)");
}

std::string_view to_string(DifferenceKind kind) noexcept {
    switch (kind) {
        case DifferenceKind::subtraction: return "sub";
        case DifferenceKind::weight_of_evidence: return "woe";
        case DifferenceKind::info_difference: return "info";
    }
    return "sub";
}

}  // namespace rmpd
