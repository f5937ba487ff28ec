#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rmpd/errors.hpp"
#include "rmpd/prediction_difference.hpp"

namespace rmpd {

std::size_t ClassSelector::resolve(const Probabilities& baseline) const {
    if (!id) return rmpd::argmax(baseline);
    if (*id >= baseline.size()) {
        throw InvalidArgument("class id " + std::to_string(*id) + " out of range for " +
                              std::to_string(baseline.size()) + " classes");
    }
    return *id;
}

TabularModel::TabularModel(std::size_t num_classes, Fn fn) : num_classes_(num_classes), fn_(std::move(fn)) {
    if (num_classes_ == 0) throw InvalidArgument("tabular model needs at least one class");
    if (!fn_) throw InvalidArgument("tabular model needs a callable");
}

Probabilities TabularModel::predict(std::span<const double> features) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    Probabilities p = fn_(features);
    validate_probabilities(p, num_classes_);
    return p;
}

TabularResult tabular_pd(TabularModel& model, const TabularInstance& x, std::size_t class_id,
                         DifferenceFunction g) {
    const std::size_t d = x.values.size();
    if (x.domains.size() != d || x.priors.size() != d) {
        throw InvalidArgument("tabular instance needs one domain and one prior per feature");
    }
    if (class_id >= model.num_classes()) throw InvalidArgument("class id out of range");
    for (std::size_t i = 0; i < d; ++i) {
        const auto& dom = x.domains[i];
        if (dom.empty()) throw InvalidArgument("feature " + std::to_string(i) + " has an empty domain");
        if (x.priors[i].size() != dom.size()) {
            throw InvalidArgument("prior length mismatch for feature " + std::to_string(i));
        }
        if (std::find(dom.begin(), dom.end(), x.values[i]) == dom.end()) {
            throw InvalidArgument("value of feature " + std::to_string(i) + " is outside its domain");
        }
        const double total = std::accumulate(x.priors[i].begin(), x.priors[i].end(), 0.0);
        if (std::abs(total - 1.0) > 1e-9) {
            throw InvalidArgument("prior of feature " + std::to_string(i) + " does not sum to 1");
        }
    }

    TabularResult result;
    result.baseline = model.predict(x.values)[class_id];
    std::vector<double> probe = x.values;
    for (std::size_t i = 0; i < d; ++i) {
        double marginal = 0.0;
        for (std::size_t j = 0; j < x.domains[i].size(); ++j) {
            probe[i] = x.domains[i][j];
            marginal += x.priors[i][j] * model.predict(probe)[class_id];
        }
        probe[i] = x.values[i];
        result.marginal.push_back(marginal);
        result.saliency.push_back(g(result.baseline, marginal));
    }
    return result;
}

std::uint64_t pixelwise_call_budget(std::uint64_t width, std::uint64_t height, std::uint64_t samples) {
    return 1 + samples * width * height;
}

RegionalBudget regional_call_budget(int r) {
    if (r < 1 || r > 30) throw InvalidArgument("scale count r must be in [1, 30]");
    const std::uint64_t sum = (std::uint64_t{1} << (r + 1)) - 2;  // 2^1 + ... + 2^r
    return {1 + sum, 1 + 2 * sum};
}

}  // namespace rmpd
