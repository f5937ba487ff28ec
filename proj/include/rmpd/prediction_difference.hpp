#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rmpd/background.hpp"
#include "rmpd/classifier.hpp"
#include "rmpd/difference.hpp"
#include "rmpd/image.hpp"
#include "rmpd/segmentation.hpp"

namespace rmpd {

/// Target class: an explicit id, or the argmax of the baseline prediction
/// (ties to the lowest index).
struct ClassSelector {
    std::optional<std::size_t> id;

    static ClassSelector argmax() { return {}; }
    static ClassSelector of(std::size_t class_id) { return {class_id}; }
    std::size_t resolve(const Probabilities& baseline) const;
};

// --- tabular ---------------------------------------------------------------

/// Call-counting black box over discrete feature vectors.
class TabularModel {
public:
    using Fn = std::function<Probabilities(std::span<const double>)>;
    TabularModel(std::size_t num_classes, Fn fn);

    Probabilities predict(std::span<const double> features);
    std::uint64_t call_count() const noexcept { return calls_.load(std::memory_order_relaxed); }
    void reset_call_count() noexcept { calls_.store(0, std::memory_order_relaxed); }
    std::size_t num_classes() const noexcept { return num_classes_; }

private:
    std::size_t num_classes_;
    Fn fn_;
    std::atomic<std::uint64_t> calls_{0};
};

struct TabularInstance {
    std::vector<double> values;
    std::vector<std::vector<double>> domains;  // value set per feature
    std::vector<std::vector<double>> priors;   // p(x_i = a_j), aligned with domains
};

struct TabularResult {
    std::vector<double> saliency;   // s_i = g(p(c|x), p(c|x without i))
    std::vector<double> marginal;   // p(c|x without i)
    double baseline = 0.0;          // p(c|x)
};

/// Prior-weighted marginalization of each feature; 1 + sum_i m_i calls.
TabularResult tabular_pd(TabularModel& model, const TabularInstance& x, std::size_t class_id,
                         DifferenceFunction g = {});

// --- pixel-wise conditional sampling ----------------------------------------

struct BaselineConfig {
    std::size_t k = 10;        // inner patch side
    std::size_t l = 14;        // outer patch side, l > k
    std::size_t samples = 10;  // draws per pixel
    DifferenceFunction g{};
    std::uint64_t seed = 0;
};

struct PixelwiseResult {
    SaliencyMap map;  // signed, averaged over overlapping patches
    std::size_t class_id = 0;
    double baseline = 0.0;
};

/// Every pixel's k x k patch is resampled from a per-channel normal fitted to
/// the surrounding l x l ring; 1 + samples * W * H classifier calls.
PixelwiseResult pixelwise_pd(ClassifierHandle& f, const RasterImage& image, ClassSelector cls,
                             const BaselineConfig& cfg);

// --- regional multi-scale ----------------------------------------------------

struct PDConfig {
    int r = 5;
    DifferenceFunction g{};
    std::uint64_t seed = 0;
    BackgroundOptions background{};
    SegmenterOptions segmenter{};
};

struct RegionalResult {
    SaliencyMap fused;
    std::vector<SaliencyMap> per_scale;           // scale 2^1 first
    std::vector<SegmentationMap> segmentations;   // aligned with per_scale
    BackgroundModel background;
    std::size_t class_id = 0;
    double baseline = 0.0;
};

/// Each region of each ladder scale is excluded once by filling it from the
/// boundary-prior background model; the region's value is
/// max(0, g(baseline, excluded)). The fused map is the mean over scales.
RegionalResult regional_pd(ClassifierHandle& f, const RasterImage& image, ClassSelector cls,
                           const PDConfig& cfg);

// --- call budgets -----------------------------------------------------------

std::uint64_t pixelwise_call_budget(std::uint64_t width, std::uint64_t height, std::uint64_t samples);

struct RegionalBudget {
    std::uint64_t exact = 0;  // 1 + sum_j 2^j
    std::uint64_t max = 0;    // 1 + 2 * sum_j 2^j
};
RegionalBudget regional_call_budget(int r);

}  // namespace rmpd
