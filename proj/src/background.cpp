#include "rmpd/background.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rmpd/errors.hpp"
#include "rmpd/rng.hpp"

namespace rmpd {

namespace {

constexpr double kConvergence = 0.1;
constexpr int kMaxIterations = 100;

double dist2(const Rgb& a, const Rgb& b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

}  // namespace

std::vector<Rgb> region_mean_colors(const RasterImage& image, const SegmentationMap& seg,
                                    const std::set<RegionId>& regions) {
    if (regions.empty()) throw InvalidArgument("region_mean_colors: empty region set");
    if (image.width() != seg.width() || image.height() != seg.height()) {
        throw InvalidArgument("region_mean_colors: image and segmentation dimensions differ");
    }
    if (*regions.rbegin() >= seg.region_count()) {
        throw InvalidArgument("region_mean_colors: region id out of range");
    }
    std::vector<Rgb> sums(seg.region_count(), Rgb{0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(seg.region_count(), 0);
    const auto& labels = seg.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto px = image.pixel(i);
        for (std::size_t c = 0; c < 3; ++c) sums[labels[i]][c] += px[c];
        ++counts[labels[i]];
    }
    std::vector<Rgb> out;
    out.reserve(regions.size());
    for (RegionId r : regions) {
        const double inv = 1.0 / static_cast<double>(counts[r]);
        out.push_back({sums[r][0] * inv, sums[r][1] * inv, sums[r][2] * inv});
    }
    return out;
}

Rgb mean_shift_step(const std::vector<Rgb>& points, const Rgb& at, double bandwidth) {
    const double h2 = bandwidth * bandwidth;
    Rgb sum{0.0, 0.0, 0.0};
    std::size_t n = 0;
    for (const auto& p : points) {
        if (dist2(p, at) <= h2) {
            for (std::size_t c = 0; c < 3; ++c) sum[c] += p[c];
            ++n;
        }
    }
    if (n == 0) return at;
    return {sum[0] / n, sum[1] / n, sum[2] / n};
}

ClusterResult mean_shift(const std::vector<Rgb>& points, double bandwidth) {
    if (points.empty()) throw InvalidArgument("mean_shift: no points");
    if (!(bandwidth > 0.0)) throw InvalidArgument("mean_shift: bandwidth must be positive");

    ClusterResult result;
    const double merge2 = (bandwidth / 2.0) * (bandwidth / 2.0);
    for (const auto& start : points) {
        Rgb y = start;
        for (int it = 0; it < kMaxIterations; ++it) {
            const Rgb next = mean_shift_step(points, y, bandwidth);
            // Stop at y itself so that y remains a fixed point to within the tolerance.
            if (std::sqrt(dist2(next, y)) < kConvergence) break;
            y = next;
        }
        std::size_t mode = result.modes.size();
        for (std::size_t m = 0; m < result.modes.size(); ++m) {
            if (dist2(result.modes[m], y) <= merge2) {
                mode = m;
                break;
            }
        }
        if (mode == result.modes.size()) {
            result.modes.push_back(y);
            result.sizes.push_back(0);
        }
        ++result.sizes[mode];
        result.assignments.push_back(mode);
    }
    // max_element returns the first maximum, i.e. the earliest discovered mode.
    result.largest_index = static_cast<std::size_t>(
        std::max_element(result.sizes.begin(), result.sizes.end()) - result.sizes.begin());
    result.largest_mode = result.modes[result.largest_index];
    return result;
}

BackgroundModel estimate_background(const RasterImage& image, std::uint64_t seed,
                                    const BackgroundOptions& options) {
    if (image.empty()) throw InvalidArgument("estimate_background: empty image");
    if (!(options.sigma2 > 0.0)) throw InvalidArgument("estimate_background: sigma2 must be positive");
    const std::size_t target = std::clamp<std::size_t>(options.scale, 1, image.pixel_count());
    const auto seg = segment(image, target, derive_seed(seed, {tag(StreamTag::background)}), options.segmenter);
    const auto means = region_mean_colors(image, seg, boundary_regions(seg));
    const auto clusters = mean_shift(means, options.bandwidth);
    BackgroundModel model;
    for (std::size_t c = 0; c < 3; ++c) model.mu[c] = std::clamp(clusters.largest_mode[c], 0.0, 255.0);
    model.sigma2 = options.sigma2;
    return model;
}

void fill_from_background(RasterImage& image, const std::vector<std::uint32_t>& pixels,
                          const BackgroundModel& model, std::uint64_t stream) {
    Rng rng(stream);
    const double sigma = std::sqrt(model.sigma2);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto idx : pixels) {
        std::array<float, 3> v{};
        for (std::size_t c = 0; c < 3; ++c) v[c] = static_cast<float>(model.mu[c] + noise(rng));
        image.set_pixel(idx, v);
    }
}

RasterImage sample_exclusion(const RasterImage& image, const SegmentationMap& seg, RegionId region,
                             const BackgroundModel& model, std::uint64_t stream) {
    if (image.width() != seg.width() || image.height() != seg.height()) {
        throw InvalidArgument("sample_exclusion: image and segmentation dimensions differ");
    }
    if (region >= seg.region_count()) {
        throw InvalidArgument("sample_exclusion: invalid region id " + std::to_string(region));
    }
    std::vector<std::uint32_t> pixels;
    const auto& labels = seg.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == region) pixels.push_back(static_cast<std::uint32_t>(i));
    }
    RasterImage out = image;
    fill_from_background(out, pixels, model, stream);
    return out;
}

}  // namespace rmpd
