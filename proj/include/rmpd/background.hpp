#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include "rmpd/image.hpp"
#include "rmpd/segmentation.hpp"

namespace rmpd {

/// Isotropic per-channel normal N(mu, sigma2) used to fill excluded regions.
struct BackgroundModel {
    Rgb mu{0.0, 0.0, 0.0};
    double sigma2 = 10.0;
};

struct ClusterResult {
    std::vector<Rgb> modes;
    std::vector<std::size_t> assignments;  // per input point
    std::vector<std::size_t> sizes;        // points per mode
    Rgb largest_mode{0.0, 0.0, 0.0};
    std::size_t largest_index = 0;
};

struct BackgroundOptions {
    double bandwidth = 25.0;
    double sigma2 = 10.0;
    std::size_t scale = 256;
    SegmenterOptions segmenter{};
};

/// Mean RGB per listed region, in ascending region id order.
std::vector<Rgb> region_mean_colors(const RasterImage& image, const SegmentationMap& seg,
                                    const std::set<RegionId>& regions);

/// Flat-kernel mean shift. Each point climbs until its shift is < 0.1 (or
/// 100 iterations); converged points within bandwidth/2 of an earlier mode
/// join it. The largest cluster wins, ties to the first discovered mode.
ClusterResult mean_shift(const std::vector<Rgb>& points, double bandwidth);

/// One flat-kernel mean-shift step from `at`; used by the fixed-point check.
Rgb mean_shift_step(const std::vector<Rgb>& points, const Rgb& at, double bandwidth);

/// Boundary-prior background: segment at `options.scale` regions (clamped to
/// the pixel count), take the mean colour of every border-touching region,
/// and use the mode of the largest mean-shift cluster as mu.
BackgroundModel estimate_background(const RasterImage& image, std::uint64_t seed,
                                    const BackgroundOptions& options = {});

/// Copy of `image` with every pixel of `region` resampled from the model
/// (channels independent, clamped to [0, 255]); other pixels untouched.
/// `stream` fully determines the samples.
RasterImage sample_exclusion(const RasterImage& image, const SegmentationMap& seg, RegionId region,
                             const BackgroundModel& model, std::uint64_t stream);

/// In-place variant over an explicit pixel list.
void fill_from_background(RasterImage& image, const std::vector<std::uint32_t>& pixels,
                          const BackgroundModel& model, std::uint64_t stream);

}  // namespace rmpd
