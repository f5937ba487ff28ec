#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include "rmpd/image.hpp"

namespace rmpd {

using RegionId = std::uint32_t;

/// Per-pixel region labels forming the dense set {0, ..., region_count-1};
/// every region is 4-connected.
class SegmentationMap {
public:
    SegmentationMap() = default;
    /// Validates density of labels (not connectivity; see is_valid_partition).
    SegmentationMap(std::size_t width, std::size_t height, std::vector<RegionId> labels);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t region_count() const noexcept { return region_count_; }
    const std::vector<RegionId>& labels() const noexcept { return labels_; }
    RegionId label(std::size_t x, std::size_t y) const noexcept { return labels_[y * width_ + x]; }

    /// Pixel indices per region, in raster order.
    std::vector<std::vector<std::uint32_t>> region_pixels() const;
    std::vector<std::size_t> region_areas() const;

    friend bool operator==(const SegmentationMap&, const SegmentationMap&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t region_count_ = 0;
    std::vector<RegionId> labels_;
};

enum class ColorSpace { rgb, lab };

struct SegmenterOptions {
    double compactness = 10.0;
    int iterations = 10;
    ColorSpace colorspace = ColorSpace::rgb;
};

/// Multi-scale ladder 2^1 ... 2^r.
class ScaleLadder {
public:
    explicit ScaleLadder(int r);
    int r() const noexcept { return r_; }
    const std::vector<std::size_t>& target_counts() const noexcept { return counts_; }

private:
    int r_;
    std::vector<std::size_t> counts_;
};

/// SLIC-style superpixels with a requested region count. The achieved count
/// lies in [target_regions, 2 * target_regions]. Deterministic in
/// (image, target_regions, seed, options).
SegmentationMap segment(const RasterImage& image, std::size_t target_regions, std::uint64_t seed,
                        const SegmenterOptions& options = {});

/// One segmentation per ladder scale, coarse to fine. Scale j uses a seed
/// derived from (seed, j).
std::vector<SegmentationMap> segment_ladder(const RasterImage& image, const ScaleLadder& ladder,
                                            std::uint64_t seed, const SegmenterOptions& options = {});

/// Seed used for ladder scale `j` (1-based); exposed so callers segmenting a
/// single scale reproduce the ladder exactly.
std::uint64_t ladder_scale_seed(std::uint64_t seed, int j) noexcept;

/// Regions owning at least one pixel of the outermost row/column ring.
std::set<RegionId> boundary_regions(const SegmentationMap& seg);

/// Checks density, 4-connectivity of every region, and label coverage.
bool is_valid_partition(const SegmentationMap& seg);

/// Label raster to 4-connected components, relabeled densely in raster
/// first-occurrence order. Building block of `segment`, exposed for tests.
SegmentationMap relabel_connected(std::size_t width, std::size_t height,
                                  const std::vector<std::uint32_t>& labels);

}  // namespace rmpd
