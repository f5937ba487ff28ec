#include "rmpd/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <string>

#include "rmpd/errors.hpp"
#include "rmpd/rng.hpp"

namespace rmpd {

namespace {

using Labels = std::vector<std::uint32_t>;

double srgb_to_linear(double v) {
    v /= 255.0;
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// Per-pixel clustering features, 3 doubles per pixel.
std::vector<double> color_features(const RasterImage& image, ColorSpace space) {
    const auto src = image.data();
    std::vector<double> out(src.begin(), src.end());
    if (space == ColorSpace::rgb) return out;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const double r = srgb_to_linear(src[3 * i]);
        const double g = srgb_to_linear(src[3 * i + 1]);
        const double b = srgb_to_linear(src[3 * i + 2]);
        const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
        const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
        const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
        // L in [0,100]; scaled to [0,255] so the compactness knob keeps its meaning.
        out[3 * i] = (116.0 * fy - 16.0) * 2.55;
        out[3 * i + 1] = 500.0 * (fx - fy);
        out[3 * i + 2] = 200.0 * (fy - fz);
    }
    return out;
}

struct Center {
    double color[3];
    double x;
    double y;
};

double color_dist2(const double* a, const double* b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

// Exactly `target` seed positions on a row layout matched to the aspect ratio.
std::vector<std::size_t> initial_seeds(const std::vector<double>& feat, std::size_t w, std::size_t h,
                                       std::size_t target, std::uint64_t seed) {
    const double ideal_rows = std::sqrt(static_cast<double>(target) * static_cast<double>(h) /
                                        static_cast<double>(w));
    std::size_t rows = static_cast<std::size_t>(std::max(1.0, std::round(ideal_rows)));
    rows = std::min({rows, target, h});
    while ((target + rows - 1) / rows > w) ++rows;

    Rng rng(derive_seed(seed, {tag(StreamTag::segmentation), target}));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    auto gradient = [&](std::size_t x, std::size_t y) {
        const std::size_t xl = x > 0 ? x - 1 : x, xr = x + 1 < w ? x + 1 : x;
        const std::size_t yu = y > 0 ? y - 1 : y, yd = y + 1 < h ? y + 1 : y;
        return color_dist2(&feat[3 * (y * w + xr)], &feat[3 * (y * w + xl)]) +
               color_dist2(&feat[3 * (yd * w + x)], &feat[3 * (yu * w + x)]);
    };

    std::vector<std::size_t> seeds;
    std::vector<std::uint8_t> taken(w * h, 0);
    const std::size_t base = target / rows, extra = target % rows;
    const double row_h = static_cast<double>(h) / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t n = base + (r < extra ? 1 : 0);
        const double col_w = static_cast<double>(w) / static_cast<double>(n);
        const double amp = 0.125 * std::min(col_w, row_h);
        for (std::size_t c = 0; c < n; ++c) {
            const double fx = (static_cast<double>(c) + 0.5) * col_w + amp * jitter(rng);
            const double fy = (static_cast<double>(r) + 0.5) * row_h + amp * jitter(rng);
            std::size_t x = std::min(w - 1, static_cast<std::size_t>(std::max(0.0, fx)));
            std::size_t y = std::min(h - 1, static_cast<std::size_t>(std::max(0.0, fy)));
            // Move to the lowest-gradient free pixel of the 3x3 neighbourhood.
            std::size_t best = y * w + x;
            double best_g = gradient(x, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto nx = static_cast<long>(x) + dx, ny = static_cast<long>(y) + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
                    const std::size_t idx = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    const double g = gradient(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
                    if (g < best_g && !taken[idx]) {
                        best_g = g;
                        best = idx;
                    }
                }
            }
            if (taken[best]) best = y * w + x;
            taken[best] = 1;
            seeds.push_back(best);
        }
    }
    return seeds;
}

Labels cluster(const std::vector<double>& feat, std::size_t w, std::size_t h, std::size_t target,
               std::uint64_t seed, const SegmenterOptions& opt) {
    const std::size_t n = w * h;
    std::vector<Center> centers;
    for (std::size_t idx : initial_seeds(feat, w, h, target, seed)) {
        centers.push_back({{feat[3 * idx], feat[3 * idx + 1], feat[3 * idx + 2]},
                           static_cast<double>(idx % w), static_cast<double>(idx / w)});
    }
    const double step = std::sqrt(static_cast<double>(n) / static_cast<double>(target));
    const double spatial_weight = (opt.compactness / step) * (opt.compactness / step);
    const long radius = static_cast<long>(std::ceil(2.0 * step));

    Labels labels(n, 0);
    std::vector<double> dist(n);
    const int iterations = std::max(1, opt.iterations);
    for (int it = 0; it < iterations; ++it) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const Center& ctr = centers[k];
            const long cx = std::lround(ctr.x), cy = std::lround(ctr.y);
            const long x0 = std::max(0L, cx - radius), x1 = std::min(static_cast<long>(w) - 1, cx + radius);
            const long y0 = std::max(0L, cy - radius), y1 = std::min(static_cast<long>(h) - 1, cy + radius);
            for (long y = y0; y <= y1; ++y) {
                for (long x = x0; x <= x1; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x);
                    const double dx = static_cast<double>(x) - ctr.x, dy = static_cast<double>(y) - ctr.y;
                    const double d = color_dist2(&feat[3 * i], ctr.color) + (dx * dx + dy * dy) * spatial_weight;
                    if (d < dist[i]) {
                        dist[i] = d;
                        labels[i] = static_cast<std::uint32_t>(k);
                    }
                }
            }
        }
        // Pixels outside every search window fall back to an exhaustive search.
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isfinite(dist[i])) continue;
            const double px = static_cast<double>(i % w), py = static_cast<double>(i / w);
            for (std::size_t k = 0; k < centers.size(); ++k) {
                const double dx = px - centers[k].x, dy = py - centers[k].y;
                const double d = color_dist2(&feat[3 * i], centers[k].color) + (dx * dx + dy * dy) * spatial_weight;
                if (d < dist[i]) {
                    dist[i] = d;
                    labels[i] = static_cast<std::uint32_t>(k);
                }
            }
        }
        if (it + 1 == iterations) break;
        std::vector<double> sums(centers.size() * 5, 0.0);
        std::vector<std::size_t> counts(centers.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = &sums[5 * labels[i]];
            s[0] += feat[3 * i];
            s[1] += feat[3 * i + 1];
            s[2] += feat[3 * i + 2];
            s[3] += static_cast<double>(i % w);
            s[4] += static_cast<double>(i / w);
            ++counts[labels[i]];
        }
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (counts[k] == 0) continue;
            const double inv = 1.0 / static_cast<double>(counts[k]);
            const double* s = &sums[5 * k];
            centers[k] = {{s[0] * inv, s[1] * inv, s[2] * inv}, s[3] * inv, s[4] * inv};
        }
    }
    return labels;
}

// Dense relabeling of 4-connected components, raster first-occurrence order.
std::size_t components(std::size_t w, std::size_t h, const Labels& in, Labels& out) {
    const std::size_t n = w * h;
    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    out.assign(n, unset);
    std::vector<std::size_t> stack;
    std::uint32_t next = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (out[start] != unset) continue;
        const std::uint32_t src = in[start];
        out[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const std::size_t x = i % w, y = i / w;
            auto visit = [&](std::size_t j) {
                if (out[j] == unset && in[j] == src) {
                    out[j] = next;
                    stack.push_back(j);
                }
            };
            if (x > 0) visit(i - 1);
            if (x + 1 < w) visit(i + 1);
            if (y > 0) visit(i - w);
            if (y + 1 < h) visit(i + w);
        }
        ++next;
    }
    return next;
}

// Repeatedly merges the smallest region into its largest 4-adjacent
// neighbour while it is below `min_area` and more than `floor_count` regions
// remain. Input labels must be dense connected components.
std::size_t merge_regions(std::size_t w, std::size_t h, Labels& labels, std::size_t count,
                          double min_area, std::size_t floor_count) {
    if (count <= floor_count) return count;
    std::vector<std::size_t> area(count, 0);
    for (auto l : labels) ++area[l];
    std::vector<std::vector<std::uint32_t>> adj(count);
    auto link = [&](std::uint32_t a, std::uint32_t b) {
        if (a == b) return;
        adj[a].push_back(b);
        adj[b].push_back(a);
    };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            if (x + 1 < w) link(labels[i], labels[i + 1]);
            if (y + 1 < h) link(labels[i], labels[i + w]);
        }
    }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }

    std::vector<std::uint32_t> parent(count);
    std::iota(parent.begin(), parent.end(), 0u);
    std::vector<std::uint8_t> alive(count, 1);
    using Entry = std::pair<std::size_t, std::uint32_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (std::uint32_t r = 0; r < count; ++r) queue.emplace(area[r], r);

    std::size_t remaining = count;
    while (remaining > floor_count && !queue.empty()) {
        auto [a, r] = queue.top();
        queue.pop();
        if (!alive[r] || a != area[r]) continue;
        if (!(static_cast<double>(a) < min_area)) break;
        if (adj[r].empty()) continue;
        std::uint32_t target = adj[r].front();
        for (auto nb : adj[r]) {
            if (area[nb] > area[target] || (area[nb] == area[target] && nb < target)) target = nb;
        }
        alive[r] = 0;
        parent[r] = target;
        area[target] += area[r];
        for (auto nb : adj[r]) {
            if (nb == target) continue;
            auto& back = adj[nb];
            back.erase(std::remove(back.begin(), back.end(), r), back.end());
            if (std::find(back.begin(), back.end(), target) == back.end()) back.push_back(target);
            if (std::find(adj[target].begin(), adj[target].end(), nb) == adj[target].end()) {
                adj[target].push_back(nb);
            }
        }
        auto& tadj = adj[target];
        tadj.erase(std::remove(tadj.begin(), tadj.end(), r), tadj.end());
        adj[r].clear();
        --remaining;
        queue.emplace(area[target], target);
    }

    std::function<std::uint32_t(std::uint32_t)> root = [&](std::uint32_t r) {
        while (parent[r] != r) r = parent[r] = parent[parent[r]];
        return r;
    };
    for (auto& l : labels) l = root(l);
    Labels dense;
    const std::size_t result = components(w, h, labels, dense);
    labels = std::move(dense);
    return result;
}

// Splits the largest region in two halves along its longer bounding-box axis.
std::size_t split_largest(std::size_t w, std::size_t h, Labels& labels, std::size_t count) {
    std::vector<std::size_t> area(count, 0);
    for (auto l : labels) ++area[l];
    const auto largest = static_cast<std::uint32_t>(
        std::max_element(area.begin(), area.end()) - area.begin());
    std::vector<std::size_t> pixels;
    std::size_t x0 = w, x1 = 0, y0 = h, y1 = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != largest) continue;
        pixels.push_back(i);
        x0 = std::min(x0, i % w);
        x1 = std::max(x1, i % w);
        y0 = std::min(y0, i / w);
        y1 = std::max(y1, i / w);
    }
    const bool along_x = (x1 - x0) >= (y1 - y0);
    auto key = [&](std::size_t i) {
        return along_x ? std::pair{i % w, i / w} : std::pair{i / w, i % w};
    };
    std::sort(pixels.begin(), pixels.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    for (std::size_t k = 0; k < pixels.size() / 2; ++k) labels[pixels[k]] = static_cast<std::uint32_t>(count);
    Labels dense;
    const std::size_t result = components(w, h, labels, dense);
    labels = std::move(dense);
    return result;
}

}  // namespace

SegmentationMap::SegmentationMap(std::size_t width, std::size_t height, std::vector<RegionId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
    if (labels_.size() != width_ * height_ || labels_.empty()) {
        throw InvalidArgument("segmentation label count does not match dimensions");
    }
    const RegionId max_label = *std::max_element(labels_.begin(), labels_.end());
    std::vector<std::uint8_t> used(static_cast<std::size_t>(max_label) + 1, 0);
    for (auto l : labels_) used[l] = 1;
    if (std::find(used.begin(), used.end(), std::uint8_t{0}) != used.end()) {
        throw InvalidArgument("segmentation labels are not dense");
    }
    region_count_ = used.size();
}

std::vector<std::vector<std::uint32_t>> SegmentationMap::region_pixels() const {
    std::vector<std::vector<std::uint32_t>> out(region_count_);
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(static_cast<std::uint32_t>(i));
    return out;
}

std::vector<std::size_t> SegmentationMap::region_areas() const {
    std::vector<std::size_t> out(region_count_, 0);
    for (auto l : labels_) ++out[l];
    return out;
}

ScaleLadder::ScaleLadder(int r) : r_(r) {
    if (r < 1 || r > 30) throw InvalidArgument("scale count r must be in [1, 30], got " + std::to_string(r));
    for (int j = 1; j <= r; ++j) counts_.push_back(std::size_t{1} << j);
}

SegmentationMap relabel_connected(std::size_t width, std::size_t height, const Labels& labels) {
    if (labels.size() != width * height) throw InvalidArgument("label raster size mismatch");
    Labels dense;
    components(width, height, labels, dense);
    return SegmentationMap(width, height, std::move(dense));
}

SegmentationMap segment(const RasterImage& image, std::size_t target_regions, std::uint64_t seed,
                        const SegmenterOptions& options) {
    const std::size_t w = image.width(), h = image.height(), n = image.pixel_count();
    if (n == 0) throw InvalidArgument("cannot segment an empty image");
    if (target_regions < 1 || target_regions > n) {
        throw InvalidArgument("target_regions " + std::to_string(target_regions) +
                              " outside [1, " + std::to_string(n) + "]");
    }
    if (target_regions == 1) return SegmentationMap(w, h, Labels(n, 0));

    const auto feat = color_features(image, options.colorspace);
    Labels labels;
    std::size_t count = components(w, h, cluster(feat, w, h, target_regions, seed, options), labels);

    const double min_area = static_cast<double>(n) / (4.0 * static_cast<double>(target_regions));
    count = merge_regions(w, h, labels, count, min_area, target_regions);
    while (count < target_regions) count = split_largest(w, h, labels, count);
    count = merge_regions(w, h, labels, count, std::numeric_limits<double>::infinity(), 2 * target_regions);
    return SegmentationMap(w, h, std::move(labels));
}

std::uint64_t ladder_scale_seed(std::uint64_t seed, int j) noexcept {
    return derive_seed(seed, {tag(StreamTag::segmentation), static_cast<std::uint64_t>(j)});
}

std::vector<SegmentationMap> segment_ladder(const RasterImage& image, const ScaleLadder& ladder,
                                            std::uint64_t seed, const SegmenterOptions& options) {
    std::vector<SegmentationMap> out;
    out.reserve(ladder.target_counts().size());
    int j = 1;
    for (std::size_t target : ladder.target_counts()) {
        out.push_back(segment(image, target, ladder_scale_seed(seed, j++), options));
    }
    return out;
}

std::set<RegionId> boundary_regions(const SegmentationMap& seg) {
    std::set<RegionId> out;
    const std::size_t w = seg.width(), h = seg.height();
    for (std::size_t x = 0; x < w; ++x) {
        out.insert(seg.label(x, 0));
        out.insert(seg.label(x, h - 1));
    }
    for (std::size_t y = 0; y < h; ++y) {
        out.insert(seg.label(0, y));
        out.insert(seg.label(w - 1, y));
    }
    return out;
}

bool is_valid_partition(const SegmentationMap& seg) {
    if (seg.labels().size() != seg.width() * seg.height() || seg.region_count() == 0) return false;
    Labels comp;
    const std::size_t n_comp = components(seg.width(), seg.height(), seg.labels(), comp);
    if (n_comp != seg.region_count()) return false;
    std::vector<std::uint8_t> used(seg.region_count(), 0);
    for (auto l : seg.labels()) {
        if (l >= seg.region_count()) return false;
        used[l] = 1;
    }
    return std::all_of(used.begin(), used.end(), [](std::uint8_t u) { return u != 0; });
}

}  // namespace rmpd
