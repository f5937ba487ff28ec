#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rmpd/errors.hpp"
#include "rmpd/prediction_difference.hpp"
#include "rmpd/rng.hpp"

namespace rmpd {

namespace {

constexpr double kVarianceFloor = 1.0;

struct Window {
    std::size_t x0, x1, y0, y1;  // inclusive, clipped

    bool contains(std::size_t x, std::size_t y) const noexcept {
        return x >= x0 && x <= x1 && y >= y0 && y <= y1;
    }
};

// side x side window centred at (cx, cy); even sides extend one further
// to the right/bottom.
Window centred(std::size_t cx, std::size_t cy, std::size_t side, std::size_t w, std::size_t h) {
    const auto half = static_cast<long>((side - 1) / 2);
    const long x0 = static_cast<long>(cx) - half, y0 = static_cast<long>(cy) - half;
    const long x1 = x0 + static_cast<long>(side) - 1, y1 = y0 + static_cast<long>(side) - 1;
    return {static_cast<std::size_t>(std::max(0L, x0)), static_cast<std::size_t>(std::min(static_cast<long>(w) - 1, x1)),
            static_cast<std::size_t>(std::max(0L, y0)), static_cast<std::size_t>(std::min(static_cast<long>(h) - 1, y1))};
}

struct ChannelStats {
    Rgb mean{};
    Rgb stddev{};
};

template <typename Include>
ChannelStats stats_over(const RasterImage& image, const Window& win, Include include) {
    Rgb sum{}, sum2{};
    std::size_t n = 0;
    for (std::size_t y = win.y0; y <= win.y1; ++y) {
        for (std::size_t x = win.x0; x <= win.x1; ++x) {
            if (!include(x, y)) continue;
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = image.at(x, y, c);
                sum[c] += v;
                sum2[c] += v * v;
            }
            ++n;
        }
    }
    ChannelStats s;
    if (n == 0) return s;
    for (std::size_t c = 0; c < 3; ++c) {
        s.mean[c] = sum[c] / static_cast<double>(n);
        const double var = std::max(0.0, sum2[c] / static_cast<double>(n) - s.mean[c] * s.mean[c]);
        s.stddev[c] = std::sqrt(std::max(var, kVarianceFloor));
    }
    return s;
}

}  // namespace

PixelwiseResult pixelwise_pd(ClassifierHandle& f, const RasterImage& image, ClassSelector cls,
                             const BaselineConfig& cfg) {
    if (cfg.k < 1 || cfg.l <= cfg.k) throw InvalidArgument("patch sizes must satisfy l > k >= 1");
    if (cfg.samples < 1) throw InvalidArgument("samples must be at least 1");
    const std::size_t w = image.width(), h = image.height();
    if (w < cfg.l || h < cfg.l) {
        throw InvalidArgument("image " + std::to_string(w) + "x" + std::to_string(h) +
                              " is smaller than the outer patch " + std::to_string(cfg.l));
    }

    PixelwiseResult result;
    const Probabilities base = f.predict(image);
    result.class_id = cls.resolve(base);
    result.baseline = base[result.class_id];

    const Window whole{0, w - 1, 0, h - 1};
    const ChannelStats global = stats_over(image, whole, [](std::size_t, std::size_t) { return true; });

    std::vector<double> sums(w * h, 0.0);
    std::vector<std::uint32_t> counts(w * h, 0);
    RasterImage work = image;
    for (std::size_t cy = 0; cy < h; ++cy) {
        for (std::size_t cx = 0; cx < w; ++cx) {
            const Window inner = centred(cx, cy, cfg.k, w, h);
            const Window outer = centred(cx, cy, cfg.l, w, h);
            bool ring_empty = true;
            ChannelStats ring = stats_over(image, outer, [&](std::size_t x, std::size_t y) {
                const bool in_ring = !inner.contains(x, y);
                ring_empty = ring_empty && !in_ring;
                return in_ring;
            });
            // Clipping at a corner can swallow the whole ring when l == k + 1.
            if (ring_empty) ring = global;

            Rng rng(derive_seed(cfg.seed, {tag(StreamTag::pixelwise), cy * w + cx}));
            std::normal_distribution<double> unit(0.0, 1.0);
            double sum = 0.0;
            for (std::size_t s = 0; s < cfg.samples; ++s) {
                for (std::size_t y = inner.y0; y <= inner.y1; ++y) {
                    for (std::size_t x = inner.x0; x <= inner.x1; ++x) {
                        std::array<float, 3> v{};
                        for (std::size_t c = 0; c < 3; ++c) {
                            v[c] = static_cast<float>(ring.mean[c] + ring.stddev[c] * unit(rng));
                        }
                        work.set_pixel(y * w + x, v);
                    }
                }
                sum += f.predict(work)[result.class_id];
            }
            for (std::size_t y = inner.y0; y <= inner.y1; ++y) {
                for (std::size_t x = inner.x0; x <= inner.x1; ++x) work.set_pixel(y * w + x, image.pixel(y * w + x));
            }
            const double diff = cfg.g(result.baseline, sum / static_cast<double>(cfg.samples));
            for (std::size_t y = inner.y0; y <= inner.y1; ++y) {
                for (std::size_t x = inner.x0; x <= inner.x1; ++x) {
                    sums[y * w + x] += diff;
                    ++counts[y * w + x];
                }
            }
        }
    }

    result.map = SaliencyMap(w, h);
    result.map.is_signed = true;
    for (std::size_t i = 0; i < sums.size(); ++i) {
        result.map.data[i] = static_cast<float>(sums[i] / static_cast<double>(counts[i]));
    }
    return result;
}

}  // namespace rmpd
