#include "rmpd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "rmpd/rng.hpp"

namespace rmpd::synthetic {

namespace {

using Inside = std::function<bool(double, double)>;

// Integer-valued samples so 8-bit round trips are exact.
float quantize(double v) { return static_cast<float>(std::clamp(std::round(v), 0.0, 255.0)); }

struct Canvas {
    std::size_t w, h;
    std::vector<float> rgb;
    BinaryMask mask;

    Canvas(std::size_t width, std::size_t height, const Rgb& bg, int noise, Rng& rng)
        : w(width), h(height), rgb(width * height * 3), mask(width, height) {
        std::uniform_int_distribution<int> jitter(-noise, noise);
        for (std::size_t i = 0; i < w * h; ++i) {
            for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = quantize(bg[c] + (noise ? jitter(rng) : 0));
        }
    }

    void paint(const Inside& inside, const Rgb& color, int noise, Rng& rng, bool label = true) {
        std::uniform_int_distribution<int> jitter(-noise, noise);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                if (!inside(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
                const std::size_t i = y * w + x;
                for (std::size_t c = 0; c < 3; ++c) rgb[3 * i + c] = quantize(color[c] + (noise ? jitter(rng) : 0));
                if (label) mask.data[i] = 1;
            }
        }
    }

    RasterImage image() const { return RasterImage(w, h, rgb); }
};

Inside disk(double cx, double cy, double r) {
    return [=](double x, double y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; };
}

Inside ellipse(double cx, double cy, double rx, double ry, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return [=](double x, double y) {
        const double u = (x - cx) * c + (y - cy) * s, v = -(x - cx) * s + (y - cy) * c;
        return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
    };
}

Inside rectangle(double x0, double y0, double x1, double y1) {
    return [=](double x, double y) { return x >= x0 && x <= x1 && y >= y0 && y <= y1; };
}

Inside triangle(double ax, double ay, double bx, double by, double cx, double cy) {
    return [=](double x, double y) {
        auto side = [](double px, double py, double qx, double qy, double rx, double ry) {
            return (qx - px) * (ry - py) - (qy - py) * (rx - px);
        };
        const double d1 = side(ax, ay, bx, by, x, y), d2 = side(bx, by, cx, cy, x, y), d3 = side(cx, cy, ax, ay, x, y);
        const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
        return !(neg && pos);
    };
}

}  // namespace

Scene disk_scene(std::size_t width, std::size_t height, double cx, double cy, double radius, const Rgb& fg,
                 const Rgb& bg) {
    Rng rng(0);
    Canvas canvas(width, height, bg, 0, rng);
    canvas.paint(disk(cx, cy, radius), fg, 0, rng);
    return {canvas.image(), canvas.mask};
}

TwoBlobScene two_blob_scene(std::uint64_t seed) {
    constexpr std::size_t size = 96;
    constexpr double radius = 12.0;
    Rng rng(derive_seed(seed, {0x7762}));
    Canvas canvas(size, size, {245.0, 245.0, 245.0}, 4, rng);
    canvas.paint(disk(28.0, 36.0, radius), kBlobA, 4, rng);
    BinaryMask blob_a = canvas.mask;
    canvas.mask = BinaryMask(size, size);
    canvas.paint(disk(66.0, 62.0, radius), kBlobB, 4, rng);
    BinaryMask blob_b = canvas.mask;

    // Reference fraction = blob area, so an intact blob scores 1.
    auto target = [&](const Rgb& color, const BinaryMask& m) {
        return ColorTarget{color, 30.0, static_cast<double>(m.count()) / static_cast<double>(size * size)};
    };
    return {canvas.image(), blob_a, blob_b, target(kBlobA, blob_a), target(kBlobB, blob_b)};
}

Scene corpus_scene(std::size_t index, std::size_t size) {
    Rng rng(derive_seed(0xC0A9u, {index}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    const double s = static_cast<double>(size);

    const Rgb bg{between(238, 250), between(238, 250), between(238, 250)};
    Canvas canvas(size, size, bg, 4, rng);
    const std::size_t shapes = index % 4 == 3 ? 2 : 1;
    for (std::size_t k = 0; k < shapes; ++k) {
        const double scale = shapes == 2 ? 0.7 : 1.0;
        const Rgb color{kCorpusTarget[0] + between(-8, 8), kCorpusTarget[1] + between(-8, 8),
                        kCorpusTarget[2] + between(-8, 8)};
        // Two-shape images put the shapes in opposite halves.
        const double lo = shapes == 2 ? (k == 0 ? 0.22 : 0.58) : 0.32;
        const double hi = shapes == 2 ? (k == 0 ? 0.42 : 0.78) : 0.68;
        const double cx = s * between(lo, hi), cy = s * between(0.3, 0.7);
        const double r = s * between(0.12, 0.2) * scale;
        Inside inside;
        switch ((index + k) % 4) {
            case 0: inside = disk(cx, cy, r); break;
            case 1: inside = ellipse(cx, cy, r * 1.3, r * 0.75, between(0.0, 3.14159)); break;
            case 2: inside = rectangle(cx - r, cy - r * 0.8, cx + r, cy + r * 0.8); break;
            default: {
                inside = triangle(cx, cy - 1.2 * r, cx - 1.2 * r, cy + r, cx + 1.2 * r, cy + r);
                break;
            }
        }
        canvas.paint(inside, color, 4, rng);
    }
    return {canvas.image(), canvas.mask};
}

ColorTarget corpus_target() { return ColorTarget{kCorpusTarget, 40.0, 0.25}; }

}  // namespace rmpd::synthetic
