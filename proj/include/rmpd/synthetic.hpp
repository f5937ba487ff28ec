#pragma once

#include <cstddef>
#include <cstdint>

#include "rmpd/classifier.hpp"
#include "rmpd/image.hpp"

// Deterministic synthetic scenes with exact ground truth, used by the test
// suites and by the asset generator that writes the shipped corpus.
namespace rmpd::synthetic {

inline constexpr Rgb kWhite{255.0, 255.0, 255.0};
inline constexpr Rgb kRed{255.0, 0.0, 0.0};
inline constexpr Rgb kCorpusTarget{220.0, 30.0, 30.0};
inline constexpr Rgb kBlobA{220.0, 30.0, 30.0};
inline constexpr Rgb kBlobB{30.0, 30.0, 220.0};

struct Scene {
    RasterImage image;
    BinaryMask mask;
};

/// Disk of colour `fg` on `bg`; a pixel belongs to the disk when its centre
/// lies inside the circle.
Scene disk_scene(std::size_t width, std::size_t height, double cx, double cy, double radius,
                 const Rgb& fg = kRed, const Rgb& bg = kWhite);

struct TwoBlobScene {
    RasterImage image;
    BinaryMask blob_a;
    BinaryMask blob_b;
    ColorTarget target_a;
    ColorTarget target_b;
};

/// 96x96 near-white image with a red blob A and a blue blob B.
TwoBlobScene two_blob_scene(std::uint64_t seed = 1);

/// Corpus item `index`: one or two red-family shapes (disk, ellipse,
/// rectangle, triangle) on a near-white noisy background.
Scene corpus_scene(std::size_t index, std::size_t size = 64);

/// The colour target matching every corpus object.
ColorTarget corpus_target();

}  // namespace rmpd::synthetic
