#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rmpd {

using Rgb = std::array<double, 3>;

inline constexpr float kSampleMin = 0.0f;
inline constexpr float kSampleMax = 255.0f;

/// H x W x 3 float raster, row-major, interleaved RGB, samples in [0, 255].
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(std::size_t width, std::size_t height, float fill = 0.0f);
    /// Takes ownership of `data`; throws InvalidArgument on a size mismatch or
    /// any sample outside [0, 255] (NaN included).
    RasterImage(std::size_t width, std::size_t height, std::vector<float> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return width_ * height_; }
    bool empty() const noexcept { return pixel_count() == 0; }

    std::span<const float> data() const noexcept { return data_; }

    float at(std::size_t x, std::size_t y, std::size_t c) const noexcept {
        return data_[(y * width_ + x) * 3 + c];
    }
    std::array<float, 3> pixel(std::size_t index) const noexcept {
        const float* p = &data_[index * 3];
        return {p[0], p[1], p[2]};
    }
    /// Writes a pixel, clamping each channel into [0, 255].
    void set_pixel(std::size_t index, const std::array<float, 3>& rgb) noexcept;

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<float> data_;
};

/// Single-channel relevance raster. `is_signed` marks maps that may carry
/// negative values (pixel-wise engine); regional maps are clamped at zero.
struct SaliencyMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> data;
    bool is_signed = false;

    SaliencyMap() = default;
    SaliencyMap(std::size_t w, std::size_t h, float fill = 0.0f)
        : width(w), height(h), data(w * h, fill) {}

    float at(std::size_t x, std::size_t y) const noexcept { return data[y * width + x]; }
    float& at(std::size_t x, std::size_t y) noexcept { return data[y * width + x]; }
};

struct BinaryMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;  // 0 or 1

    BinaryMask() = default;
    BinaryMask(std::size_t w, std::size_t h, bool fill = false)
        : width(w), height(h), data(w * h, fill ? 1 : 0) {}

    bool at(std::size_t x, std::size_t y) const noexcept { return data[y * width + x] != 0; }
    std::size_t count() const noexcept;
};

enum class SaliencyFormat { raw, heatmap };

// I/O. PNG (any bit depth/color type libpng can convert) and binary PNM
// (P5/P6, maxval 255) are accepted on input; image outputs are PNG.
RasterImage load_image(const std::filesystem::path& path);
void save_image(const RasterImage& image, const std::filesystem::path& path);

/// Grayscale (or RGB, averaged) 8-bit mask; value >= 128 is true.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

void save_saliency(const SaliencyMap& map, const std::filesystem::path& path,
                   SaliencyFormat mode);
/// Reads the "PF-GRAY <w> <h>\n" + little-endian f32 raw format.
SaliencyMap load_saliency_raw(const std::filesystem::path& path);

/// Region labels as a 16-bit grayscale PNG (every label must be < 65536).
struct LabelRaster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint32_t> labels;
};
void save_label_image(const LabelRaster& raster, const std::filesystem::path& path);
LabelRaster load_label_image(const std::filesystem::path& path);

/// 8-bit RGB color-mapped rendering of a min-max normalized map.
RasterImage heatmap(const SaliencyMap& map);
/// Heatmap alpha-blended over `base` (alpha = weight of the heatmap).
RasterImage overlay(const RasterImage& base, const SaliencyMap& map, float alpha = 0.5f);

/// Jet color map; t is clamped into [0, 1].
std::array<std::uint8_t, 3> jet_color(double t) noexcept;

/// Min-max normalization into [0, 1]; a constant map normalizes to all zeros.
std::vector<float> normalize_min_max(std::span<const float> values);

}  // namespace rmpd
