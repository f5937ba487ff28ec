#include "rmpd/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <png.h>

#include "rmpd/errors.hpp"

namespace rmpd {

namespace fs = std::filesystem;

namespace {

float clamp_sample(float v) noexcept {
    if (!(v >= kSampleMin)) return kSampleMin;  // also maps NaN to 0
    return v > kSampleMax ? kSampleMax : v;
}

std::uint8_t to_u8(float v) noexcept {
    return static_cast<std::uint8_t>(std::lround(clamp_sample(v)));
}

std::vector<char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<char>& bytes) {
    static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

struct Decoded {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<std::uint8_t> samples;
};

Decoded decode_png(const std::vector<char>& bytes, std::size_t channels, const fs::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError("unsupported or corrupt PNG '" + path.string() + "': " + img.message);
    }
    img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Decoded out{img.width, img.height, channels, {}};
    out.samples.resize(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, out.samples.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("failed to decode PNG '" + path.string() + "': " + msg);
    }
    return out;
}

// Binary PNM: P5 (gray) or P6 (RGB), maxval 255, comments allowed in the header.
Decoded decode_pnm(const std::vector<char>& bytes, const fs::path& path) {
    std::size_t pos = 2;
    auto next_token = [&]() -> long {
        while (pos < bytes.size()) {
            char ch = bytes[pos];
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos;
            } else {
                break;
            }
        }
        long value = 0;
        bool any = false;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > (1L << 30)) throw IoError("PNM header value too large in '" + path.string() + "'");
            ++pos;
            any = true;
        }
        if (!any) throw IoError("malformed PNM header in '" + path.string() + "'");
        return value;
    };
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    const long w = next_token();
    const long h = next_token();
    const long maxval = next_token();
    if (maxval != 255) throw IoError("only 8-bit PNM is supported ('" + path.string() + "')");
    ++pos;  // single whitespace after maxval
    Decoded out{static_cast<std::size_t>(w), static_cast<std::size_t>(h), channels, {}};
    const std::size_t need = out.width * out.height * channels;
    if (bytes.size() < pos + need) throw IoError("truncated PNM '" + path.string() + "'");
    out.samples.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return out;
}

Decoded decode_any(const fs::path& path, std::size_t want_channels) {
    const auto bytes = read_file(path);
    Decoded d;
    if (is_png(bytes)) {
        d = decode_png(bytes, want_channels, path);
    } else if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        d = decode_pnm(bytes, path);
    } else {
        throw IoError("unsupported image format: '" + path.string() + "'");
    }
    if (d.width == 0 || d.height == 0) throw IoError("zero-sized image: '" + path.string() + "'");
    return d;
}

void write_png(const fs::path& path, std::size_t w, std::size_t h, png_uint_32 format,
               const void* buffer) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer, 0, nullptr)) {
        throw IoError("failed to write '" + path.string() + "': " + img.message);
    }
}

void put_u8_le_f32(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

}  // namespace

RasterImage::RasterImage(std::size_t width, std::size_t height, float fill)
    : width_(width), height_(height), data_(width * height * 3, clamp_sample(fill)) {}

RasterImage::RasterImage(std::size_t width, std::size_t height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_ * 3) {
        throw InvalidArgument("image data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(width_) + "x" +
                              std::to_string(height_) + "x3");
    }
    for (float s : data_) {
        if (!(s >= kSampleMin && s <= kSampleMax)) {
            throw InvalidArgument("image sample outside [0, 255]");
        }
    }
}

void RasterImage::set_pixel(std::size_t index, const std::array<float, 3>& rgb) noexcept {
    float* p = &data_[index * 3];
    for (std::size_t c = 0; c < 3; ++c) p[c] = clamp_sample(rgb[c]);
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

RasterImage load_image(const fs::path& path) {
    Decoded d = decode_any(path, 3);
    std::vector<float> samples(d.width * d.height * 3);
    if (d.channels == 3) {
        std::transform(d.samples.begin(), d.samples.end(), samples.begin(),
                       [](std::uint8_t v) { return static_cast<float>(v); });
    } else {
        for (std::size_t i = 0; i < d.samples.size(); ++i) {
            samples[3 * i] = samples[3 * i + 1] = samples[3 * i + 2] = d.samples[i];
        }
    }
    return RasterImage(d.width, d.height, std::move(samples));
}

void save_image(const RasterImage& image, const fs::path& path) {
    if (image.empty()) throw InvalidArgument("cannot save an empty image");
    std::vector<std::uint8_t> buf(image.data().size());
    std::transform(image.data().begin(), image.data().end(), buf.begin(), to_u8);
    write_png(path, image.width(), image.height(), PNG_FORMAT_RGB, buf.data());
}

BinaryMask load_mask(const fs::path& path) {
    Decoded d = decode_any(path, 1);
    BinaryMask mask(d.width, d.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        unsigned v = d.samples[i * d.channels];
        if (d.channels == 3) {
            v = (d.samples[3 * i] + d.samples[3 * i + 1] + d.samples[3 * i + 2]) / 3u;
        }
        mask.data[i] = v >= 128 ? 1 : 0;
    }
    return mask;
}

void save_mask(const BinaryMask& mask, const fs::path& path) {
    std::vector<std::uint8_t> buf(mask.data.size());
    std::transform(mask.data.begin(), mask.data.end(), buf.begin(),
                   [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
    write_png(path, mask.width, mask.height, PNG_FORMAT_GRAY, buf.data());
}

void save_label_image(const LabelRaster& raster, const fs::path& path) {
    if (raster.labels.size() != raster.width * raster.height) throw InvalidArgument("label raster size mismatch");
    std::vector<std::uint16_t> buf(raster.labels.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        if (raster.labels[i] > 0xffffu) throw InvalidArgument("label exceeds 16 bits");
        buf[i] = static_cast<std::uint16_t>(raster.labels[i]);
    }
    write_png(path, raster.width, raster.height, PNG_FORMAT_LINEAR_Y, buf.data());
}

LabelRaster load_label_image(const fs::path& path) {
    const auto bytes = read_file(path);
    if (!is_png(bytes)) throw IoError("not a PNG file: '" + path.string() + "'");
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw IoError("cannot decode '" + path.string() + "': " + img.message);
    }
    img.format = PNG_FORMAT_LINEAR_Y;
    std::vector<std::uint16_t> buf(static_cast<std::size_t>(img.width) * img.height);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("cannot decode '" + path.string() + "': " + img.message);
    }
    return {img.width, img.height, std::vector<std::uint32_t>(buf.begin(), buf.end())};
}

std::vector<float> normalize_min_max(std::span<const float> values) {
    std::vector<float> out(values.size(), 0.0f);
    if (values.empty()) return out;
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = static_cast<double>(*hi) - min;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<float>((values[i] - min) / range);
    }
    return out;
}

std::array<std::uint8_t, 3> jet_color(double t) noexcept {
    t = std::clamp(t, 0.0, 1.0);
    auto channel = [t](double offset) {
        double v = 1.5 - std::abs(4.0 * t - offset);
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    };
    // red peaks at t=1 side, blue at t=0 side
    return {channel(3.0), channel(2.0), channel(1.0)};
}

RasterImage heatmap(const SaliencyMap& map) {
    const auto norm = normalize_min_max(map.data);
    std::vector<float> rgb(norm.size() * 3);
    for (std::size_t i = 0; i < norm.size(); ++i) {
        auto c = jet_color(norm[i]);
        rgb[3 * i] = c[0];
        rgb[3 * i + 1] = c[1];
        rgb[3 * i + 2] = c[2];
    }
    return RasterImage(map.width, map.height, std::move(rgb));
}

RasterImage overlay(const RasterImage& base, const SaliencyMap& map, float alpha) {
    if (base.width() != map.width || base.height() != map.height) {
        throw InvalidArgument("overlay: image and saliency map dimensions differ");
    }
    const RasterImage heat = heatmap(map);
    std::vector<float> out(base.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = clamp_sample(alpha * heat.data()[i] + (1.0f - alpha) * base.data()[i]);
    }
    return RasterImage(base.width(), base.height(), std::move(out));
}

void save_saliency(const SaliencyMap& map, const fs::path& path, SaliencyFormat mode) {
    if (map.data.size() != map.width * map.height || map.data.empty()) {
        throw InvalidArgument("save_saliency: invalid map dimensions");
    }
    if (mode == SaliencyFormat::heatmap) {
        save_image(heatmap(map), path);
        return;
    }
    std::string buf = "PF-GRAY " + std::to_string(map.width) + " " + std::to_string(map.height) + "\n";
    buf.reserve(buf.size() + map.data.size() * 4);
    for (float v : map.data) put_u8_le_f32(buf, v);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SaliencyMap load_saliency_raw(const fs::path& path) {
    const auto bytes = read_file(path);
    const auto newline = std::find(bytes.begin(), bytes.end(), '\n');
    if (newline == bytes.end()) throw IoError("missing PF-GRAY header in '" + path.string() + "'");
    std::istringstream header(std::string(bytes.begin(), newline));
    std::string magic;
    long long w = -1, h = -1;
    header >> magic >> w >> h;
    if (magic != "PF-GRAY" || !header || w <= 0 || h <= 0) {
        throw IoError("malformed PF-GRAY header in '" + path.string() + "'");
    }
    const auto offset = static_cast<std::size_t>(newline - bytes.begin()) + 1;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() != offset + n * 4) throw IoError("PF-GRAY payload size mismatch in '" + path.string() + "'");
    SaliencyMap map(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + b])) << (8 * b);
        }
        map.data[i] = std::bit_cast<float>(bits);
        if (map.data[i] < 0.0f) map.is_signed = true;
    }
    return map;
}

}  // namespace rmpd
