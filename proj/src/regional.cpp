#include <algorithm>

#include "rmpd/errors.hpp"
#include "rmpd/prediction_difference.hpp"
#include "rmpd/rng.hpp"

namespace rmpd {

RegionalResult regional_pd(ClassifierHandle& f, const RasterImage& image, ClassSelector cls,
                           const PDConfig& cfg) {
    if (image.empty()) throw InvalidArgument("regional_pd: empty image");
    const ScaleLadder ladder(cfg.r);

    RegionalResult result;
    const Probabilities base = f.predict(image);
    result.class_id = cls.resolve(base);
    result.baseline = base[result.class_id];

    BackgroundOptions bg = cfg.background;
    bg.segmenter = cfg.segmenter;
    result.background = estimate_background(image, cfg.seed, bg);

    const std::size_t w = image.width(), h = image.height();
    std::vector<double> fused(w * h, 0.0);
    RasterImage work = image;
    for (int j = 1; j <= ladder.r(); ++j) {
        const std::size_t target = ladder.target_counts()[static_cast<std::size_t>(j - 1)];
        SegmentationMap seg = segment(image, target, ladder_scale_seed(cfg.seed, j), cfg.segmenter);
        SaliencyMap scale_map(w, h);
        const auto regions = seg.region_pixels();
        for (RegionId region = 0; region < regions.size(); ++region) {
            const auto& pixels = regions[region];
            const std::uint64_t stream = derive_seed(
                cfg.seed, {tag(StreamTag::exclusion), static_cast<std::uint64_t>(j), region});
            fill_from_background(work, pixels, result.background, stream);
            const double excluded = f.predict(work)[result.class_id];
            for (auto idx : pixels) work.set_pixel(idx, image.pixel(idx));

            const auto value = static_cast<float>(std::max(0.0, cfg.g(result.baseline, excluded)));
            for (auto idx : pixels) scale_map.data[idx] = value;
        }
        for (std::size_t i = 0; i < fused.size(); ++i) fused[i] += scale_map.data[i];
        result.per_scale.push_back(std::move(scale_map));
        result.segmentations.push_back(std::move(seg));
    }

    result.fused = SaliencyMap(w, h);
    for (std::size_t i = 0; i < fused.size(); ++i) {
        result.fused.data[i] = static_cast<float>(fused[i] / static_cast<double>(ladder.r()));
    }
    return result;
}

}  // namespace rmpd
