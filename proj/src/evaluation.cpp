#include "rmpd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

#include "rmpd/errors.hpp"

namespace rmpd {

namespace fs = std::filesystem;

BinaryMask binarize(const SaliencyMap& map, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("threshold must lie in [0, 1]");
    const auto norm = normalize_min_max(map.data);
    BinaryMask mask(map.width, map.height);
    for (std::size_t i = 0; i < norm.size(); ++i) mask.data[i] = norm[i] >= threshold ? 1 : 0;
    return mask;
}

Confusion confusion(const BinaryMask& mask, const BinaryMask& truth) {
    if (mask.width != truth.width || mask.height != truth.height || mask.data.size() != truth.data.size()) {
        throw InvalidArgument("mask and ground truth dimensions differ");
    }
    Confusion c;
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        const bool p = mask.data[i] != 0, t = truth.data[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

PRPoint pr_at(const BinaryMask& mask, const BinaryMask& truth, double beta) {
    const Confusion c = confusion(mask, truth);
    PRPoint pt;
    pt.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    pt.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double b2 = beta * beta;
    const double denom = b2 * pt.precision + pt.recall;
    pt.f_measure = denom > 0.0 ? (1.0 + b2) * pt.precision * pt.recall / denom : 0.0;
    return pt;
}

PRCurve sweep(const SaliencyMap& map, const BinaryMask& truth, std::size_t steps, double beta) {
    if (steps < 2) throw InvalidArgument("sweep needs at least 2 steps");
    PRCurve curve;
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = s + 1 == steps ? 1.0 : static_cast<double>(s) / static_cast<double>(steps - 1);
        const PRPoint pt = pr_at(binarize(map, t), truth, beta);
        curve.thresholds.push_back(t);
        curve.precision.push_back(pt.precision);
        curve.recall.push_back(pt.recall);
        curve.f_measure.push_back(pt.f_measure);
    }
    return curve;
}

PRCurve mean_curve(const std::vector<PRCurve>& curves) {
    if (curves.empty()) throw InvalidArgument("mean_curve of no curves");
    PRCurve out;
    out.thresholds = curves.front().thresholds;
    const std::size_t n = out.thresholds.size();
    out.precision.assign(n, 0.0);
    out.recall.assign(n, 0.0);
    out.f_measure.assign(n, 0.0);
    for (const auto& c : curves) {
        if (c.thresholds != out.thresholds) throw InvalidArgument("curves use different thresholds");
        for (std::size_t i = 0; i < n; ++i) {
            out.precision[i] += c.precision[i];
            out.recall[i] += c.recall[i];
            out.f_measure[i] += c.f_measure[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(curves.size());
    for (std::size_t i = 0; i < n; ++i) {
        out.precision[i] *= inv;
        out.recall[i] *= inv;
        out.f_measure[i] *= inv;
    }
    return out;
}

std::size_t threshold_index(const PRCurve& curve, double t) {
    if (curve.thresholds.empty()) throw InvalidArgument("empty curve");
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.thresholds.size(); ++i) {
        if (std::abs(curve.thresholds[i] - t) < std::abs(curve.thresholds[best] - t)) best = i;
    }
    return best;
}

void write_csv(const PRCurve& curve, std::ostream& out) {
    out << "threshold,precision,recall,f_measure\n" << std::fixed << std::setprecision(6);
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        out << curve.thresholds[i] << ',' << curve.precision[i] << ',' << curve.recall[i] << ','
            << curve.f_measure[i] << '\n';
    }
}

void write_csv(const PRCurve& curve, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_csv(curve, out);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<CorpusEntry> scan_corpus(const fs::path& dir) {
    const fs::path images = dir / "images", masks = dir / "masks";
    if (!fs::is_directory(images) || !fs::is_directory(masks)) {
        throw IoError("corpus '" + dir.string() + "' needs images/ and masks/ subdirectories");
    }
    auto collect = [](const fs::path& d, std::initializer_list<const char*> exts) {
        std::map<std::string, fs::path> out;
        for (const auto& e : fs::directory_iterator(d)) {
            if (!e.is_regular_file()) continue;
            const auto ext = e.path().extension().string();
            if (std::any_of(exts.begin(), exts.end(), [&](const char* x) { return ext == x; })) {
                out.emplace(e.path().stem().string(), e.path());
            }
        }
        return out;
    };
    const auto imgs = collect(images, {".png", ".ppm", ".pnm"});
    const auto msks = collect(masks, {".png", ".pgm", ".pnm"});
    std::vector<CorpusEntry> out;
    for (const auto& [stem, path] : imgs) {
        if (auto it = msks.find(stem); it != msks.end()) out.push_back({stem, path, it->second});
    }
    return out;
}

}  // namespace rmpd
