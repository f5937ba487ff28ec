#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "rmpd/image.hpp"

namespace rmpd {

struct PRPoint {
    double precision = 1.0;
    double recall = 1.0;
    double f_measure = 0.0;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Threshold sweep results; all lists share the thresholds' length.
struct PRCurve {
    std::vector<double> thresholds;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f_measure;
};

/// Min-max normalizes the map (constant maps become all zero) and marks
/// pixels whose normalized value is >= threshold.
BinaryMask binarize(const SaliencyMap& map, double threshold);

Confusion confusion(const BinaryMask& mask, const BinaryMask& truth);

/// precision = TP/(TP+FP) (1 if nothing predicted), recall = TP/(TP+FN)
/// (1 if truth empty), F_beta = (1+b^2)PR/(b^2 P + R) (0 if P+R = 0).
PRPoint pr_at(const BinaryMask& mask, const BinaryMask& truth, double beta = 1.0);

/// Uniform thresholds 0, 1/(steps-1), ..., 1.
PRCurve sweep(const SaliencyMap& map, const BinaryMask& truth, std::size_t steps, double beta = 1.0);

/// Pointwise mean of curves sharing the same thresholds.
PRCurve mean_curve(const std::vector<PRCurve>& curves);

/// Index of the threshold closest to t.
std::size_t threshold_index(const PRCurve& curve, double t);

/// CSV with header `threshold,precision,recall,f_measure`, 6 decimals.
void write_csv(const PRCurve& curve, std::ostream& out);
void write_csv(const PRCurve& curve, const std::filesystem::path& path);

struct CorpusEntry {
    std::string stem;
    std::filesystem::path image;
    std::filesystem::path mask;
};

/// `<dir>/images/<stem>.(png|ppm)` paired with `<dir>/masks/<stem>.(png|pgm)`,
/// sorted by stem. Unpaired files are ignored.
std::vector<CorpusEntry> scan_corpus(const std::filesystem::path& dir);

}  // namespace rmpd
