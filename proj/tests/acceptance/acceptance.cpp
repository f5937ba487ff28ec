// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failed criteria (capped at 1).
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli/cli.hpp"
#include "rmpd/background.hpp"
#include "rmpd/classifier.hpp"
#include "rmpd/evaluation.hpp"
#include "rmpd/image.hpp"
#include "rmpd/prediction_difference.hpp"
#include "rmpd/rng.hpp"
#include "rmpd/segmentation.hpp"
#include "rmpd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace rmpd;

namespace {

// Pinned tolerances and budgets.
constexpr double kC1MaxSeconds = 1.0;
constexpr std::uint64_t kC1ExpectedCalls = 63;
constexpr double kC2MaxSeconds = 5.0;
constexpr std::uint64_t kC2ExpectedCalls = 129;
constexpr std::uint64_t kC3MinRatio = 5000;
constexpr double kC4MinRelativeDrop = 0.95;
constexpr double kC4MaxOtherChange = 0.02;
constexpr double kC4MaxSeconds = 2.0;
constexpr double kC5Tolerance = 1e-9;
constexpr int kC5Instances = 100;
constexpr double kC5MaxSeconds = 5.0;
constexpr double kC6FusionRelTol = 1e-6;
constexpr int kC6OracleCalls = 1000;
constexpr double kC7MinRegionalF = 0.6;
constexpr double kC7Threshold = 0.5;
constexpr double kC7MaxSeconds = 300.0;

const fs::path kData = RMPD_DATA_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

// --- 1 ------------------------------------------------------------------------
Outcome call_budget_exactness() {
    const RasterImage image(64, 64, 128.0f);
    auto f = make_constant_oracle({0.25, 0.75});
    const auto t0 = Clock::now();
    PDConfig cfg;
    cfg.r = 5;
    cfg.seed = 11;
    const auto res = regional_pd(f, image, ClassSelector::of(1), cfg);
    const double secs = seconds_since(t0);
    bool exact_counts = true;
    for (std::size_t j = 0; j < res.segmentations.size(); ++j) {
        exact_counts = exact_counts && res.segmentations[j].region_count() == (std::size_t{1} << (j + 1));
    }
    const std::uint64_t calls = f.call_count();
    return {exact_counts && calls == kC1ExpectedCalls && secs < kC1MaxSeconds,
            "calls=" + std::to_string(calls) + " exact_region_counts=" + (exact_counts ? "yes" : "no") +
                " time=" + fmt(secs) + "s"};
}

// --- 2 ------------------------------------------------------------------------
Outcome baseline_call_formula() {
    Rng rng(5);
    std::uniform_int_distribution<int> px(0, 255);
    std::vector<float> data(8 * 8 * 3);
    for (auto& v : data) v = static_cast<float>(px(rng));
    const RasterImage image(8, 8, std::move(data));
    auto f = make_area_fraction_oracle({});
    BaselineConfig cfg;
    cfg.k = 3;
    cfg.l = 5;
    cfg.samples = 2;
    const auto t0 = Clock::now();
    pixelwise_pd(f, image, ClassSelector::of(1), cfg);
    const double secs = seconds_since(t0);
    return {f.call_count() == kC2ExpectedCalls && secs < kC2MaxSeconds,
            "calls=" + std::to_string(f.call_count()) + " time=" + fmt(secs) + "s"};
}

// --- 3 ------------------------------------------------------------------------
Outcome complexity_gap() {
    std::ostringstream out, err;
    const int rc = cli::run({"calls", "--n", "256", "--samples", "10", "--r", "5"}, out, err);
    std::map<std::string, std::string> kv;
    std::istringstream in(out.str());
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (rc != 0 || !kv.count("pixelwise") || !kv.count("regional_max")) {
        return {false, "calls command failed rc=" + std::to_string(rc) + " " + err.str()};
    }
    const std::uint64_t pix = std::stoull(kv["pixelwise"]), reg = std::stoull(kv["regional_max"]);
    // Exact integer form of pix / reg >= 5000.
    const bool ok = pix >= kC3MinRatio * reg && pix == 655361 && reg == 125;
    return {ok, "pixelwise=" + kv["pixelwise"] + " regional_max=" + kv["regional_max"] + " ratio=" + kv["ratio"]};
}

// --- 4 ------------------------------------------------------------------------
// Smallest region over the ladder that covers every pixel of `inside` and no
// pixel of `outside`.
std::optional<std::pair<std::size_t, RegionId>> enclosing_region(const std::vector<SegmentationMap>& ladder,
                                                                 const BinaryMask& inside, const BinaryMask& outside) {
    std::optional<std::pair<std::size_t, RegionId>> best;
    std::size_t best_area = SIZE_MAX;
    for (std::size_t s = 0; s < ladder.size(); ++s) {
        const auto& seg = ladder[s];
        const auto areas = seg.region_areas();
        for (RegionId r = 0; r < seg.region_count(); ++r) {
            bool covers = true, clean = true;
            for (std::size_t i = 0; i < seg.labels().size() && covers && clean; ++i) {
                if (inside.data[i] && seg.labels()[i] != r) covers = false;
                if (outside.data[i] && seg.labels()[i] == r) clean = false;
            }
            if (covers && clean && areas[r] < best_area) {
                best_area = areas[r];
                best = {{s, r}};
            }
        }
    }
    return best;
}

Outcome causal_effect() {
    const auto t0 = Clock::now();
    const RasterImage image = load_image(kData / "two_blob.png");
    const BinaryMask blob_a = load_mask(kData / "two_blob_a.png");
    const BinaryMask blob_b = load_mask(kData / "two_blob_b.png");
    const double n = static_cast<double>(image.pixel_count());
    const ColorTarget ta{synthetic::kBlobA, 30.0, static_cast<double>(blob_a.count()) / n};
    const ColorTarget tb{synthetic::kBlobB, 30.0, static_cast<double>(blob_b.count()) / n};
    auto f = make_two_blob_oracle(ta, tb);

    constexpr std::uint64_t seed = 3;
    const auto ladder = segment_ladder(image, ScaleLadder(5), seed);
    const auto background = estimate_background(image, seed);
    const Probabilities base = f.predict(image);

    std::string detail;
    bool ok = true;
    // Target A (class 1) and, symmetrically, target B (class 2).
    const struct {
        const char* name;
        std::size_t cls;
        const BinaryMask& target;
        const BinaryMask& other;
    } cases[] = {{"A", 1, blob_a, blob_b}, {"B", 2, blob_b, blob_a}};
    for (const auto& c : cases) {
        const auto target_region = enclosing_region(ladder, c.target, c.other);
        const auto other_region = enclosing_region(ladder, c.other, c.target);
        if (!target_region || !other_region) {
            ok = false;
            detail += std::string(c.name) + ": no enclosing region; ";
            continue;
        }
        const auto& [ts, tr] = *target_region;
        const auto& [os, orr] = *other_region;
        const double p_target_out =
            f.predict(sample_exclusion(image, ladder[ts], tr, background,
                                       derive_seed(seed, {tag(StreamTag::exclusion), ts + 1, tr})))[c.cls];
        const double p_other_out =
            f.predict(sample_exclusion(image, ladder[os], orr, background,
                                       derive_seed(seed, {tag(StreamTag::exclusion), os + 1, orr})))[c.cls];
        const double drop = base[c.cls] - p_target_out;
        const double change = std::abs(base[c.cls] - p_other_out);
        ok = ok && base[c.cls] > 0.0 && drop >= kC4MinRelativeDrop * base[c.cls] && change <= kC4MaxOtherChange;
        detail += std::string(c.name) + ": base=" + fmt(base[c.cls]) + " drop=" + fmt(drop) + " (" +
                  fmt(base[c.cls] > 0 ? drop / base[c.cls] : 0.0) + ") other_change=" + fmt(change) + "; ";
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < kC4MaxSeconds;
    return {ok, detail + "time=" + fmt(secs) + "s"};
}

// --- 5 ------------------------------------------------------------------------
Outcome tabular_equivalence() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    double worst = 0.0;
    bool calls_ok = true;
    for (int inst = 0; inst < kC5Instances; ++inst) {
        const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        const std::size_t classes = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
        TabularInstance x;
        std::vector<std::size_t> sizes;
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
            sizes.push_back(m);
            std::vector<double> dom;
            for (std::size_t j = 0; j < m; ++j) dom.push_back(static_cast<double>(10 * i + j) + 0.5);
            std::vector<double> prior(m);
            std::uniform_real_distribution<double> u(0.05, 1.0);
            for (auto& p : prior) p = u(rng);
            const double tot = std::accumulate(prior.begin(), prior.end(), 0.0);
            for (auto& p : prior) p /= tot;
            prior.back() = 1.0 - std::accumulate(prior.begin(), prior.end() - 1, 0.0);
            x.values.push_back(dom[std::uniform_int_distribution<std::size_t>(0, m - 1)(rng)]);
            x.domains.push_back(dom);
            x.priors.push_back(prior);
        }
        // Random lookup table over the full joint space, keyed by value tuples.
        std::map<std::vector<double>, Probabilities> table;
        std::vector<std::size_t> idx(d, 0);
        for (bool more = true; more;) {
            std::vector<double> key;
            for (std::size_t i = 0; i < d; ++i) key.push_back(x.domains[i][idx[i]]);
            Probabilities p(classes);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (auto& v : p) v = u(rng) + 1e-3;
            const double tot = std::accumulate(p.begin(), p.end(), 0.0);
            for (auto& v : p) v /= tot;
            table[key] = p;
            more = false;
            for (std::size_t i = 0; i < d; ++i) {
                if (++idx[i] < sizes[i]) {
                    more = true;
                    break;
                }
                idx[i] = 0;
            }
        }
        TabularModel model(classes, [&](std::span<const double> v) {
            return table.at(std::vector<double>(v.begin(), v.end()));
        });
        const std::size_t cls = std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng);
        const auto res = tabular_pd(model, x, cls);
        calls_ok = calls_ok && model.call_count() == 1 + std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});

        // Brute force: scan the whole joint table, keeping assignments that
        // agree with x everywhere except feature i, weighted by i's prior.
        for (std::size_t i = 0; i < d; ++i) {
            double expected = 0.0;
            for (const auto& [key, p] : table) {
                bool agrees = true;
                for (std::size_t k = 0; k < d; ++k) agrees = agrees && (k == i || key[k] == x.values[k]);
                if (!agrees) continue;
                const auto pos = std::find(x.domains[i].begin(), x.domains[i].end(), key[i]) - x.domains[i].begin();
                expected += x.priors[i][static_cast<std::size_t>(pos)] * p[cls];
            }
            worst = std::max(worst, std::abs(expected - res.marginal[i]));
            const double base = table.at(x.values)[cls];
            worst = std::max(worst, std::abs((base - expected) - res.saliency[i]));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= kC5Tolerance && calls_ok && secs < kC5MaxSeconds,
            "instances=" + std::to_string(kC5Instances) + " max_abs_err=" + fmt(worst) +
                " call_counts=" + (calls_ok ? "ok" : "wrong") + " time=" + fmt(secs) + "s"};
}

// --- 6 ------------------------------------------------------------------------
Outcome invariant_suite() {
    std::vector<std::string> failures;
    auto check = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };

    // Regional maps: non-negativity, piecewise constancy, fusion = mean.
    const auto disk = synthetic::disk_scene(48, 48, 20.0, 26.0, 11.0);
    const auto blobs = synthetic::two_blob_scene();
    struct Run {
        const RasterImage* image;
        DifferenceKind g;
        std::uint64_t seed;
    };
    const Run runs[] = {{&disk.image, DifferenceKind::subtraction, 1},
                        {&disk.image, DifferenceKind::weight_of_evidence, 2},
                        {&blobs.image, DifferenceKind::info_difference, 3}};
    for (const auto& run : runs) {
        auto f = make_area_fraction_oracle({});
        PDConfig cfg;
        cfg.r = 4;
        cfg.g.kind = run.g;
        cfg.seed = run.seed;
        const auto res = regional_pd(f, *run.image, ClassSelector::of(1), cfg);
        for (std::size_t s = 0; s < res.per_scale.size(); ++s) {
            const auto& map = res.per_scale[s];
            const auto& seg = res.segmentations[s];
            check(std::all_of(map.data.begin(), map.data.end(), [](float v) { return v >= 0.0f; }),
                  "per-scale map negative");
            std::vector<float> value(seg.region_count(), -1.0f);
            for (std::size_t i = 0; i < map.data.size(); ++i) {
                float& v = value[seg.labels()[i]];
                if (v < 0.0f) v = map.data[i];
                check(v == map.data[i], "per-scale map not constant within a region");
            }
        }
        check(std::all_of(res.fused.data.begin(), res.fused.data.end(), [](float v) { return v >= 0.0f; }),
              "fused map negative");
        for (std::size_t i = 0; i < res.fused.data.size(); ++i) {
            double mean = 0.0;
            for (const auto& m : res.per_scale) mean += m.data[i];
            mean /= static_cast<double>(res.per_scale.size());
            check(std::abs(res.fused.data[i] - mean) <= kC6FusionRelTol * std::max(1.0, std::abs(mean)),
                  "fused differs from mean of scales");
        }
    }

    // Segmentation: partition, connectivity, determinism.
    const RasterImage* seg_images[] = {&disk.image, &blobs.image};
    for (const RasterImage* img : seg_images) {
        for (std::size_t target : {2u, 5u, 16u, 64u, 200u}) {
            const auto a = segment(*img, target, 99);
            const auto b = segment(*img, target, 99);
            check(is_valid_partition(a), "segmentation is not a connected partition");
            check(a == b, "segmentation not deterministic");
            check(a.region_count() >= target && a.region_count() <= 2 * target, "region count outside [K, 2K]");
        }
    }

    // Mean-shift fixed point.
    Rng rng(77);
    std::normal_distribution<double> noise(0.0, 6.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Rgb> pts;
        const int clusters = 1 + trial % 4;
        for (int c = 0; c < clusters; ++c) {
            const Rgb centre{40.0 + 60.0 * c, 200.0 - 50.0 * c, 100.0 + 10.0 * trial};
            for (int k = 0; k < 15 + 5 * c; ++k) pts.push_back({centre[0] + noise(rng), centre[1] + noise(rng), centre[2] + noise(rng)});
        }
        const auto res = mean_shift(pts, 25.0);
        for (const auto& m : res.modes) {
            const Rgb next = mean_shift_step(pts, m, 25.0);
            const double shift = std::sqrt((next[0] - m[0]) * (next[0] - m[0]) + (next[1] - m[1]) * (next[1] - m[1]) +
                                           (next[2] - m[2]) * (next[2] - m[2]));
            check(shift < 0.1, "mean-shift mode is not a fixed point");
        }
    }

    // Probability validity over random oracle calls.
    std::vector<ClassifierHandle> oracles;
    oracles.push_back(make_constant_oracle({0.2, 0.3, 0.5}));
    oracles.push_back(make_area_fraction_oracle({}));
    oracles.push_back(make_two_blob_oracle(blobs.target_a, blobs.target_b));
    std::uniform_int_distribution<int> px(0, 255), side(1, 24), pick(0, 2);
    for (int call = 0; call < kC6OracleCalls; ++call) {
        const std::size_t w = static_cast<std::size_t>(side(rng)), h = static_cast<std::size_t>(side(rng));
        std::vector<float> data(w * h * 3);
        for (auto& v : data) v = static_cast<float>(px(rng));
        auto& f = oracles[static_cast<std::size_t>(pick(rng))];
        const auto p = f.predict(RasterImage(w, h, std::move(data)));
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        check(p.size() == f.num_classes() && std::abs(sum - 1.0) <= 1e-4 &&
                  std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0 && v <= 1.0; }),
              "invalid probability vector");
    }
    std::uint64_t total = 0;
    for (const auto& f : oracles) total += f.call_count();
    check(total == static_cast<std::uint64_t>(kC6OracleCalls), "call counters do not add up");

    // PR curves: recall non-increasing; F invariant under positive affine rescaling.
    for (int trial = 0; trial < 20; ++trial) {
        SaliencyMap map(16, 16);
        BinaryMask truth(16, 16);
        std::uniform_real_distribution<double> u(-3.0, 5.0);
        for (std::size_t i = 0; i < map.data.size(); ++i) {
            map.data[i] = static_cast<float>(u(rng));
            truth.data[i] = map.data[i] + u(rng) > 2.0 ? 1 : 0;
        }
        const auto curve = sweep(map, truth, 51);
        for (std::size_t i = 1; i < curve.recall.size(); ++i) check(curve.recall[i] <= curve.recall[i - 1], "recall increased");
        SaliencyMap scaled = map;
        for (auto& v : scaled.data) v = 4.0f * v + 16.0f;  // exact in binary floating point
        const auto curve2 = sweep(scaled, truth, 51);
        check(curve.f_measure == curve2.f_measure, "F-measure changed under affine rescaling");
    }

    std::string detail = failures.empty() ? "all invariants hold" : failures.front();
    if (failures.size() > 1) detail += " (+" + std::to_string(failures.size() - 1) + " more)";
    return {failures.empty(), detail};
}

// --- 7 ------------------------------------------------------------------------
Outcome localization_quality() {
    const auto t0 = Clock::now();
    const auto entries = scan_corpus(kData / "corpus");
    if (entries.size() != 20) return {false, "expected 20 corpus items, found " + std::to_string(entries.size())};
    const ColorTarget target = synthetic::corpus_target();
    auto f = make_area_fraction_oracle(target);
    double f_regional = 0.0, f_pixel = 0.0;
    for (const auto& e : entries) {
        const RasterImage image = load_image(e.image);
        const BinaryMask truth = load_mask(e.mask);
        const auto regional = regional_pd(f, image, ClassSelector::of(1), PDConfig{});
        BaselineConfig bcfg;
        bcfg.k = 5;
        bcfg.l = 9;
        bcfg.samples = 4;
        const auto pixel = pixelwise_pd(f, image, ClassSelector::of(1), bcfg);
        f_regional += pr_at(binarize(regional.fused, kC7Threshold), truth).f_measure;
        f_pixel += pr_at(binarize(pixel.map, kC7Threshold), truth).f_measure;
    }
    f_regional /= static_cast<double>(entries.size());
    f_pixel /= static_cast<double>(entries.size());
    const double secs = seconds_since(t0);
    return {f_regional >= kC7MinRegionalF && f_regional > f_pixel && secs < kC7MaxSeconds,
            "regional_F@0.5=" + fmt(f_regional) + " pixelwise_F@0.5=" + fmt(f_pixel) + " time=" + fmt(secs) + "s"};
}

// --- 8 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("rmpd_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::ostringstream out, err;
    const std::string image = (kData / "two_blob.png").string();
    const int rc0 = cli::run({"explain", "--image", image, "--oracle", "two-blob", "--class", "argmax", "--seed",
                              "1234", "--r", "5", "--out-dir", (root / "a").string()},
                             out, err);
    const std::string manifest = (root / "a" / "manifest.txt").string();
    const int rc1 = cli::run({"explain", "--manifest", manifest, "--out-dir", (root / "b").string()}, out, err);
    const int rc2 = cli::run({"explain", "--manifest", manifest, "--out-dir", (root / "c").string()}, out, err);
    if (rc0 || rc1 || rc2) return {false, "explain failed: " + err.str()};
    const std::string a = slurp(root / "a" / "fused.pfg"), b = slurp(root / "b" / "fused.pfg"),
                      c = slurp(root / "c" / "fused.pfg");
    fs::remove_all(root);
    return {!a.empty() && a == b && b == c, "raw bytes=" + std::to_string(a.size()) +
                                                " identical=" + (a == b && b == c ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"call-budget exactness (r=5 -> 63 calls)", call_budget_exactness},
        {"baseline call formula (8x8, samples=2 -> 129 calls)", baseline_call_formula},
        {"complexity gap (n=256, samples=10, r=5 -> ratio >= 5000)", complexity_gap},
        {"causal effect of region exclusion (two-blob)", causal_effect},
        {"tabular marginalization vs brute force", tabular_equivalence},
        {"invariant suite", invariant_suite},
        {"localization quality on the synthetic corpus", localization_quality},
        {"determinism of explain under manifest replay", determinism},
    };
    int failed = 0;
    int index = 1;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << index++ << ". " << name << " | " << o.detail << std::endl;
        failed += o.pass ? 0 : 1;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
