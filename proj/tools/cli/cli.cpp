#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

#include "classifier_spec.hpp"
#include "manifest.hpp"
#include "rmpd/errors.hpp"
#include "rmpd/evaluation.hpp"
#include "rmpd/image.hpp"
#include "rmpd/prediction_difference.hpp"
#include "rmpd/segmentation.hpp"

namespace rmpd::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every option of every subcommand; each subcommand registers the subset it
// understands.
struct Options {
    std::string image;
    std::string classifier = "oracle:area-fraction";
    std::string cls = "argmax";
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    std::string config;
    std::string manifest;

    std::string target_color = "255,0,0";
    double tolerance = 30.0;
    double reference_fraction = 0.25;
    std::string probs = "0.5,0.5";
    std::size_t classes = 0;
    long long timeout_ms = 30000;

    int r = 5;
    std::string g = "sub";
    double bandwidth = 25.0;
    double sigma2 = 10.0;
    std::size_t bg_scale = 256;
    double compactness = 10.0;
    int iterations = 10;
    std::string colorspace = "rgb";

    std::size_t k = 10;
    std::size_t l = 14;
    std::size_t samples = 10;

    int level = 0;
    std::size_t regions = 0;

    std::string corpus;
    std::string engine = "regional";
    std::string maps;
    std::size_t steps = 101;
    double beta = 1.0;
    double threshold = 0.5;
    bool save_maps = false;
    std::size_t jobs = 1;

    std::size_t n = 0;
    std::size_t width = 0;
    std::size_t height = 0;
};

using Clock = std::chrono::steady_clock;

void add_replay(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "key=value file merged below manifest and flags");
    sub->add_option("--manifest", o.manifest, "replay the parameters recorded in a run manifest");
}

void add_classifier(CLI::App* sub, Options& o) {
    sub->add_option("--classifier", o.classifier, "oracle:<kind> | external:<cmd> | interchange:<path>")
        ->capture_default_str();
    sub->add_option("--class", o.cls, "target class id or 'argmax'")->capture_default_str();
    sub->add_option("--target-color", o.target_color, "area-fraction oracle colour R,G,B")->capture_default_str();
    sub->add_option("--tolerance", o.tolerance, "area-fraction oracle colour tolerance")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--reference-fraction", o.reference_fraction, "area-fraction oracle reference area")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--probs", o.probs, "constant oracle output p0,p1,...")->capture_default_str();
    sub->add_option("--classes", o.classes, "expected class count of an external classifier (0 = any)")
        ->capture_default_str();
    sub->add_option("--timeout-ms", o.timeout_ms, "external classifier I/O timeout")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

void add_segmenter(CLI::App* sub, Options& o) {
    sub->add_option("--compactness", o.compactness, "superpixel compactness")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--iterations", o.iterations, "superpixel k-means iterations")
        ->check(CLI::Range(1, 1000))
        ->capture_default_str();
    sub->add_option("--colorspace", o.colorspace, "superpixel colour space")
        ->check(CLI::IsMember({"rgb", "lab"}))
        ->capture_default_str();
}

void add_regional(CLI::App* sub, Options& o) {
    sub->add_option("--r", o.r, "number of scales (2^1 ... 2^r regions)")->check(CLI::Range(1, 30))->capture_default_str();
    sub->add_option("--bandwidth", o.bandwidth, "mean-shift bandwidth")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--sigma2", o.sigma2, "background variance")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--bg-scale", o.bg_scale, "region count of the background segmentation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_segmenter(sub, o);
}

void add_pixelwise(CLI::App* sub, Options& o) {
    sub->add_option("--k", o.k, "inner patch side")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--l", o.l, "outer patch side (l > k)")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--samples", o.samples, "draws per pixel")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_difference(CLI::App* sub, Options& o) {
    sub->add_option("--g", o.g, "difference function")->check(CLI::IsMember({"sub", "woe", "info"}))->capture_default_str();
}

ClassSelector parse_class(const std::string& s) {
    if (s == "argmax") return ClassSelector::argmax();
    std::size_t id = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), id);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw UsageError("--class must be a non-negative integer or 'argmax', got '" + s + "'");
    }
    return ClassSelector::of(id);
}

OracleParams oracle_params(const Options& o) {
    OracleParams p;
    std::vector<double> rgb;
    try {
        rgb = parse_number_list(o.target_color);
        p.probs = parse_number_list(o.probs);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (rgb.size() != 3) throw UsageError("--target-color needs three components");
    p.target_color = {rgb[0], rgb[1], rgb[2]};
    p.tolerance = o.tolerance;
    p.reference_fraction = o.reference_fraction;
    return p;
}

ClassifierHandle open_from(const Options& o) {
    try {
        return open_classifier(o.classifier, oracle_params(o), o.classes, std::chrono::milliseconds(o.timeout_ms));
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

SegmenterOptions segmenter_options(const Options& o) {
    return {o.compactness, o.iterations, o.colorspace == "lab" ? ColorSpace::lab : ColorSpace::rgb};
}

PDConfig regional_config(const Options& o) {
    PDConfig cfg;
    cfg.r = o.r;
    cfg.g.kind = parse_difference(o.g);
    cfg.seed = o.seed;
    cfg.segmenter = segmenter_options(o);
    cfg.background = BackgroundOptions{o.bandwidth, o.sigma2, o.bg_scale, cfg.segmenter};
    return cfg;
}

BaselineConfig baseline_config(const Options& o) {
    if (o.l <= o.k) throw UsageError("--l must exceed --k");
    BaselineConfig cfg;
    cfg.k = o.k;
    cfg.l = o.l;
    cfg.samples = o.samples;
    cfg.g.kind = parse_difference(o.g);
    cfg.seed = o.seed;
    return cfg;
}

void record_classifier(RunManifest& m, const Options& o) {
    m.set("classifier", o.classifier);
    m.set("class", o.cls);
    m.set("target-color", o.target_color);
    m.set("tolerance", o.tolerance);
    m.set("reference-fraction", o.reference_fraction);
    m.set("probs", o.probs);
    m.set("classes", o.classes);
    m.set("timeout-ms", o.timeout_ms);
}

void record_segmenter(RunManifest& m, const Options& o) {
    m.set("compactness", o.compactness);
    m.set("iterations", o.iterations);
    m.set("colorspace", o.colorspace);
}

void record_regional(RunManifest& m, const Options& o) {
    m.set("r", o.r);
    m.set("g", o.g);
    m.set("bandwidth", o.bandwidth);
    m.set("sigma2", o.sigma2);
    m.set("bg-scale", o.bg_scale);
    record_segmenter(m, o);
}

void record_pixelwise(RunManifest& m, const Options& o) {
    m.set("k", o.k);
    m.set("l", o.l);
    m.set("samples", o.samples);
    m.set("g", o.g);
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

void finish(RunManifest& m, const fs::path& out_dir, const std::vector<std::string>& outputs,
            std::uint64_t calls, Clock::time_point t0) {
    m.set("out-dir", out_dir.string());
    m.set("outputs", join(outputs));
    m.set("calls", static_cast<unsigned long long>(calls));
    m.set("wall_time_s", std::chrono::duration<double>(Clock::now() - t0).count());
    m.write(out_dir / "manifest.txt");
}

fs::path prepare_out_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return p;
}

RasterImage load_input(const Options& o) {
    if (o.image.empty()) throw UsageError("--image is required");
    return load_image(o.image);
}

// --- subcommands ------------------------------------------------------------

int cmd_explain(const Options& o, std::ostream& out) {
    const auto t0 = Clock::now();
    const auto selector = parse_class(o.cls);
    const auto cfg = regional_config(o);
    const auto image = load_input(o);
    auto f = open_from(o);
    const auto res = regional_pd(f, image, selector, cfg);

    const fs::path dir = prepare_out_dir(o.out_dir);
    std::vector<std::string> outputs{"fused.pfg", "fused.png"};
    save_saliency(res.fused, dir / "fused.pfg", SaliencyFormat::raw);
    save_saliency(res.fused, dir / "fused.png", SaliencyFormat::heatmap);
    for (std::size_t j = 0; j < res.per_scale.size(); ++j) {
        const std::string name = "scale_" + std::to_string(j + 1) + ".png";
        save_saliency(res.per_scale[j], dir / name, SaliencyFormat::heatmap);
        outputs.push_back(name);
    }
    save_image(overlay(image, res.fused, 0.5f), dir / "overlay.png");
    outputs.push_back("overlay.png");

    RunManifest m;
    m.set("command", std::string("explain"));
    m.set("engine", std::string("regional"));
    m.set("image", o.image);
    record_classifier(m, o);
    m.set("class_id", res.class_id);
    m.set("baseline_probability", res.baseline);
    m.set("seed", static_cast<unsigned long long>(o.seed));
    record_regional(m, o);
    m.set("background_mu", format_number(res.background.mu[0]) + "," + format_number(res.background.mu[1]) + "," +
                               format_number(res.background.mu[2]));
    finish(m, dir, outputs, f.call_count(), t0);
    out << "class " << res.class_id << " baseline " << format_number(res.baseline) << " calls " << f.call_count()
        << "\n";
    return kSuccess;
}

int cmd_baseline(const Options& o, std::ostream& out) {
    const auto t0 = Clock::now();
    const auto selector = parse_class(o.cls);
    const auto cfg = baseline_config(o);
    const auto image = load_input(o);
    auto f = open_from(o);
    const auto res = pixelwise_pd(f, image, selector, cfg);

    const fs::path dir = prepare_out_dir(o.out_dir);
    save_saliency(res.map, dir / "saliency.pfg", SaliencyFormat::raw);
    save_saliency(res.map, dir / "saliency.png", SaliencyFormat::heatmap);
    save_image(overlay(image, res.map, 0.5f), dir / "overlay.png");

    RunManifest m;
    m.set("command", std::string("baseline"));
    m.set("engine", std::string("pixelwise"));
    m.set("image", o.image);
    record_classifier(m, o);
    m.set("class_id", res.class_id);
    m.set("baseline_probability", res.baseline);
    m.set("seed", static_cast<unsigned long long>(o.seed));
    record_pixelwise(m, o);
    finish(m, dir, {"saliency.pfg", "saliency.png", "overlay.png"}, f.call_count(), t0);
    out << "class " << res.class_id << " baseline " << format_number(res.baseline) << " calls " << f.call_count()
        << "\n";
    return kSuccess;
}

int cmd_segment(const Options& o, std::ostream& out) {
    const auto t0 = Clock::now();
    if ((o.level > 0) == (o.regions > 0)) throw UsageError("give exactly one of --level or --regions");
    const auto image = load_input(o);
    const auto opts = segmenter_options(o);
    const SegmentationMap seg = o.level > 0
                                    ? segment(image, std::min<std::size_t>(std::size_t{1} << o.level, image.pixel_count()),
                                              ladder_scale_seed(o.seed, o.level), opts)
                                    : segment(image, o.regions, o.seed, opts);

    const fs::path dir = prepare_out_dir(o.out_dir);
    {
        std::ofstream labels(dir / "labels.txt", std::ios::binary);
        if (!labels) throw IoError("cannot write labels.txt");
        for (std::size_t y = 0; y < seg.height(); ++y) {
            for (std::size_t x = 0; x < seg.width(); ++x) labels << (x ? " " : "") << seg.label(x, y);
            labels << '\n';
        }
    }
    RasterImage edges = image;
    for (std::size_t y = 0; y < seg.height(); ++y) {
        for (std::size_t x = 0; x < seg.width(); ++x) {
            const RegionId id = seg.label(x, y);
            const bool edge = (x + 1 < seg.width() && seg.label(x + 1, y) != id) ||
                              (y + 1 < seg.height() && seg.label(x, y + 1) != id) ||
                              (x > 0 && seg.label(x - 1, y) != id) || (y > 0 && seg.label(x, y - 1) != id);
            if (edge) edges.set_pixel(y * seg.width() + x, {255.0f, 255.0f, 0.0f});
        }
    }
    save_image(edges, dir / "boundaries.png");
    save_label_image({seg.width(), seg.height(), seg.labels()}, dir / "labels.png");

    RunManifest m;
    m.set("command", std::string("segment"));
    m.set("image", o.image);
    m.set("seed", static_cast<unsigned long long>(o.seed));
    if (o.level > 0) m.set("level", o.level);
    else m.set("regions", o.regions);
    record_segmenter(m, o);
    m.set("region_count", seg.region_count());
    finish(m, dir, {"labels.txt", "labels.png", "boundaries.png"}, 0, t0);
    out << "regions " << seg.region_count() << "\n";
    return kSuccess;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    const auto t0 = Clock::now();
    if (o.corpus.empty()) throw UsageError("--corpus is required");
    const fs::path corpus(o.corpus);
    if (!fs::is_directory(corpus / "images") || !fs::is_directory(corpus / "masks")) {
        throw UsageError("corpus '" + o.corpus + "' needs images/ and masks/ subdirectories");
    }
    const auto entries = scan_corpus(corpus);
    if (entries.empty()) throw UsageError("corpus '" + o.corpus + "' has no image/mask pairs");
    if (o.engine == "maps" && o.maps.empty()) throw UsageError("--engine maps needs --maps");
    if (o.threshold < 0.0 || o.threshold > 1.0) throw UsageError("--threshold must lie in [0, 1]");

    const auto selector = parse_class(o.cls);
    std::optional<PDConfig> rcfg;
    std::optional<BaselineConfig> bcfg;
    if (o.engine == "regional") rcfg = regional_config(o);
    if (o.engine == "pixelwise") bcfg = baseline_config(o);
    std::optional<ClassifierHandle> f;
    if (o.engine != "maps") f.emplace(open_from(o));

    const fs::path dir = prepare_out_dir(o.out_dir);
    fs::create_directories(dir / "per_image");
    if (o.save_maps) fs::create_directories(dir / "maps");

    std::vector<PRCurve> curves(entries.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) {
            try {
                const auto& e = entries[i];
                const BinaryMask truth = load_mask(e.mask);
                SaliencyMap map;
                if (o.engine == "maps") {
                    map = load_saliency_raw(fs::path(o.maps) / (e.stem + ".pfg"));
                } else {
                    const RasterImage image = load_image(e.image);
                    map = rcfg ? regional_pd(*f, image, selector, *rcfg).fused
                               : pixelwise_pd(*f, image, selector, *bcfg).map;
                }
                if (o.save_maps && o.engine != "maps") {
                    save_saliency(map, dir / "maps" / (e.stem + ".pfg"), SaliencyFormat::raw);
                }
                curves[i] = sweep(map, truth, o.steps, o.beta);
                write_csv(curves[i], dir / "per_image" / (e.stem + ".csv"));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = entries.size();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(o.jobs, entries.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    const PRCurve mean = mean_curve(curves);
    write_csv(mean, dir / "mean.csv");
    const std::size_t ti = threshold_index(mean, o.threshold);

    RunManifest m;
    m.set("command", std::string("evaluate"));
    m.set("corpus", o.corpus);
    m.set("engine", o.engine);
    if (o.engine == "maps") m.set("maps", o.maps);
    if (f) record_classifier(m, o);
    m.set("seed", static_cast<unsigned long long>(o.seed));
    if (rcfg) record_regional(m, o);
    if (bcfg) record_pixelwise(m, o);
    m.set("steps", o.steps);
    m.set("beta", o.beta);
    m.set("threshold", o.threshold);
    m.set("images", entries.size());
    m.set("precision_at_threshold", mean.precision[ti]);
    m.set("recall_at_threshold", mean.recall[ti]);
    m.set("f_measure_at_threshold", mean.f_measure[ti]);
    finish(m, dir, {"mean.csv", "per_image/"}, f ? f->call_count() : 0, t0);
    out << "images " << entries.size() << " threshold " << format_number(mean.thresholds[ti]) << " precision "
        << format_number(mean.precision[ti]) << " recall " << format_number(mean.recall[ti]) << " f_measure "
        << format_number(mean.f_measure[ti]) << "\n";
    return kSuccess;
}

int cmd_calls(const Options& o, std::ostream& out) {
    const auto t0 = Clock::now();
    std::size_t w = o.width, h = o.height;
    if (o.n > 0) {
        if (w || h) throw UsageError("give either --n or --width/--height");
        w = h = o.n;
    }
    if (w == 0 || h == 0) throw UsageError("image size required: --n or --width and --height");
    const auto pix = pixelwise_call_budget(w, h, o.samples);
    const auto reg = regional_call_budget(o.r);
    const double ratio = static_cast<double>(pix) / static_cast<double>(reg.max);
    out << "pixelwise=" << pix << "\n"
        << "regional_exact=" << reg.exact << "\n"
        << "regional_max=" << reg.max << "\n"
        << "ratio=" << format_number(ratio) << "\n";
    if (!o.out_dir.empty()) {
        const fs::path dir = prepare_out_dir(o.out_dir);
        RunManifest m;
        m.set("command", std::string("calls"));
        m.set("width", w);
        m.set("height", h);
        m.set("samples", o.samples);
        m.set("r", o.r);
        m.set("pixelwise", static_cast<unsigned long long>(pix));
        m.set("regional_exact", static_cast<unsigned long long>(reg.exact));
        m.set("regional_max", static_cast<unsigned long long>(reg.max));
        m.set("ratio", ratio);
        finish(m, dir, {}, 0, t0);
    }
    return kSuccess;
}

// --- replay -------------------------------------------------------------------

std::optional<std::string> find_flag(const std::vector<std::string>& args, const std::string& flag) {
    std::optional<std::string> found;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == flag && i + 1 < args.size()) found = args[i + 1];
        else if (args[i].rfind(flag + "=", 0) == 0) found = args[i].substr(flag.size() + 1);
    }
    return found;
}

// Turns a key=value file into option tokens the subcommand understands.
std::vector<std::string> replay_tokens(CLI::App* sub, const std::string& path) {
    RunManifest m;
    try {
        m = RunManifest::read(path);
    } catch (const IoError& e) {
        throw UsageError(e.what());
    }
    std::vector<std::string> tokens;
    for (const auto& [key, value] : m.entries()) {
        if (key == "config" || key == "manifest") continue;
        if (sub->get_option_no_throw("--" + key) == nullptr) continue;
        tokens.push_back("--" + key + "=" + value);
    }
    return tokens;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Regional multi-scale prediction-difference saliency for black-box image classifiers", "rmpd"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    auto* explain = app.add_subcommand("explain", "regional multi-scale saliency map");
    explain->add_option("--image", o.image, "input image (PNG or PNM)");
    explain->add_option("--seed", o.seed, "root random seed")->capture_default_str();
    explain->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    add_classifier(explain, o);
    add_regional(explain, o);
    add_difference(explain, o);
    add_replay(explain, o);

    auto* baseline = app.add_subcommand("baseline", "pixel-wise conditional-sampling saliency map");
    baseline->add_option("--image", o.image, "input image (PNG or PNM)");
    baseline->add_option("--seed", o.seed, "root random seed")->capture_default_str();
    baseline->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    add_classifier(baseline, o);
    add_pixelwise(baseline, o);
    add_difference(baseline, o);
    add_replay(baseline, o);

    auto* seg = app.add_subcommand("segment", "superpixel label map and boundary overlay");
    seg->add_option("--image", o.image, "input image (PNG or PNM)");
    seg->add_option("--seed", o.seed, "root random seed")->capture_default_str();
    seg->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    seg->add_option("--level", o.level, "ladder level j (2^j regions, ladder seeding)")->check(CLI::Range(1, 30));
    seg->add_option("--regions", o.regions, "explicit region count")->check(CLI::PositiveNumber);
    add_segmenter(seg, o);
    add_replay(seg, o);

    auto* eval = app.add_subcommand("evaluate", "precision/recall/F-measure curves over a corpus");
    eval->add_option("--corpus", o.corpus, "directory with images/ and masks/");
    eval->add_option("--engine", o.engine, "saliency source")
        ->check(CLI::IsMember({"regional", "pixelwise", "maps"}))
        ->capture_default_str();
    eval->add_option("--maps", o.maps, "directory of <stem>.pfg maps for --engine maps");
    eval->add_option("--seed", o.seed, "root random seed")->capture_default_str();
    eval->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    eval->add_option("--steps", o.steps, "threshold count")->check(CLI::Range(2, 100000))->capture_default_str();
    eval->add_option("--beta", o.beta, "F-measure beta")->check(CLI::PositiveNumber)->capture_default_str();
    eval->add_option("--threshold", o.threshold, "threshold reported on stdout")->capture_default_str();
    eval->add_flag("--save-maps", o.save_maps, "also write <stem>.pfg maps");
    eval->add_option("--jobs", o.jobs, "parallel images")->check(CLI::Range(1, 256))->capture_default_str();
    add_classifier(eval, o);
    add_regional(eval, o);
    add_pixelwise(eval, o);
    add_difference(eval, o);
    add_replay(eval, o);

    auto* calls = app.add_subcommand("calls", "classifier-call budgets of both engines");
    std::string calls_out;
    calls->add_option("--n", o.n, "square image side")->check(CLI::PositiveNumber);
    calls->add_option("--width", o.width, "image width")->check(CLI::PositiveNumber);
    calls->add_option("--height", o.height, "image height")->check(CLI::PositiveNumber);
    calls->add_option("--samples", o.samples, "pixel-wise draws per pixel")->check(CLI::PositiveNumber)->capture_default_str();
    calls->add_option("--r", o.r, "regional scale count")->check(CLI::Range(1, 30))->capture_default_str();
    calls->add_option("--out-dir", calls_out, "optional directory for a manifest");

    std::vector<std::string> args = raw_args;
    // --oracle K is shorthand for --classifier oracle:K.
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--oracle" && i + 1 < args.size()) {
            args[i] = "--classifier=oracle:" + args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        } else if (args[i].rfind("--oracle=", 0) == 0) {
            args[i] = "--classifier=oracle:" + args[i].substr(9);
        }
    }

    try {
        // Precedence: config file < manifest < explicit flags (last one wins).
        if (!args.empty()) {
            CLI::App* sub = app.get_subcommand_no_throw(args.front());
            if (sub != nullptr && sub != calls) {
                std::vector<std::string> injected;
                const std::vector<std::string> rest(args.begin() + 1, args.end());
                if (auto cfg = find_flag(rest, "--config")) {
                    auto t = replay_tokens(sub, *cfg);
                    injected.insert(injected.end(), t.begin(), t.end());
                }
                if (auto man = find_flag(rest, "--manifest")) {
                    auto t = replay_tokens(sub, *man);
                    injected.insert(injected.end(), t.begin(), t.end());
                }
                args.insert(args.begin() + 1, injected.begin(), injected.end());
            }
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "rmpd: " << e.what() << "\n";
        return kUsageError;
    } catch (const UsageError& e) {
        err << "rmpd: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (explain->parsed()) return cmd_explain(o, out);
        if (baseline->parsed()) return cmd_baseline(o, out);
        if (seg->parsed()) return cmd_segment(o, out);
        if (eval->parsed()) return cmd_evaluate(o, out);
        o.out_dir = calls_out;
        return cmd_calls(o, out);
    } catch (const UsageError& e) {
        err << "rmpd: usage: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "rmpd: error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

}  // namespace rmpd::cli
