#include "rmpd/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rmpd/errors.hpp"

namespace rmpd {

namespace {

constexpr double kSumTolerance = 1e-4;
constexpr double kRangeSlack = 1e-9;

std::string format_rgb(const Rgb& c) {
    std::ostringstream out;
    out << c[0] << ',' << c[1] << ',' << c[2];
    return out.str();
}

class ConstantOracle final : public ClassifierBackend {
public:
    explicit ConstantOracle(Probabilities p) : probs_(std::move(p)) {}
    BackendKind kind() const noexcept override { return BackendKind::synthetic; }
    std::size_t num_classes() const noexcept override { return probs_.size(); }
    Probabilities predict(const RasterImage&) override { return probs_; }
    std::string describe() const override { return "oracle:constant"; }

private:
    Probabilities probs_;
};

class AreaFractionOracle final : public ClassifierBackend {
public:
    explicit AreaFractionOracle(ColorTarget t) : target_(t) {}
    BackendKind kind() const noexcept override { return BackendKind::synthetic; }
    std::size_t num_classes() const noexcept override { return 2; }
    Probabilities predict(const RasterImage& image) override {
        const double s = color_score(image, target_);
        return {1.0 - s, s};
    }
    std::string describe() const override {
        return "oracle:area-fraction color=" + format_rgb(target_.color);
    }

private:
    ColorTarget target_;
};

class TwoBlobOracle final : public ClassifierBackend {
public:
    TwoBlobOracle(ColorTarget a, ColorTarget b) : a_(a), b_(b) {}
    BackendKind kind() const noexcept override { return BackendKind::synthetic; }
    std::size_t num_classes() const noexcept override { return 3; }
    Probabilities predict(const RasterImage& image) override {
        const double pa = 0.5 * color_score(image, a_);
        const double pb = 0.5 * color_score(image, b_);
        return {1.0 - pa - pb, pa, pb};
    }
    std::string describe() const override {
        return "oracle:two-blob a=" + format_rgb(a_.color) + " b=" + format_rgb(b_.color);
    }

private:
    ColorTarget a_;
    ColorTarget b_;
};

class CallbackBackend final : public ClassifierBackend {
public:
    CallbackBackend(std::size_t n, std::function<Probabilities(const RasterImage&)> fn, std::string desc)
        : n_(n), fn_(std::move(fn)), desc_(std::move(desc)) {}
    BackendKind kind() const noexcept override { return BackendKind::callback; }
    std::size_t num_classes() const noexcept override { return n_; }
    Probabilities predict(const RasterImage& image) override { return fn_(image); }
    std::string describe() const override { return desc_; }

private:
    std::size_t n_;
    std::function<Probabilities(const RasterImage&)> fn_;
    std::string desc_;
};

void check_target(const ColorTarget& t) {
    if (!(t.tolerance >= 0.0)) throw InvalidArgument("colour tolerance must be non-negative");
    if (!(t.reference_fraction > 0.0 && t.reference_fraction <= 1.0)) {
        throw InvalidArgument("reference fraction must lie in (0, 1]");
    }
}

}  // namespace

const char* to_string(BackendKind kind) noexcept {
    switch (kind) {
        case BackendKind::synthetic: return "synthetic";
        case BackendKind::external: return "external";
        case BackendKind::interchange: return "interchange";
        case BackendKind::callback: return "callback";
    }
    return "unknown";
}

ClassifierHandle::ClassifierHandle(std::unique_ptr<ClassifierBackend> backend) : backend_(std::move(backend)) {
    if (!backend_) throw InvalidArgument("null classifier backend");
    if (backend_->num_classes() == 0) throw InvalidArgument("classifier must have at least one class");
}

ClassifierHandle::ClassifierHandle(ClassifierHandle&& other) noexcept
    : backend_(std::move(other.backend_)), calls_(other.calls_.load()) {}

ClassifierHandle& ClassifierHandle::operator=(ClassifierHandle&& other) noexcept {
    backend_ = std::move(other.backend_);
    calls_.store(other.calls_.load());
    return *this;
}

ClassifierHandle::~ClassifierHandle() = default;

Probabilities ClassifierHandle::predict(const RasterImage& image) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    Probabilities p = backend_->predict(image);
    validate_probabilities(p, backend_->num_classes());
    return p;
}

void validate_probabilities(const Probabilities& p, std::size_t num_classes) {
    if (p.size() != num_classes) {
        throw BackendError("classifier returned " + std::to_string(p.size()) + " probabilities, expected " +
                           std::to_string(num_classes));
    }
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= -kRangeSlack && v <= 1.0 + kRangeSlack)) {
            throw BackendError("classifier returned a probability outside [0, 1]");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw BackendError("classifier probabilities sum to " + std::to_string(sum));
    }
}

std::size_t argmax(const Probabilities& p) {
    if (p.empty()) throw InvalidArgument("argmax of an empty vector");
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double matching_fraction(const RasterImage& image, const ColorTarget& target) {
    if (image.empty()) return 0.0;
    const double tol2 = target.tolerance * target.tolerance;
    const auto data = image.data();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); i += 3) {
        const double d0 = data[i] - target.color[0];
        const double d1 = data[i + 1] - target.color[1];
        const double d2 = data[i + 2] - target.color[2];
        if (d0 * d0 + d1 * d1 + d2 * d2 <= tol2) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(image.pixel_count());
}

double color_score(const RasterImage& image, const ColorTarget& target) {
    return std::clamp(matching_fraction(image, target) / target.reference_fraction, 0.0, 1.0);
}

ClassifierHandle make_constant_oracle(Probabilities probabilities) {
    if (probabilities.empty()) throw InvalidArgument("constant oracle needs at least one class");
    try {
        validate_probabilities(probabilities, probabilities.size());
    } catch (const BackendError& e) {
        throw InvalidArgument(std::string("constant oracle: ") + e.what());
    }
    return ClassifierHandle(std::make_unique<ConstantOracle>(std::move(probabilities)));
}

ClassifierHandle make_area_fraction_oracle(const ColorTarget& target) {
    check_target(target);
    return ClassifierHandle(std::make_unique<AreaFractionOracle>(target));
}

ClassifierHandle make_two_blob_oracle(const ColorTarget& blob_a, const ColorTarget& blob_b) {
    check_target(blob_a);
    check_target(blob_b);
    return ClassifierHandle(std::make_unique<TwoBlobOracle>(blob_a, blob_b));
}

ClassifierHandle make_callback_classifier(std::size_t num_classes,
                                          std::function<Probabilities(const RasterImage&)> fn,
                                          std::string description) {
    if (!fn) throw InvalidArgument("callback classifier needs a callable");
    return ClassifierHandle(std::make_unique<CallbackBackend>(num_classes, std::move(fn), std::move(description)));
}

}  // namespace rmpd
