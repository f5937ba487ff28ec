#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rmpd/image.hpp"

namespace rmpd {

using Probabilities = std::vector<double>;

enum class BackendKind { synthetic, external, interchange, callback };

const char* to_string(BackendKind kind) noexcept;

/// A black-box image scorer. Implementations must return num_classes()
/// probabilities; the owning handle validates and counts every call.
class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;
    virtual BackendKind kind() const noexcept = 0;
    virtual std::size_t num_classes() const noexcept = 0;
    virtual Probabilities predict(const RasterImage& image) = 0;
    virtual std::string describe() const = 0;
};

/// Owning, call-counting front of a backend. The counter is atomic and is
/// incremented exactly once per predict, including predicts that throw.
class ClassifierHandle {
public:
    explicit ClassifierHandle(std::unique_ptr<ClassifierBackend> backend);
    ClassifierHandle(ClassifierHandle&& other) noexcept;
    ClassifierHandle& operator=(ClassifierHandle&& other) noexcept;
    ClassifierHandle(const ClassifierHandle&) = delete;
    ClassifierHandle& operator=(const ClassifierHandle&) = delete;
    ~ClassifierHandle();

    Probabilities predict(const RasterImage& image);

    std::uint64_t call_count() const noexcept { return calls_.load(std::memory_order_relaxed); }
    void reset_call_count() noexcept { calls_.store(0, std::memory_order_relaxed); }

    std::size_t num_classes() const noexcept { return backend_->num_classes(); }
    BackendKind kind() const noexcept { return backend_->kind(); }
    std::string describe() const { return backend_->describe(); }
    ClassifierBackend& backend() noexcept { return *backend_; }

private:
    std::unique_ptr<ClassifierBackend> backend_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Throws BackendError unless `p` has `num_classes` entries in [0, 1]
/// summing to 1 within 1e-4.
void validate_probabilities(const Probabilities& p, std::size_t num_classes);

/// Index of the largest probability; ties go to the lowest index.
std::size_t argmax(const Probabilities& p);

// --- synthetic oracles -----------------------------------------------------

/// Colour evidence: pixels within `tolerance` (Euclidean RGB) of `color`
/// count as matching; the score is the matching fraction divided by
/// `reference_fraction`, clamped to [0, 1].
struct ColorTarget {
    Rgb color{255.0, 0.0, 0.0};
    double tolerance = 30.0;
    double reference_fraction = 0.25;
};

double matching_fraction(const RasterImage& image, const ColorTarget& target);
double color_score(const RasterImage& image, const ColorTarget& target);

/// Fixed output regardless of the image.
ClassifierHandle make_constant_oracle(Probabilities probabilities);

/// Two classes: [1 - score, score] for one colour target.
ClassifierHandle make_area_fraction_oracle(const ColorTarget& target);

/// Three classes: [1 - (sa + sb)/2, sa/2, sb/2] for blob colours A and B,
/// so the evidence for A and B is independent.
ClassifierHandle make_two_blob_oracle(const ColorTarget& blob_a, const ColorTarget& blob_b);

/// Wraps an arbitrary callable; used by the Python bindings.
ClassifierHandle make_callback_classifier(std::size_t num_classes,
                                          std::function<Probabilities(const RasterImage&)> fn,
                                          std::string description = "callback");

}  // namespace rmpd
