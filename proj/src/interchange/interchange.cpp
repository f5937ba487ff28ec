#include "rmpd/interchange.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "onnx_subset.pb.h"
#include "rmpd/errors.hpp"

namespace rmpd {

namespace {

namespace pb = rmpd::onnx;

constexpr int kFloat = 1;
constexpr int kInt32 = 6;
constexpr int kInt64 = 7;
constexpr int kDouble = 11;

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;          // float tensors
    std::vector<std::int64_t> ints;   // integer tensors (shapes)
    bool is_int = false;

    std::size_t size() const {
        return static_cast<std::size_t>(
            std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>()));
    }
};

[[noreturn]] void model_error(const std::string& what) { throw BackendError("interchange model: " + what); }

Tensor from_proto(const pb::TensorProto& t) {
    Tensor out;
    out.shape.assign(t.dims().begin(), t.dims().end());
    const std::size_t n = out.size();
    const std::string& raw = t.raw_data();
    switch (t.data_type()) {
        case kFloat:
            if (!raw.empty()) {
                if (raw.size() != n * 4) model_error("raw float tensor '" + t.name() + "' has wrong size");
                out.data.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::uint32_t bits = 0;
                    for (int b = 0; b < 4; ++b) {
                        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
                    }
                    out.data[i] = std::bit_cast<float>(bits);
                }
            } else {
                out.data.assign(t.float_data().begin(), t.float_data().end());
            }
            break;
        case kDouble:
            if (!raw.empty()) model_error("raw double tensors are not supported");
            out.data.assign(t.double_data().begin(), t.double_data().end());
            break;
        case kInt64:
            out.is_int = true;
            if (!raw.empty()) {
                if (raw.size() != n * 8) model_error("raw int64 tensor '" + t.name() + "' has wrong size");
                out.ints.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::uint64_t bits = 0;
                    for (int b = 0; b < 8; ++b) {
                        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * i + b])) << (8 * b);
                    }
                    out.ints[i] = static_cast<std::int64_t>(bits);
                }
            } else {
                out.ints.assign(t.int64_data().begin(), t.int64_data().end());
            }
            break;
        case kInt32:
            out.is_int = true;
            out.ints.assign(t.int32_data().begin(), t.int32_data().end());
            break;
        default:
            model_error("tensor '" + t.name() + "' has unsupported data type " + std::to_string(t.data_type()));
    }
    if ((out.is_int ? out.ints.size() : out.data.size()) != n) {
        model_error("tensor '" + t.name() + "' element count does not match its dims");
    }
    return out;
}

struct Attributes {
    std::map<std::string, const pb::AttributeProto*> by_name;

    std::int64_t i(const std::string& name, std::int64_t fallback) const {
        auto it = by_name.find(name);
        return it == by_name.end() ? fallback : it->second->i();
    }
    float f(const std::string& name, float fallback) const {
        auto it = by_name.find(name);
        return it == by_name.end() ? fallback : it->second->f();
    }
    std::vector<std::int64_t> ints(const std::string& name) const {
        auto it = by_name.find(name);
        if (it == by_name.end()) return {};
        return {it->second->ints().begin(), it->second->ints().end()};
    }
    std::string s(const std::string& name) const {
        auto it = by_name.find(name);
        return it == by_name.end() ? std::string{} : it->second->s();
    }
};

std::vector<std::int64_t> broadcast_shape(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    std::vector<std::int64_t> out(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        const std::int64_t da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
        const std::int64_t db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
        if (da != db && da != 1 && db != 1) model_error("operands are not broadcastable");
        out[k] = std::max(da, db);
    }
    return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, const std::function<float(float, float)>& op) {
    if (a.is_int || b.is_int) model_error("arithmetic on integer tensors is not supported");
    Tensor out;
    out.shape = broadcast_shape(a.shape, b.shape);
    const std::size_t rank = out.shape.size();
    const std::size_t n = out.size();
    out.data.resize(n);
    auto strides_for = [&](const std::vector<std::int64_t>& s) {
        std::vector<std::size_t> st(rank, 0);
        std::size_t acc = 1;
        for (std::size_t k = s.size(); k-- > 0;) {
            const std::size_t dim = rank - s.size() + k;
            st[dim] = s[k] == 1 ? 0 : acc;
            acc *= static_cast<std::size_t>(s[k]);
        }
        return st;
    };
    const auto sa = strides_for(a.shape), sb = strides_for(b.shape);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t k = 0; k < rank; ++k) {
            ia += idx[k] * sa[k];
            ib += idx[k] * sb[k];
        }
        out.data[flat] = op(a.data[ia], b.data[ib]);
        for (std::size_t k = rank; k-- > 0;) {
            if (++idx[k] < static_cast<std::size_t>(out.shape[k])) break;
            idx[k] = 0;
        }
    }
    return out;
}

Tensor unary(Tensor t, const std::function<float(float)>& op) {
    for (auto& v : t.data) v = op(v);
    return t;
}

// Row-major 2-D product with optional transposes; out = alpha*A*B + beta*C.
Tensor gemm(const Tensor& a, const Tensor& b, const Tensor* c, float alpha, float beta, bool ta, bool tb) {
    if (a.shape.size() != 2 || b.shape.size() != 2) model_error("Gemm/MatMul expects 2-D operands");
    const std::size_t m = static_cast<std::size_t>(ta ? a.shape[1] : a.shape[0]);
    const std::size_t k = static_cast<std::size_t>(ta ? a.shape[0] : a.shape[1]);
    const std::size_t kb = static_cast<std::size_t>(tb ? b.shape[1] : b.shape[0]);
    const std::size_t n = static_cast<std::size_t>(tb ? b.shape[0] : b.shape[1]);
    if (k != kb) model_error("Gemm/MatMul inner dimensions differ");
    Tensor out;
    out.shape = {static_cast<std::int64_t>(m), static_cast<std::int64_t>(n)};
    out.data.assign(m * n, 0.0f);
    const std::size_t a_cols = static_cast<std::size_t>(a.shape[1]);
    const std::size_t b_cols = static_cast<std::size_t>(b.shape[1]);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const float av = ta ? a.data[p * a_cols + i] : a.data[i * a_cols + p];
                const float bv = tb ? b.data[j * b_cols + p] : b.data[p * b_cols + j];
                acc += static_cast<double>(av) * bv;
            }
            out.data[i * n + j] = static_cast<float>(alpha * acc);
        }
    }
    if (c) {
        Tensor scaled = unary(*c, [beta](float v) { return beta * v; });
        out = elementwise(out, scaled, std::plus<float>());
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, const Attributes& attrs) {
    if (x.shape.size() != 4 || w.shape.size() != 4) model_error("Conv supports 2-D NCHW only");
    if (attrs.i("group", 1) != 1) model_error("grouped Conv is not supported");
    const std::string pad_mode = attrs.s("auto_pad");
    if (!pad_mode.empty() && pad_mode != "NOTSET") model_error("Conv auto_pad is not supported");
    auto strides = attrs.ints("strides");
    auto pads = attrs.ints("pads");
    auto dil = attrs.ints("dilations");
    if (strides.empty()) strides = {1, 1};
    if (pads.empty()) pads = {0, 0, 0, 0};
    if (dil.empty()) dil = {1, 1};
    const std::int64_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const std::int64_t m = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != c) model_error("Conv weight channel count does not match input");
    const std::int64_t oh = (h + pads[0] + pads[2] - dil[0] * (kh - 1) - 1) / strides[0] + 1;
    const std::int64_t ow = (wd + pads[1] + pads[3] - dil[1] * (kw - 1) - 1) / strides[1] + 1;
    if (oh <= 0 || ow <= 0) model_error("Conv output would be empty");
    Tensor out;
    out.shape = {n, m, oh, ow};
    out.data.assign(out.size(), 0.0f);
    for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t oc = 0; oc < m; ++oc) {
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    double acc = bias ? bias->data[static_cast<std::size_t>(oc)] : 0.0;
                    for (std::int64_t ic = 0; ic < c; ++ic) {
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t iy = oy * strides[0] - pads[0] + ky * dil[0];
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t ix = ox * strides[1] - pads[1] + kx * dil[1];
                                if (ix < 0 || ix >= wd) continue;
                                acc += static_cast<double>(x.data[static_cast<std::size_t>(((b * c + ic) * h + iy) * wd + ix)]) *
                                       w.data[static_cast<std::size_t>(((oc * c + ic) * kh + ky) * kw + kx)];
                            }
                        }
                    }
                    out.data[static_cast<std::size_t>(((b * m + oc) * oh + oy) * ow + ox)] = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

Tensor softmax(Tensor t, std::int64_t axis) {
    const auto rank = static_cast<std::int64_t>(t.shape.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) model_error("Softmax axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::int64_t k = 0; k < axis; ++k) outer *= static_cast<std::size_t>(t.shape[k]);
    for (std::int64_t k = axis + 1; k < rank; ++k) inner *= static_cast<std::size_t>(t.shape[k]);
    const auto len = static_cast<std::size_t>(t.shape[axis]);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            auto at = [&](std::size_t j) -> float& { return t.data[(o * len + j) * inner + i]; };
            float mx = at(0);
            for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, at(j));
            double sum = 0.0;
            for (std::size_t j = 0; j < len; ++j) sum += std::exp(static_cast<double>(at(j) - mx));
            for (std::size_t j = 0; j < len; ++j) at(j) = static_cast<float>(std::exp(static_cast<double>(at(j) - mx)) / sum);
        }
    }
    return t;
}

const std::set<std::string>& supported_ops() {
    static const std::set<std::string> ops = {"Identity", "Flatten", "Reshape", "Transpose", "Gemm",
                                              "MatMul", "Add", "Sub", "Mul", "Div", "Relu", "Sigmoid",
                                              "Tanh", "Softmax", "Conv", "GlobalAveragePool"};
    return ops;
}

enum class Layout { nchw, nhwc };

class InterchangeBackend final : public ClassifierBackend {
public:
    explicit InterchangeBackend(const std::filesystem::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open model '" + path.string() + "'");
        if (!model_.ParseFromIstream(&in)) model_error("'" + path.string() + "' is not a parseable ONNX model");
        const auto& graph = model_.graph();
        for (const auto& op : model_.opset_import()) {
            if (op.domain().empty() || op.domain() == "ai.onnx") opset_ = op.version();
        }
        for (const auto& node : graph.node()) {
            if (!node.domain().empty() && node.domain() != "ai.onnx") {
                model_error("operator domain '" + node.domain() + "' is not supported");
            }
            if (!supported_ops().count(node.op_type())) {
                model_error("unsupported operator '" + node.op_type() + "'");
            }
        }
        for (const auto& init : graph.initializer()) initializers_.emplace(init.name(), from_proto(init));

        for (const auto& vi : graph.input()) {
            if (initializers_.count(vi.name())) continue;
            if (!input_name_.empty()) model_error("exactly one non-initializer input is required");
            input_name_ = vi.name();
            const auto& tt = vi.type().tensor_type();
            if (tt.elem_type() != kFloat) model_error("image input must be float32");
            for (const auto& d : tt.shape().dim()) {
                input_dims_.push_back(d.has_dim_value() ? std::optional<std::int64_t>(d.dim_value()) : std::nullopt);
            }
        }
        if (input_name_.empty()) model_error("no image input");
        if (input_dims_.size() != 4) model_error("image input must be rank 4");
        if (input_dims_[1] == 3) {
            layout_ = Layout::nchw;
        } else if (input_dims_[3] == 3) {
            layout_ = Layout::nhwc;
        } else {
            model_error("image input must have a channel dimension of 3");
        }
        if (graph.output_size() < 1) model_error("no output");
        output_name_ = graph.output(0).name();
        std::size_t classes = 1;
        const auto& odims = graph.output(0).type().tensor_type().shape().dim();
        for (int k = 0; k < odims.size(); ++k) {
            if (odims[k].has_dim_value()) {
                classes *= static_cast<std::size_t>(odims[k].dim_value());
            } else if (k != 0) {
                model_error("output shape must be static apart from the batch dimension");
            }
        }
        if (odims.empty() || classes == 0) model_error("output shape is missing");
        num_classes_ = classes;
    }

    BackendKind kind() const noexcept override { return BackendKind::interchange; }
    std::size_t num_classes() const noexcept override { return num_classes_; }
    std::string describe() const override { return "interchange:" + path_.string(); }

    Probabilities predict(const RasterImage& image) override {
        const auto h = static_cast<std::int64_t>(image.height()), w = static_cast<std::int64_t>(image.width());
        const std::size_t hd = layout_ == Layout::nchw ? 2 : 1, wdim = layout_ == Layout::nchw ? 3 : 2;
        if ((input_dims_[hd] && *input_dims_[hd] != h) || (input_dims_[wdim] && *input_dims_[wdim] != w)) {
            throw BackendError("interchange model expects " + dim_text(hd) + "x" + dim_text(wdim) +
                               " (HxW) input, got " + std::to_string(h) + "x" + std::to_string(w));
        }
        Tensor input;
        const auto src = image.data();
        if (layout_ == Layout::nhwc) {
            input.shape = {1, h, w, 3};
            input.data.assign(src.begin(), src.end());
        } else {
            input.shape = {1, 3, h, w};
            input.data.resize(src.size());
            const std::size_t plane = image.pixel_count();
            for (std::size_t i = 0; i < plane; ++i) {
                for (std::size_t c = 0; c < 3; ++c) input.data[c * plane + i] = src[3 * i + c];
            }
        }
        const Tensor out = run(std::move(input));
        if (out.is_int || out.data.size() != num_classes_) {
            throw BackendError("interchange model produced " + std::to_string(out.data.size()) +
                               " outputs, expected " + std::to_string(num_classes_));
        }
        Probabilities p(out.data.begin(), out.data.end());
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        const bool in_range = std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
        if (std::abs(sum - 1.0) > 1e-2 || !in_range) {
            Tensor logits{{static_cast<std::int64_t>(p.size())}, out.data, {}, false};
            const Tensor soft = softmax(std::move(logits), 0);
            p.assign(soft.data.begin(), soft.data.end());
        }
        return p;
    }

private:
    std::string dim_text(std::size_t k) const {
        return input_dims_[k] ? std::to_string(*input_dims_[k]) : std::string("?");
    }

    Tensor run(Tensor input) const {
        std::unordered_map<std::string, Tensor> values;
        values.emplace(input_name_, std::move(input));
        auto get = [&](const std::string& name) -> const Tensor& {
            if (auto it = values.find(name); it != values.end()) return it->second;
            if (auto it = initializers_.find(name); it != initializers_.end()) return it->second;
            model_error("value '" + name + "' is used before it is produced");
        };
        for (const auto& node : model_.graph().node()) {
            Attributes attrs;
            for (const auto& a : node.attribute()) attrs.by_name[a.name()] = &a;
            const std::string& op = node.op_type();
            auto in = [&](int k) -> const Tensor& {
                if (k >= node.input_size() || node.input(k).empty()) model_error(op + " is missing input " + std::to_string(k));
                return get(node.input(k));
            };
            auto has_in = [&](int k) { return k < node.input_size() && !node.input(k).empty(); };
            Tensor result;
            if (op == "Identity") {
                result = in(0);
            } else if (op == "Flatten") {
                const Tensor& x = in(0);
                auto axis = attrs.i("axis", 1);
                if (axis < 0) axis += static_cast<std::int64_t>(x.shape.size());
                std::int64_t outer = 1;
                for (std::int64_t k = 0; k < axis; ++k) outer *= x.shape[static_cast<std::size_t>(k)];
                result = x;
                result.shape = {outer, static_cast<std::int64_t>(x.size()) / std::max<std::int64_t>(outer, 1)};
            } else if (op == "Reshape") {
                const Tensor& x = in(0);
                const Tensor& s = in(1);
                if (!s.is_int) model_error("Reshape shape must be an integer tensor");
                std::vector<std::int64_t> shape(s.ints);
                std::int64_t known = 1;
                int infer = -1;
                for (std::size_t k = 0; k < shape.size(); ++k) {
                    if (shape[k] == 0) shape[k] = x.shape.at(k);
                    if (shape[k] == -1) {
                        infer = static_cast<int>(k);
                    } else {
                        known *= shape[k];
                    }
                }
                if (infer >= 0) shape[static_cast<std::size_t>(infer)] = static_cast<std::int64_t>(x.size()) / known;
                result = x;
                result.shape = shape;
                if (result.size() != x.size()) model_error("Reshape changes the element count");
            } else if (op == "Transpose") {
                const Tensor& x = in(0);
                auto perm = attrs.ints("perm");
                const std::size_t rank = x.shape.size();
                if (perm.empty()) {
                    for (std::size_t k = rank; k-- > 0;) perm.push_back(static_cast<std::int64_t>(k));
                }
                result.shape.resize(rank);
                for (std::size_t k = 0; k < rank; ++k) result.shape[k] = x.shape[static_cast<std::size_t>(perm[k])];
                std::vector<std::size_t> src_strides(rank, 1);
                for (std::size_t k = rank - 1; k-- > 0;) src_strides[k] = src_strides[k + 1] * static_cast<std::size_t>(x.shape[k + 1]);
                result.data.resize(x.size());
                std::vector<std::size_t> idx(rank, 0);
                for (std::size_t flat = 0; flat < result.data.size(); ++flat) {
                    std::size_t src = 0;
                    for (std::size_t k = 0; k < rank; ++k) src += idx[k] * src_strides[static_cast<std::size_t>(perm[k])];
                    result.data[flat] = x.data[src];
                    for (std::size_t k = rank; k-- > 0;) {
                        if (++idx[k] < static_cast<std::size_t>(result.shape[k])) break;
                        idx[k] = 0;
                    }
                }
            } else if (op == "Gemm") {
                result = gemm(in(0), in(1), has_in(2) ? &in(2) : nullptr, attrs.f("alpha", 1.0f),
                              attrs.f("beta", 1.0f), attrs.i("transA", 0) != 0, attrs.i("transB", 0) != 0);
            } else if (op == "MatMul") {
                result = gemm(in(0), in(1), nullptr, 1.0f, 0.0f, false, false);
            } else if (op == "Add") {
                result = elementwise(in(0), in(1), std::plus<float>());
            } else if (op == "Sub") {
                result = elementwise(in(0), in(1), std::minus<float>());
            } else if (op == "Mul") {
                result = elementwise(in(0), in(1), std::multiplies<float>());
            } else if (op == "Div") {
                result = elementwise(in(0), in(1), std::divides<float>());
            } else if (op == "Relu") {
                result = unary(in(0), [](float v) { return v > 0.0f ? v : 0.0f; });
            } else if (op == "Sigmoid") {
                result = unary(in(0), [](float v) { return 1.0f / (1.0f + std::exp(-v)); });
            } else if (op == "Tanh") {
                result = unary(in(0), [](float v) { return std::tanh(v); });
            } else if (op == "Softmax") {
                result = softmax(in(0), attrs.i("axis", opset_ >= 13 ? -1 : 1));
            } else if (op == "Conv") {
                result = conv2d(in(0), in(1), has_in(2) ? &in(2) : nullptr, attrs);
            } else if (op == "GlobalAveragePool") {
                const Tensor& x = in(0);
                if (x.shape.size() != 4) model_error("GlobalAveragePool expects NCHW");
                const auto plane = static_cast<std::size_t>(x.shape[2] * x.shape[3]);
                result.shape = {x.shape[0], x.shape[1], 1, 1};
                result.data.resize(static_cast<std::size_t>(x.shape[0] * x.shape[1]));
                for (std::size_t k = 0; k < result.data.size(); ++k) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) acc += x.data[k * plane + i];
                    result.data[k] = static_cast<float>(acc / static_cast<double>(plane));
                }
            }
            if (node.output_size() < 1) model_error(op + " has no output");
            values[node.output(0)] = std::move(result);
        }
        return get(output_name_);
    }

    std::filesystem::path path_;
    pb::ModelProto model_;
    std::int64_t opset_ = 13;
    std::unordered_map<std::string, Tensor> initializers_;
    std::string input_name_;
    std::vector<std::optional<std::int64_t>> input_dims_;
    Layout layout_ = Layout::nchw;
    std::string output_name_;
    std::size_t num_classes_ = 0;
};

}  // namespace

bool interchange_available() noexcept { return true; }

ClassifierHandle open_interchange(const std::filesystem::path& model_path) {
    return ClassifierHandle(std::make_unique<InterchangeBackend>(model_path));
}

}  // namespace rmpd
