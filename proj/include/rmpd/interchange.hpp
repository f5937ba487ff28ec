#pragma once

#include <filesystem>

#include "rmpd/classifier.hpp"

namespace rmpd {

/// True when the library was built with the serialized-network backend.
bool interchange_available() noexcept;

/// Loads an ONNX model with one float image input ([N,3,H,W] or [N,H,W,3],
/// fed with raw [0, 255] samples) and one class-score output. Supported
/// operators: Identity, Flatten, Reshape, Transpose, Gemm, MatMul, Add, Sub,
/// Mul, Div, Relu, Sigmoid, Tanh, Softmax, Conv, GlobalAveragePool.
/// Outputs that are not already a distribution (sum off by more than 1e-2,
/// or entries outside [0, 1]) are passed through a softmax.
ClassifierHandle open_interchange(const std::filesystem::path& model_path);

}  // namespace rmpd
