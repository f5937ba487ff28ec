#!/usr/bin/env python3
"""Build the small ONNX models used by the interchange tests and freeze
reference outputs computed with onnxruntime.

Usage: python3 scripts/make_onnx_assets.py [out_dir]   (default data/models)
"""
import json
import sys
from pathlib import Path

import numpy as np
import onnx
import onnxruntime as ort
from onnx import TensorProto, helper, numpy_helper

OPSET = 13
SIDE = 8


def save(model, path):
    model.ir_version = 8
    onnx.checker.check_model(model)
    onnx.save(model, str(path))


def graph(nodes, name, inp, out, inits):
    return helper.make_model(
        helper.make_graph(nodes, name, [inp], [out], [numpy_helper.from_array(a, n) for n, a in inits]),
        opset_imports=[helper.make_opsetid("", OPSET)],
    )


def linear_softmax(rng):
    # NCHW -> Flatten -> Gemm(transB) -> Softmax
    w = (rng.standard_normal((2, 3 * SIDE * SIDE)) * 2e-3).astype(np.float32)
    b = np.array([0.1, -0.1], dtype=np.float32)
    return graph(
        [
            helper.make_node("Flatten", ["image"], ["flat"], axis=1),
            helper.make_node("Gemm", ["flat", "W", "B"], ["logits"], transB=1),
            helper.make_node("Softmax", ["logits"], ["probs"], axis=1),
        ],
        "linear2",
        helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 3, SIDE, SIDE]),
        helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 2]),
        [("W", w), ("B", b)],
    )


def linear_logits(rng):
    # Raw scores, no softmax: the loader must normalize them.
    w = (rng.standard_normal((3 * SIDE * SIDE, 3)) * 6e-4).astype(np.float32)
    b = np.array([0.5, 0.0, -0.5], dtype=np.float32)
    shape = np.array([1, -1], dtype=np.int64)
    return graph(
        [
            helper.make_node("Reshape", ["image", "shape"], ["flat"]),
            helper.make_node("MatMul", ["flat", "W"], ["mm"]),
            helper.make_node("Add", ["mm", "B"], ["logits"]),
        ],
        "logits3",
        helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 3, SIDE, SIDE]),
        helper.make_tensor_value_info("logits", TensorProto.FLOAT, [1, 3]),
        [("W", w), ("B", b), ("shape", shape)],
    )


def conv_nhwc(rng):
    # NHWC input, transposed to NCHW, one conv layer and a pooled head.
    k = (rng.standard_normal((4, 3, 3, 3)) * 0.3).astype(np.float32)
    kb = (rng.standard_normal(4) * 0.1).astype(np.float32)
    w = (rng.standard_normal((4, 2)) * 4.0).astype(np.float32)
    b = np.array([0.0, 0.2], dtype=np.float32)
    scale = np.array([1.0 / 255.0], dtype=np.float32)
    return graph(
        [
            helper.make_node("Mul", ["image", "scale"], ["scaled"]),
            helper.make_node("Transpose", ["scaled"], ["nchw"], perm=[0, 3, 1, 2]),
            helper.make_node("Conv", ["nchw", "K", "KB"], ["conv"], kernel_shape=[3, 3], pads=[1, 1, 1, 1]),
            helper.make_node("Relu", ["conv"], ["act"]),
            helper.make_node("GlobalAveragePool", ["act"], ["pool"]),
            helper.make_node("Flatten", ["pool"], ["feat"], axis=1),
            helper.make_node("Gemm", ["feat", "W", "B"], ["logits"]),
            helper.make_node("Sigmoid", ["logits"], ["gate"]),
            helper.make_node("Softmax", ["gate"], ["probs"], axis=1),
        ],
        "conv2",
        helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, SIDE, SIDE, 3]),
        helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 2]),
        [("K", k), ("KB", kb), ("W", w), ("B", b), ("scale", scale)],
    )


def large_input():
    w = np.array([[0.01, -0.01], [0.0, 0.0], [-0.01, 0.01]], dtype=np.float32)
    return graph(
        [
            helper.make_node("GlobalAveragePool", ["image"], ["pool"]),
            helper.make_node("Flatten", ["pool"], ["feat"], axis=1),
            helper.make_node("MatMul", ["feat", "W"], ["logits"]),
            helper.make_node("Softmax", ["logits"], ["probs"], axis=1),
        ],
        "large224",
        helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 3, 224, 224]),
        helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 2]),
        [("W", w)],
    )


def unsupported_op():
    return graph(
        [helper.make_node("LRN", ["image"], ["probs"], size=3)],
        "unsupported",
        helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 3, SIDE, SIDE]),
        helper.make_tensor_value_info("probs", TensorProto.FLOAT, [1, 3, SIDE, SIDE]),
        [],
    )


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/models")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240611)

    models = {"linear2": linear_softmax(rng), "logits3": linear_logits(rng), "conv2": conv_nhwc(rng)}
    for name, model in models.items():
        save(model, out / f"{name}.onnx")
    save(large_input(), out / "large224.onnx")
    save(unsupported_op(), out / "unsupported.onnx")

    # Integer-valued HWC images, row-major RGB, as the explainer feeds them.
    images = [rng.integers(0, 256, size=(SIDE, SIDE, 3)).astype(np.float32) for _ in range(4)]
    images.append(np.full((SIDE, SIDE, 3), 255.0, dtype=np.float32))

    cases = []
    for name in models:
        sess = ort.InferenceSession(str(out / f"{name}.onnx"), providers=["CPUExecutionProvider"])
        nhwc = sess.get_inputs()[0].shape[-1] == 3
        for idx, img in enumerate(images):
            feed = img[None] if nhwc else img.transpose(2, 0, 1)[None]
            raw = sess.run(None, {"image": feed})[0][0].astype(np.float64)
            if abs(raw.sum() - 1.0) > 1e-2 or raw.min() < 0.0 or raw.max() > 1.0:
                e = np.exp(raw - raw.max())
                probs = e / e.sum()
            else:
                probs = raw
            cases.append({"model": f"{name}.onnx", "image": idx, "raw": raw.tolist(), "probs": probs.tolist()})

    doc = {
        "side": SIDE,
        "images": [img.astype(int).reshape(-1).tolist() for img in images],
        "cases": cases,
    }
    (out / "expected.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
