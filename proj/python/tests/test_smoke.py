import io
import os
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

import rmpd
from rmpd import pdx_server

DATA = Path(os.environ.get("RMPD_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def disk(n=64, cx=30.0, cy=34.0, radius=12.0):
    yy, xx = np.mgrid[0:n, 0:n]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
    img = np.full((n, n, 3), 245.0, dtype=np.float32)
    img[inside] = (255.0, 0.0, 0.0)
    return img, inside


def test_budgets():
    assert rmpd.pixelwise_call_budget(256, 256, 10) == 655361
    assert rmpd.regional_call_budget(5) == (63, 125)


def test_regional_on_a_disk():
    img, inside = disk()
    f = rmpd.Classifier.area_fraction(reference_fraction=0.25)
    res = rmpd.regional(f, img, class_id=1, seed=3)
    fused = res["fused"]
    assert fused.shape == (64, 64)
    assert len(res["per_scale"]) == 5
    n_regions = sum(int(s.max()) + 1 for s in res["segmentations"])
    assert f.call_count == 1 + n_regions
    assert fused[inside].mean() > 5 * fused[~inside].mean()
    np.testing.assert_allclose(fused, np.mean(res["per_scale"], axis=0), rtol=1e-6, atol=1e-7)

    again = rmpd.regional(f, img, class_id=1, seed=3)
    np.testing.assert_array_equal(fused, again["fused"])


def test_python_callback_and_argmax():
    img, _ = disk(32, 16, 16, 6)
    seen = []

    def score(x):
        seen.append(x.shape)
        red = float(np.mean(x[..., 1] < 50))
        return [1.0 - red, red]

    f = rmpd.Classifier.callback(2, score)
    res = rmpd.regional(f, img, r=3)
    assert res["class_id"] == 0
    assert len(seen) == f.call_count
    assert seen[0] == (32, 32, 3)


def test_callback_errors_propagate():
    def boom(_x):
        raise KeyError("nope")

    f = rmpd.Classifier.callback(2, boom)
    with pytest.raises(KeyError):
        f.predict(np.zeros((4, 4, 3)))
    assert f.call_count == 1
    bad = rmpd.Classifier.callback(2, lambda _x: [0.9, 0.9])
    with pytest.raises(rmpd.BackendError):
        bad.predict(np.zeros((4, 4, 3)))


def test_pixelwise_call_count():
    f = rmpd.Classifier.constant([0.5, 0.5])
    res = rmpd.pixelwise(f, np.random.default_rng(0).uniform(0, 255, (8, 8, 3)), k=3, l=5, samples=2)
    assert f.call_count == 129
    assert not res["map"].any()
    with pytest.raises(ValueError):
        rmpd.pixelwise(f, np.zeros((8, 8, 3)))


def test_tabular():
    res = rmpd.tabular(
        2,
        lambda v: [0.1, 0.9] if v[0] == 1.0 else [0.9, 0.1],
        values=[1.0, 7.0],
        domains=[[1.0, 2.0], [7.0, 8.0, 9.0]],
        priors=[[0.5, 0.5], [0.2, 0.3, 0.5]],
        class_id=1,
    )
    assert res["calls"] == 6
    assert res["saliency"] == pytest.approx([0.4, 0.0])


def test_segment_and_sweep():
    img, inside = disk()
    labels = rmpd.segment(img, 16, seed=1)
    assert labels.shape == (64, 64)
    assert 16 <= labels.max() + 1 <= 32
    curve = rmpd.sweep(inside.astype(np.float32), inside, steps=11)
    assert curve["f_measure"][1:] == pytest.approx([1.0] * 10)


def test_invalid_images():
    f = rmpd.Classifier.constant([1.0])
    with pytest.raises(ValueError):
        f.predict(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        f.predict(np.full((4, 4, 3), 300.0))


def test_image_io_roundtrip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (5, 7, 3)).astype(np.float32)
    rmpd.save_image(img, tmp_path / "x.png")
    np.testing.assert_array_equal(rmpd.load_image(tmp_path / "x.png"), img)
    with pytest.raises(rmpd.IoError):
        rmpd.load_image(tmp_path / "missing.png")


def test_server_protocol_in_memory():
    img = np.zeros((2, 3, 3), dtype=np.float32)
    img[0, 0] = (255, 0, 0)
    body = struct.pack("<II", 3, 2) + img.astype("<f4").tobytes()
    stdin = io.BytesIO(struct.pack("<I", len(body)) + body)
    stdout = io.BytesIO()
    assert pdx_server.serve(pdx_server.area_fraction_scorer(), 2, stdin, stdout) == 1
    out = stdout.getvalue()
    assert out[:4] == b"PDX1"
    assert struct.unpack_from("<II", out, 4) == (2, 8)
    assert struct.unpack_from("<2f", out, 12) == pytest.approx((1 - (1 / 6) / 0.25, (1 / 6) / 0.25))


def test_python_server_through_external_backend():
    img, _ = disk(24, 12, 12, 5)
    argv = [sys.executable, "-m", "rmpd.pdx_server", "--area-fraction"]
    remote = rmpd.Classifier.external(argv, 2)
    local = rmpd.Classifier.area_fraction()
    assert remote.kind == "external"
    assert remote.predict(img) == pytest.approx(local.predict(img), abs=1e-6)
    a = rmpd.regional(remote, img, class_id=1, r=3, seed=2)["fused"]
    b = rmpd.regional(local, img, class_id=1, r=3, seed=2)["fused"]
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_external_failures():
    stub = os.environ.get("PDX_STUB_PATH")
    if not stub:
        pytest.skip("stub server path not provided")
    with pytest.raises(rmpd.ProtocolError):
        rmpd.Classifier.external([stub, "--bad-magic"])
    f = rmpd.Classifier.external([stub, "--wrong-length"], 2)
    with pytest.raises(rmpd.ProtocolError):
        f.predict(np.zeros((2, 2, 3)))
    with pytest.raises(rmpd.BackendError):
        rmpd.Classifier.external(["/nonexistent/server"])


@pytest.mark.skipif(not rmpd.interchange_available(), reason="built without interchange support")
def test_interchange_model():
    import json

    ref = json.loads((DATA / "models" / "expected.json").read_text())
    f = rmpd.Classifier.interchange(DATA / "models" / "linear2.onnx")
    case = ref["cases"][0]
    img = np.asarray(ref["images"][case["image"]], dtype=np.float32).reshape(ref["side"], ref["side"], 3)
    assert f.predict(img) == pytest.approx(case["probs"], abs=1e-4)
