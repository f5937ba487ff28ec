"""PDX1 classifier server over stdin/stdout.

Wrap any Python scorer so the ``external:`` backend can drive it::

    rmpd explain --image cat.png \
        --classifier "external:python3 -m rmpd.pdx_server --model mypkg.net:score --classes 2"

``score`` receives a float32 array of shape (height, width, 3) with samples in
[0, 255] and returns ``num_classes`` probabilities.
"""

from __future__ import annotations

import argparse
import importlib
import struct
import sys
from typing import BinaryIO, Callable, Sequence

import numpy as np

MAGIC = b"PDX1"

Scorer = Callable[[np.ndarray], Sequence[float]]


def _read_exact(stream: BinaryIO, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


def decode_request(payload: bytes) -> np.ndarray:
    width, height = struct.unpack_from("<II", payload, 0)
    expected = 8 + width * height * 12
    if len(payload) != expected:
        raise ValueError(f"request carries {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4", offset=8).reshape(height, width, 3)


def encode_response(probabilities: Sequence[float]) -> bytes:
    body = np.asarray(probabilities, dtype="<f4").tobytes()
    return struct.pack("<I", len(body)) + body


def serve(score: Scorer, num_classes: int, stdin: BinaryIO, stdout: BinaryIO) -> int:
    """Answers requests until the client closes the stream; returns the count served."""
    stdout.write(MAGIC + struct.pack("<I", num_classes))
    stdout.flush()
    served = 0
    while True:
        header = _read_exact(stdin, 4)
        if header is None:
            return served
        (length,) = struct.unpack("<I", header)
        payload = _read_exact(stdin, length)
        if payload is None:
            return served
        probs = list(score(decode_request(payload)))
        if len(probs) != num_classes:
            raise ValueError(f"scorer returned {len(probs)} values for {num_classes} classes")
        stdout.write(encode_response(probs))
        stdout.flush()
        served += 1


def area_fraction_scorer(color=(255.0, 0.0, 0.0), tolerance=30.0, reference=0.25) -> Scorer:
    target = np.asarray(color, dtype=np.float64)

    def score(image: np.ndarray) -> list[float]:
        dist = np.linalg.norm(image.astype(np.float64) - target, axis=2)
        s = min(1.0, float(np.mean(dist <= tolerance)) / reference)
        return [1.0 - s, s]

    return score


def _load(spec: str) -> Scorer:
    module, _, attr = spec.partition(":")
    if not attr:
        raise SystemExit("--model must look like package.module:function")
    return getattr(importlib.import_module(module), attr)


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--model", help="scorer as module:function")
    src.add_argument("--probs", help="constant output p0,p1,...")
    src.add_argument("--area-fraction", action="store_true", help="red-area demo scorer")
    ap.add_argument("--classes", type=int, help="class count announced in the handshake")
    args = ap.parse_args(argv)

    if args.probs:
        fixed = [float(p) for p in args.probs.split(",")]
        score: Scorer = lambda _img: fixed
        classes = args.classes or len(fixed)
    elif args.model:
        score = _load(args.model)
        if not args.classes:
            raise SystemExit("--model needs --classes")
        classes = args.classes
    else:
        score = area_fraction_scorer()
        classes = 2
    serve(score, classes, sys.stdin.buffer, sys.stdout.buffer)
    return 0


if __name__ == "__main__":
    sys.exit(main())
