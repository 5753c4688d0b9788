#!/usr/bin/env python3
"""Trains the bundled toy classifier on a generated dataset directory.

Usage:
    toyset --out data/toy_train --split train --count 450
    toyset --out data/toy_test  --split test  --count 150
    python3 scripts/train_toy.py data/toy_train data/toy_test data/toy_mlp.scr1 [seed]

Reads PPM images listed in labels.csv, trains a 768-20-3 MLP with label
smoothing, reports held-out accuracy, and writes the weights in the SCR1
format the toolkit loads.
"""
import struct
import sys
import zlib
from pathlib import Path

import numpy as np

HIDDEN = 20
EPOCHS = 12
LR = 0.05
L2 = 1e-3
SMOOTH = 0.15
BATCH = 32


def read_ppm(path):
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path} is not a P6 PPM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace before raster
    w, h, maxval = fields
    assert maxval == 255
    raster = np.frombuffer(data, dtype=np.uint8, count=h * w * 3, offset=pos)
    return raster.reshape(h, w, 3).astype(np.float64) / 255.0


def load_dir(directory):
    directory = Path(directory)
    xs, ys = [], []
    for line in (directory / "labels.csv").read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        name, label = line.rsplit(",", 1)
        xs.append(read_ppm(directory / name).reshape(-1))
        ys.append(int(label))
    return np.array(xs), np.array(ys)


def train(xs, ys, seed):
    rng = np.random.default_rng(seed)
    nin, nout = xs.shape[1], 3
    w1 = rng.standard_normal((HIDDEN, nin)) * np.sqrt(2.0 / nin)
    b1 = np.zeros(HIDDEN)
    w2 = rng.standard_normal((nout, HIDDEN)) * np.sqrt(2.0 / HIDDEN)
    b2 = np.zeros(nout)
    onehot = np.full((len(ys), nout), SMOOTH / nout)
    onehot[np.arange(len(ys)), ys] += 1.0 - SMOOTH
    for _ in range(EPOCHS):
        order = rng.permutation(len(xs))
        for start in range(0, len(xs), BATCH):
            idx = order[start : start + BATCH]
            x, y = xs[idx], onehot[idx]
            h = np.maximum(0.0, x @ w1.T + b1)
            logits = h @ w2.T + b2
            p = np.exp(logits - logits.max(axis=1, keepdims=True))
            p /= p.sum(axis=1, keepdims=True)
            g = (p - y) / len(idx)
            gw2 = g.T @ h + L2 * w2
            gb2 = g.sum(0)
            gh = g @ w2
            gh[h <= 0] = 0.0
            gw1 = gh.T @ x + L2 * w1
            gb1 = gh.sum(0)
            w2 -= LR * gw2
            b2 -= LR * gb2
            w1 -= LR * gw1
            b1 -= LR * gb1
    return [(w1, b1), (w2, b2)]


def accuracy(layers, xs, ys):
    (w1, b1), (w2, b2) = layers
    h = np.maximum(0.0, xs @ w1.T + b1)
    return float(np.mean(np.argmax(h @ w2.T + b2, axis=1) == ys))


def write_scr1(layers, path):
    buf = b"SCR1"
    buf += struct.pack("<I", len(layers))
    for w, _ in layers:
        buf += struct.pack("<II", w.shape[0], w.shape[1])
    for w, b in layers:
        buf += w.astype("<f4").tobytes(order="C")
        buf += b.astype("<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(buf) & 0xFFFFFFFF)
    Path(path).write_bytes(buf)


def main():
    if len(sys.argv) < 4:
        print(__doc__)
        return 2
    train_dir, test_dir, out_path = sys.argv[1:4]
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 0
    xs, ys = load_dir(train_dir)
    xte, yte = load_dir(test_dir)
    layers = train(xs, ys, seed)
    print(f"train accuracy {accuracy(layers, xs, ys):.3f}")
    print(f"held-out accuracy {accuracy(layers, xte, yte):.3f}")
    write_scr1(layers, out_path)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
