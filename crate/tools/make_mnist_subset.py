#!/usr/bin/env python3
"""Build the bundled MNIST desk-scale subset in IDX format.

Source: the `mnist` npm package (MIT, Juan Cazala), which ships 10,000 real
MNIST digits as JSON arrays of 784 floats (bytes/255 rounded to 3 decimals).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist

Writes train-images-idx3-ubyte / train-labels-idx1-ubyte (3000 samples) and
t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte (1000 samples), drawn
without overlap from a seeded shuffle.
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN, TEST, SEED = 3000, 1000, 20240101


def main(src: Path, dst: Path) -> None:
    samples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        for i in range(len(data) // 784):
            px = bytes(round(v * 255) for v in data[i * 784:(i + 1) * 784])
            samples.append((px, digit))
    random.Random(SEED).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    for prefix, chunk in (("train", samples[:TRAIN]), ("t10k", samples[TRAIN:TRAIN + TEST])):
        with open(dst / f"{prefix}-images-idx3-ubyte", "wb") as f:
            f.write(struct.pack(">IIII", 2051, len(chunk), 28, 28))
            for px, _ in chunk:
                f.write(px)
        with open(dst / f"{prefix}-labels-idx1-ubyte", "wb") as f:
            f.write(struct.pack(">II", 2049, len(chunk)))
            f.write(bytes(label for _, label in chunk))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
