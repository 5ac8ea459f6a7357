#!/usr/bin/env python3
"""Builds the bundled MNIST subset in IDX format.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist), which
ships ~10k MNIST digits as JSON arrays of byte/255 values rounded to three
decimals. Bytes are recovered with round(v * 255).

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_COUNT = 6000
TEST_COUNT = 1000
SEED = 20211


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    samples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        for k in range(len(data) // 784):
            px = [min(255, max(0, round(v * 255))) for v in data[k * 784:(k + 1) * 784]]
            samples.append((px, digit))
    random.Random(SEED).shuffle(samples)
    train = samples[:TRAIN_COUNT]
    test = samples[TRAIN_COUNT:TRAIN_COUNT + TEST_COUNT]
    write_images(dst / "train-images-idx3-ubyte", [s[0] for s in train])
    write_labels(dst / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_images(dst / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_labels(dst / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"{len(samples)} digits available; wrote {len(train)} train / {len(test)} test")


if __name__ == "__main__":
    main()
