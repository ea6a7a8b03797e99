#!/usr/bin/env python3
"""Convert the digit dump shipped in the npm `mnist` package into IDX files.

The package stores 10,000 MNIST digits as per-class JSON arrays of
pixel/255 floats rounded to three decimals. We round back to bytes, shuffle
with a fixed seed and write a 5,000 / 5,000 train/test split.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist10k
"""
import json
import random
import struct
import sys
from pathlib import Path


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    n_train = int(sys.argv[3]) if len(sys.argv) > 3 else 5000
    samples = []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        for start in range(0, len(raw) - 783, 784):
            pixels = [min(255, max(0, round(x * 255))) for x in raw[start:start + 784]]
            samples.append((pixels, digit))
    random.Random(0).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    train, test = samples[:n_train], samples[n_train:]
    write_idx_images(dst / "train-images-idx3-ubyte", [s[0] for s in train])
    write_idx_labels(dst / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_idx_images(dst / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_idx_labels(dst / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"{len(train)} train / {len(test)} test images written to {dst}")


if __name__ == "__main__":
    main()
