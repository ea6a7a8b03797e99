#!/usr/bin/env python3
"""Write the 3x3 IDX fixture used by the CLI smoke test.

Two noisy prototypes (left column set, right column set), labels 0 and 1.

    python3 tools/make_tiny_fixture.py tests/data/tiny
"""
import random
import struct
import sys
from pathlib import Path

PROTOTYPES = [
    [255, 0, 0, 255, 0, 0, 255, 0, 0],
    [0, 0, 255, 0, 0, 255, 0, 0, 255],
]


def make(n, rng):
    images, labels = [], []
    for i in range(n):
        label = i % 2
        img = [p if rng.random() > 0.1 else 255 - p for p in PROTOTYPES[label]]
        images.append(img)
        labels.append(label)
    return images, labels


def write(out, stem, images, labels):
    with open(out / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 3, 3))
        for img in images:
            f.write(bytes(img))
    with open(out / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(1)
    write(out, "train", *make(60, rng))
    write(out, "t10k", *make(20, rng))


if __name__ == "__main__":
    main()
