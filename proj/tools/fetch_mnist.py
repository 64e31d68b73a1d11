#!/usr/bin/env python3
# Copyright 2026 The unca Authors
# SPDX-License-Identifier: Apache-2.0
"""Builds gzip IDX files for the digit subset shipped in the `mnist` npm package.

The package stores 10,000 MNIST digits as per-class JSON arrays of pixel
intensities rounded to three decimals. They are converted back to bytes,
shuffled with a fixed seed and split into train and test files.

    python3 tools/fetch_mnist.py [--package DIR] [--out data/mnist]

Without --package the tarball is fetched with `npm pack mnist@1.1.0`.
"""

import argparse
import gzip
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

PIXELS = 28 * 28


def load_package(root: Path):
    samples = []
    for digit in range(10):
        values = json.loads((root / "src" / "digits" / f"{digit}.json").read_text())["data"]
        if len(values) % PIXELS:
            raise ValueError(f"digit {digit}: {len(values)} values is not a multiple of {PIXELS}")
        for i in range(0, len(values), PIXELS):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in values[i:i + PIXELS])
            samples.append((pixels, digit))
    return samples


def fetch_package(workdir: Path) -> Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True, capture_output=True)
    tarball = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tarball) as tar:
        tar.extractall(workdir, filter="data")
    return workdir / "package"


def write_idx(out: Path, stem: str, samples):
    with gzip.GzipFile(out / f"{stem}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 2051, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with gzip.GzipFile(out / f"{stem}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--package", type=Path, help="unpacked npm package directory")
    parser.add_argument("--out", type=Path, default=Path("data/mnist"))
    parser.add_argument("--test", type=int, default=2000, help="number of held-out test digits")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        root = args.package or fetch_package(Path(tmp))
        samples = load_package(root)

    random.Random(args.seed).shuffle(samples)
    test, train = samples[:args.test], samples[args.test:]
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out, "train", train)
    write_idx(args.out, "t10k", test)
    print(f"wrote {len(train)} train and {len(test)} test digits to {args.out}")


if __name__ == "__main__":
    main()
