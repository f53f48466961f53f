#!/usr/bin/env python3
"""Build gzipped IDX files from the digit arrays shipped in the npm `mnist` package.

The package (https://www.npmjs.com/package/mnist, v1.1.0) stores 10000 MNIST
digits as JSON arrays of pixel/255 rounded to three decimals. That rounding is
finer than 1/255, so the original bytes are recovered exactly.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist

Writes train-*-ubyte.gz (8000 examples) and t10k-*-ubyte.gz (2000 examples)
after a fixed shuffle.
"""
import argparse
import gzip
import json
import pathlib
import random
import struct

ROWS = COLS = 28


def load_digits(src):
    examples = []
    for label in range(10):
        flat = json.loads((src / f"{label}.json").read_text())["data"]
        if len(flat) % (ROWS * COLS):
            raise SystemExit(f"{label}.json: length {len(flat)} not a multiple of 784")
        for i in range(0, len(flat), ROWS * COLS):
            px = bytes(round(v * 255) for v in flat[i:i + ROWS * COLS])
            examples.append((px, label))
    return examples


def write_gz(path, payload):
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as gz:
        gz.write(payload)


def write_split(out, prefix, examples):
    n = len(examples)
    images = struct.pack(">IIII", 2051, n, ROWS, COLS) + b"".join(px for px, _ in examples)
    labels = struct.pack(">II", 2049, n) + bytes(y for _, y in examples)
    write_gz(out / f"{prefix}-images-idx3-ubyte.gz", images)
    write_gz(out / f"{prefix}-labels-idx1-ubyte.gz", labels)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=pathlib.Path, help="directory holding 0.json .. 9.json")
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--test", type=int, default=2000, help="examples held out for t10k files")
    ap.add_argument("--seed", type=int, default=20180101)
    args = ap.parse_args()

    examples = load_digits(args.src)
    random.Random(args.seed).shuffle(examples)
    args.out.mkdir(parents=True, exist_ok=True)
    write_split(args.out, "train", examples[args.test:])
    write_split(args.out, "t10k", examples[:args.test])
    print(f"{len(examples) - args.test} train, {args.test} test -> {args.out}")


if __name__ == "__main__":
    main()
