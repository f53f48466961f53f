#!/usr/bin/env python3
"""Download the four MNIST gz files and check their digests.

    python3 tools/fetch_mnist.py data/mnist-full
    python3 tools/fetch_mnist.py data/mnist-full --sha256sums my.SHA256SUMS

Each file is checked against the widely published MD5 digest. When a
sha256sum-style file is given, its entries are checked as well. A
SHA256SUMS file for whatever was downloaded is written next to the data.
"""
import argparse
import hashlib
import pathlib
import sys
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]

MD5 = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}


def read_sums(path):
    sums = {}
    for line in path.read_text().splitlines():
        if line.strip():
            digest, name = line.split(maxsplit=1)
            sums[name.lstrip("*")] = digest.lower()
    return sums


def fetch(name):
    errors = []
    for base in MIRRORS:
        try:
            with urllib.request.urlopen(base + name, timeout=60) as r:
                return r.read()
        except OSError as e:
            errors.append(f"{base}{name}: {e}")
    raise SystemExit("download failed:\n  " + "\n  ".join(errors))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--sha256sums", type=pathlib.Path, help="expected SHA-256 digests, sha256sum format")
    args = ap.parse_args()

    expected = read_sums(args.sha256sums) if args.sha256sums else {}
    args.out.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, md5 in MD5.items():
        target = args.out / name
        data = target.read_bytes() if target.exists() else fetch(name)
        if hashlib.md5(data).hexdigest() != md5:
            sys.exit(f"{name}: md5 mismatch")
        sha = hashlib.sha256(data).hexdigest()
        if name in expected and expected[name] != sha:
            sys.exit(f"{name}: sha256 mismatch, expected {expected[name]}, got {sha}")
        target.write_bytes(data)
        lines.append(f"{sha}  {name}")
        print(f"ok {name}")
    (args.out / "SHA256SUMS").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
