#!/usr/bin/env python3
"""Download and decompress the MNIST IDX files into a directory (default data/mnist).

The library itself never touches the network; tests and configs read the
decompressed files from disk.
"""
import argparse
import gzip
import shutil
import urllib.request
from pathlib import Path

MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"
FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
         "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dest", default="data/mnist")
    ap.add_argument("--mirror", default=MIRROR)
    args = ap.parse_args()
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        target = dest / name
        if target.exists():
            print(f"have {target}")
            continue
        gz = dest / f"{name}.gz"
        print(f"fetching {args.mirror}{name}.gz")
        urllib.request.urlretrieve(f"{args.mirror}{name}.gz", gz)
        with gzip.open(gz, "rb") as src, open(target, "wb") as out:
            shutil.copyfileobj(src, out)
        gz.unlink()


if __name__ == "__main__":
    main()
