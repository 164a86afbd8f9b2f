#!/usr/bin/env python3
"""Build the 5000-digit MNIST subset shipped in data/.

Takes the first 500 images of every digit class from the `mnist` npm
package (10,000 MNIST digits stored as normalized 28x28 JSON arrays) and
writes them as a gzipped IDX3 image file plus an IDX1 label file.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/
"""
import gzip
import json
import struct
import sys
from pathlib import Path

PER_CLASS = 500
SIDE = 28


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} <digits-dir> <out-dir>")
    digits_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images = bytearray()
    labels = bytearray()
    for digit in range(10):
        flat = json.loads((digits_dir / f"{digit}.json").read_text())["data"]
        count = len(flat) // (SIDE * SIDE)
        if count < PER_CLASS:
            sys.exit(f"digit {digit}: only {count} images")
        for i in range(PER_CLASS):
            img = flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            images.extend(min(255, max(0, round(v * 255))) for v in img)
            labels.append(digit)

    n = len(labels)
    img_header = struct.pack(">IIII", 0x00000803, n, SIDE, SIDE)
    lbl_header = struct.pack(">II", 0x00000801, n)
    # mtime=0 keeps the archives byte-stable across regenerations
    with open(out_dir / "mnist5000-images.idx3-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0, filename="") as gz:
            gz.write(img_header + bytes(images))
    with open(out_dir / "mnist5000-labels.idx1-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0, filename="") as gz:
            gz.write(lbl_header + bytes(labels))
    print(f"wrote {n} samples to {out_dir}")


if __name__ == "__main__":
    main()
