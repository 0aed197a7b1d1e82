#!/usr/bin/env python3
"""Convert per-digit MNIST JSON arrays into IDX image/label files.

Input: a directory holding 0.json .. 9.json, each {"data": [...]} with a
flat array of concatenated 784-pixel images, values in [0,1] that are bytes
divided by 255 (rounded to 3 decimals); bytes are recovered exactly via
round(v * 255).

Output: <out>/mnist-images-idx3-ubyte and <out>/mnist-labels-idx1-ubyte in
the standard big-endian IDX format (magics 2051/2049).  Examples are
interleaved across digits in a fixed round-robin order so any prefix of the
file is roughly class-balanced.
"""

import argparse
import json
import pathlib
import struct


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("src", help="directory with 0.json .. 9.json")
    ap.add_argument("out", help="output directory")
    args = ap.parse_args()

    src = pathlib.Path(args.src)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    per_digit = []
    for digit in range(10):
        with open(src / f"{digit}.json") as fh:
            flat = json.load(fh)["data"]
        if len(flat) % 784:
            raise SystemExit(f"digit {digit}: {len(flat)} values, not a"
                             " multiple of 784")
        per_digit.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

    images = bytearray()
    labels = bytearray()
    count = 0
    remaining = [list(rows) for rows in per_digit]
    while any(remaining):
        for digit in range(10):
            if not remaining[digit]:
                continue
            row = remaining[digit].pop(0)
            if len(row) != 784:
                raise SystemExit(f"digit {digit}: row of length {len(row)}")
            images.extend(int(round(v * 255)) for v in row)
            labels.append(digit)
            count += 1

    with open(out / "mnist-images-idx3-ubyte", "wb") as fh:
        fh.write(struct.pack(">iiii", 2051, count, 28, 28))
        fh.write(bytes(images))
    with open(out / "mnist-labels-idx1-ubyte", "wb") as fh:
        fh.write(struct.pack(">ii", 2049, count))
        fh.write(bytes(labels))
    print(f"wrote {count} examples to {out}")


if __name__ == "__main__":
    main()
