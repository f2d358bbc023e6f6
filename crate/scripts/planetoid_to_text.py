#!/usr/bin/env python3
"""Convert the raw Planetoid files (ind.<name>.x, .y, .tx, .ty, .allx, .ally,
.graph, .test.index) into the four-file text format read by `ladies`.

    python3 scripts/planetoid_to_text.py RAW_DIR cora OUT_DIR/cora

Splits follow the standard semi-supervised setup: the labelled training
nodes, the next 500 nodes for validation, and the listed test nodes.
Citeseer's isolated test nodes are kept as zero-feature, class-0 rows.
"""

import argparse
import pathlib
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load_part(raw, name, part):
    with open(raw / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw, name):
    x, y, tx, ty, allx, ally, graph = (
        load_part(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph")
    )
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    if name == "citeseer":
        full = range(test_sorted[0], test_sorted[-1] + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted[0], :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted[0], :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_index, :] = labels[test_sorted, :]

    n = features.shape[0]
    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    train = list(range(len(y)))
    val = list(range(len(y), len(y) + 500))
    return features.toarray(), labels.argmax(1), sorted(edges), (train, val, sorted(test_index))


def write(out, features, labels, edges, splits):
    out.mkdir(parents=True, exist_ok=True)
    n, d = features.shape
    with open(out / "graph.txt", "w") as f:
        f.write(f"{n} {len(edges)}\n")
        f.writelines(f"{u} {v}\n" for u, v in edges)
    with open(out / "features.txt", "w") as f:
        f.write(f"{n} {d}\n")
        for row in features:
            f.write(" ".join("0" if v == 0 else repr(float(v)) for v in row) + "\n")
    with open(out / "labels.txt", "w") as f:
        f.writelines(f"{int(c)}\n" for c in labels)
    with open(out / "splits.txt", "w") as f:
        for split in splits:
            f.write(" ".join(map(str, split)) + "\n")


def main(argv):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("raw", type=pathlib.Path, help="directory holding the ind.<name>.* files")
    ap.add_argument("name", choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("out", type=pathlib.Path)
    args = ap.parse_args(argv)
    features, labels, edges, splits = convert(args.raw, args.name)
    write(args.out, features, labels, edges, splits)
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features")


if __name__ == "__main__":
    main(sys.argv[1:])
