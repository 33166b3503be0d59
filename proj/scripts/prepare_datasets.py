#!/usr/bin/env python3
"""Convert raw public citation datasets into the toolkit's on-disk layout.

Outputs per dataset directory:
  edges.txt      "src dst" per line, dense 0-based ids, '#' comments
  features.csv   "id,label,f_1,...,f_f" with one row per node (dense ids)

Supported inputs (fetched manually, see README):
  citeseer   the classic .content/.cites pair
  cora_ml    the single-file .npz with CSR adjacency + attributes + labels

Usage:
  python3 scripts/prepare_datasets.py citeseer \
      --content citeseer.content --cites citeseer.cites --out data/citeseer
  python3 scripts/prepare_datasets.py cora_ml \
      --npz cora_ml.npz --out data/cora_ml
"""

import argparse
import os
import sys


def write_outputs(out_dir, edges, labels, features, source_note):
    os.makedirs(out_dir, exist_ok=True)
    n = len(labels)
    with open(os.path.join(out_dir, "edges.txt"), "w") as f:
        f.write(f"# {source_note}\n")
        for u, v in sorted(set(edges)):
            f.write(f"{u} {v}\n")
    with open(os.path.join(out_dir, "features.csv"), "w") as f:
        for i in range(n):
            row = ",".join(format(x, "g") for x in features[i])
            f.write(f"{i},{labels[i]},{row}\n")
    print(
        f"{out_dir}: {n} nodes, {len(set(edges))} edges, "
        f"{len(set(labels))} classes, {len(features[0])} features"
    )


def convert_citeseer(args):
    node_ids = []
    feats = {}
    raw_labels = {}
    with open(args.content) as f:
        for line in f:
            parts = line.strip().split()
            if not parts:
                continue
            pid, *rest = parts
            raw_labels[pid] = rest[-1]
            feats[pid] = [int(x) for x in rest[:-1]]
            node_ids.append(pid)

    node_ids.sort()
    dense = {pid: i for i, pid in enumerate(node_ids)}
    classes = sorted(set(raw_labels.values()))
    class_id = {c: i for i, c in enumerate(classes)}

    edges = []
    skipped = 0
    with open(args.cites) as f:
        for line in f:
            parts = line.strip().split()
            if len(parts) != 2:
                continue
            cited, citing = parts
            if cited not in dense or citing not in dense:
                skipped += 1  # citations to papers outside the corpus
                continue
            if cited == citing:
                continue
            edges.append((dense[citing], dense[cited]))

    if skipped:
        print(f"note: skipped {skipped} citation lines referencing unknown papers")
    labels = [class_id[raw_labels[pid]] for pid in node_ids]
    features = [feats[pid] for pid in node_ids]
    write_outputs(args.out, edges, labels, features, "citation edges, citing -> cited")


def convert_cora_ml(args):
    import numpy as np

    loader = np.load(args.npz, allow_pickle=True)

    def csr_rows(prefix):
        data = loader[f"{prefix}_data"]
        indices = loader[f"{prefix}_indices"]
        indptr = loader[f"{prefix}_indptr"]
        shape = loader[f"{prefix}_shape"]
        return data, indices, indptr, tuple(int(x) for x in shape)

    adj_data, adj_indices, adj_indptr, adj_shape = csr_rows("adj")
    attr_data, attr_indices, attr_indptr, attr_shape = csr_rows("attr")
    labels = [int(x) for x in loader["labels"]]

    n = adj_shape[0]
    if len(labels) != n:
        sys.exit(f"label count {len(labels)} != node count {n}")

    edges = []
    for u in range(n):
        for k in range(int(adj_indptr[u]), int(adj_indptr[u + 1])):
            v = int(adj_indices[k])
            if u != v and adj_data[k] != 0:
                edges.append((u, v))

    f_dim = attr_shape[1]
    features = []
    for u in range(n):
        row = [0.0] * f_dim
        for k in range(int(attr_indptr[u]), int(attr_indptr[u + 1])):
            row[int(attr_indices[k])] = float(attr_data[k])
        features.append(row)

    write_outputs(args.out, edges, labels, features, "citation edges from the CSR adjacency")


def main():
    top = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="dataset", required=True)

    p1 = sub.add_parser("citeseer", help="convert the .content/.cites pair")
    p1.add_argument("--content", required=True, help="path to citeseer.content")
    p1.add_argument("--cites", required=True, help="path to citeseer.cites")
    p1.add_argument("--out", default="data/citeseer")
    p1.set_defaults(run=convert_citeseer)

    p2 = sub.add_parser("cora_ml", help="convert the .npz CSR bundle")
    p2.add_argument("--npz", required=True, help="path to cora_ml.npz")
    p2.add_argument("--out", default="data/cora_ml")
    p2.set_defaults(run=convert_cora_ml)

    args = top.parse_args()
    args.run(args)


if __name__ == "__main__":
    main()
