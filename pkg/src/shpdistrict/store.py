"""On-disk artifacts: tree JSON, packed column bitsets with a CSV sidecar,
plan and attempt CSVs."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .tree import ColumnSet, DistrictColumn, SampleTree, tree_from_dict, tree_to_dict

MAGIC = b"SHPCOL01"
BASE_FIELDS = ("column_id", "root_index", "n_blocks", "leaf_ids")


def save_tree(tree: SampleTree, path) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree), separators=(",", ":")))


def load_tree(path) -> SampleTree:
    return tree_from_dict(json.loads(Path(path).read_text())).finalize()


def save_columns(columns: ColumnSet, n_blocks: int, directory) -> None:
    """columns.bin: magic, (n_blocks, n_columns) as uint64, then one packed bit row per column."""
    directory = Path(directory)
    cols = columns.columns
    bits = np.zeros((len(cols), n_blocks), dtype=bool)
    for j, c in enumerate(cols):
        bits[j, list(c.blocks)] = True
    with open(directory / "columns.bin", "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", n_blocks, len(cols)))
        fh.write(np.packbits(bits, axis=1).tobytes())
    metric_keys = sorted({k for c in cols for k in c.metrics})
    with open(directory / "columns.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*BASE_FIELDS, *metric_keys])
        for c in cols:
            w.writerow([c.column_id, c.root_index, len(c.blocks), " ".join(map(str, c.leaf_ids)),
                        *[repr(float(c.metrics[k])) if k in c.metrics else "" for k in metric_keys]])


def load_columns(directory) -> tuple[ColumnSet, int]:
    directory = Path(directory)
    raw = (directory / "columns.bin").read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError("not a column store")
    n_blocks, n_cols = struct.unpack("<QQ", raw[8:24])
    row_bytes = (n_blocks + 7) // 8
    packed = np.frombuffer(raw[24:], dtype=np.uint8).reshape(n_cols, row_bytes)
    bits = np.unpackbits(packed, axis=1, count=n_blocks).astype(bool)
    cols, leaf_to_column = [], {}
    with open(directory / "columns.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n_cols:
        raise ValueError("column sidecar does not match the bitset file")
    n_leaves = 0
    for j, row in enumerate(rows):
        leaf_ids = [int(x) for x in row["leaf_ids"].split()]
        n_leaves += len(leaf_ids)
        metrics = {k: float(v) for k, v in row.items() if k not in BASE_FIELDS and v != ""}
        cols.append(DistrictColumn(int(row["column_id"]), frozenset(np.flatnonzero(bits[j]).tolist()),
                                   int(row["root_index"]), leaf_ids, metrics))
        for leaf in leaf_ids:
            leaf_to_column[leaf] = j
    dup = 1.0 - n_cols / n_leaves if n_leaves else 0.0
    return ColumnSet(cols, leaf_to_column, dup), int(n_blocks)


def file_hash(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
