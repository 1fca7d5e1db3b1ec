"""On-disk forest layout.

A model directory holds ``forest.meta`` and one ``tree_<index>.rcrf`` per
tree. Every file starts with a format version byte; integers are
little-endian and fixed width, floats are IEEE-754 doubles. Curves are
stored as a ``u32`` length followed by that many ``(time, value)`` pairs.
Files are written under a ``.partial`` name and renamed when complete, so
an interrupted run never leaves a truncated tree behind.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .tree import Leaf, Tree

FORMAT_VERSION = 1
META_NAME = "forest.meta"


class FormatError(ValueError):
    pass


def tree_path(directory, index):
    return Path(directory) / f"tree_{index}.rcrf"


def _atomic_write(path, payload):
    path = Path(path)
    tmp = path.with_name(path.name + ".partial")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _curve(times, values):
    pairs = np.empty((times.size, 2), dtype="<f8")
    pairs[:, 0] = times
    pairs[:, 1] = values
    return struct.pack("<I", times.size) + pairs.tobytes()


def tree_to_bytes(tree):
    parts = [struct.pack("<BIQ", FORMAT_VERSION, tree.index, tree.seed)]
    parts.append(struct.pack("<I", tree.in_bag.size))
    parts.append(tree.in_bag.astype("<u2").tobytes())
    parts.append(struct.pack("<I", tree.n_nodes))
    parts.append(tree.feature.astype("<i4").tobytes())
    parts.append(tree.threshold.astype("<f8").tobytes())
    parts.append(tree.left.astype("<i4").tobytes())
    parts.append(tree.right.astype("<i4").tobytes())
    parts.append(tree.missing_left.astype("<f8").tobytes())
    parts.append(tree.leaf.astype("<i4").tobytes())
    parts.append(struct.pack("<I", len(tree.levels)))
    for node in sorted(tree.levels):
        lv = np.asarray(tree.levels[node], dtype="<f8")
        parts.append(struct.pack("<II", node, lv.size))
        parts.append(lv.tobytes())
    J = tree.leaves[0].cif.shape[0] if tree.leaves else 0
    parts.append(struct.pack("<II", J, len(tree.leaves)))
    for lf in tree.leaves:
        parts.append(struct.pack("<Q", lf.size))
        parts.append(_curve(lf.times, lf.survival))
        for row in lf.cif:
            parts.append(_curve(lf.times, row))
        for row in lf.chf:
            parts.append(_curve(lf.times, row))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.off = 0

    def unpack(self, fmt):
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += struct.calcsize(fmt)
        return vals

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        out = np.frombuffer(self.buf, dtype=dt, count=count, offset=self.off)
        self.off += dt.itemsize * count
        return out.astype(dt.newbyteorder("="))

    def curve(self):
        (k,) = self.unpack("<I")
        pairs = self.array("<f8", 2 * k).reshape(k, 2)
        return pairs[:, 0].copy(), pairs[:, 1].copy()


def tree_from_bytes(buf):
    try:
        return _decode_tree(buf)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"corrupt tree file: {exc}") from exc


def _decode_tree(buf):
    r = _Reader(buf)
    version, index, seed = r.unpack("<BIQ")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tree format version {version}")
    (n_rows,) = r.unpack("<I")
    in_bag = r.array("<u2", n_rows)
    (n_nodes,) = r.unpack("<I")
    feature = r.array("<i4", n_nodes)
    threshold = r.array("<f8", n_nodes)
    left = r.array("<i4", n_nodes)
    right = r.array("<i4", n_nodes)
    missing_left = r.array("<f8", n_nodes)
    leaf = r.array("<i4", n_nodes)
    (n_cat,) = r.unpack("<I")
    levels = {}
    for _ in range(n_cat):
        node, size = r.unpack("<II")
        levels[node] = r.array("<f8", size)
    J, n_leaves = r.unpack("<II")
    leaves = []
    for _ in range(n_leaves):
        (size,) = r.unpack("<Q")
        times, surv = r.curve()
        cif = np.empty((J, times.size))
        chf = np.empty((J, times.size))
        for j in range(J):
            cif[j] = r.curve()[1]
        for j in range(J):
            chf[j] = r.curve()[1]
        leaves.append(Leaf(times, surv, cif, chf, int(size)))
    if r.off != len(buf):
        raise FormatError("trailing bytes in tree file")
    return Tree(index, seed, feature, threshold, left, right, missing_left, leaf,
                levels, leaves, in_bag)


def write_tree(directory, tree):
    _atomic_write(tree_path(directory, tree.index), tree_to_bytes(tree))


def read_tree(path):
    return tree_from_bytes(Path(path).read_bytes())


def meta_to_bytes(meta):
    body = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<BI", FORMAT_VERSION, len(body)) + body


def write_meta(directory, meta):
    _atomic_write(Path(directory) / META_NAME, meta_to_bytes(meta))


def read_meta(directory):
    buf = (Path(directory) / META_NAME).read_bytes()
    version, length = struct.unpack_from("<BI", buf, 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported meta format version {version}")
    body = buf[5:5 + length]
    if len(body) != length:
        raise FormatError("truncated forest.meta")
    return json.loads(body.decode("utf-8"))


def existing_tree_indices(directory, ntree):
    return [i for i in range(ntree) if tree_path(directory, i).exists()]
