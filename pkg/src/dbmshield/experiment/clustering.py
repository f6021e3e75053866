"""Row ordering by hierarchical clustering and PPM heatmap rendering."""

import re
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import linkage

from ..data import as_dataset


def hierarchical_order(data):
    """Dendrogram leaf order of average-linkage clustering under Manhattan distance.

    Children are visited smaller cluster first, ties broken by the lowest
    original row index in each cluster, which makes the order deterministic.
    """
    X = as_dataset(data).values.astype(np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("clustering needs at least two rows")
    Z = linkage(X, method="average", metric="cityblock")
    size = np.ones(2 * n - 1, dtype=int)
    lowest = np.arange(2 * n - 1)
    children = Z[:, :2].astype(int)
    for k, (a, b) in enumerate(children):
        size[n + k] = size[a] + size[b]
        lowest[n + k] = min(lowest[a], lowest[b])
    order = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
            continue
        a, b = sorted(children[node - n], key=lambda c: (size[c], lowest[c]))
        stack.extend((b, a))
    return np.asarray(order)


def order_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".order.txt")


def render_heatmap(data, row_order, path, dark=(32, 32, 96), light=(245, 245, 245)):
    """Write a binary PPM, one pixel per cell, rows permuted by ``row_order``.

    The ordering is stored next to the image as ``<stem>.order.txt``.
    """
    X = as_dataset(data).values
    order = np.asarray(row_order, dtype=int)
    if sorted(order.tolist()) != list(range(X.shape[0])):
        raise ValueError("row_order must be a permutation of the row indices")
    cells = X[order].astype(bool)
    img = np.empty(cells.shape + (3,), dtype=np.uint8)
    img[cells] = dark
    img[~cells] = light
    path = Path(path)
    height, width = cells.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    order_path(path).write_text("".join(f"{i}\n" for i in order))
    return path


def read_ppm(path):
    """Read back a binary PPM written by :func:`render_heatmap` as an (h, w, 3) array."""
    raw = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if m is None:
        raise ValueError("not a binary PPM")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PPM is supported")
    return np.frombuffer(raw[m.end():], dtype=np.uint8).reshape(height, width, 3)
