"""Pure-Python kernels. Same signatures and bit-identical results as ``_ckernels``.

Direction codes index ``DR``/``DC`` in the order E, SE, S, SW, W, NW, N, NE;
``SINK`` and ``NODATA`` are negative.
"""

import heapq
import math
from collections import deque

import numpy as np

DR = (0, 1, 1, 1, 0, -1, -1, -1)
DC = (1, 1, 0, -1, -1, -1, 0, 1)
DIST = (1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0), 1.0, math.sqrt(2.0))
SINK = -1
NODATA = -2


def _outlets(valid):
    """Valid cells on the grid border or touching an invalid cell."""
    h, w = valid.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = valid
    all_nb = np.ones_like(valid)
    for dr, dc in zip(DR, DC):
        all_nb &= padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    return valid & ~all_nb


def priority_flood(elev, valid):
    elev = np.ascontiguousarray(elev, dtype=np.float64)
    valid = np.ascontiguousarray(valid, dtype=bool)
    h, w = elev.shape
    out = elev.copy()
    done = ~valid
    heap = []
    for idx in np.flatnonzero(_outlets(valid)):
        heap.append((out.flat[idx], int(idx)))
        done.flat[idx] = True
    heapq.heapify(heap)
    flat_out = out.ravel()
    flat_done = done.ravel()
    while heap:
        z, idx = heapq.heappop(heap)
        r, c = divmod(idx, w)
        for dr, dc in zip(DR, DC):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w:
                n = rr * w + cc
                if not flat_done[n]:
                    flat_done[n] = True
                    if flat_out[n] < z:
                        flat_out[n] = z
                    heapq.heappush(heap, (flat_out[n], n))
    return out


def d8_flowdir(elev, valid):
    elev = np.asarray(elev, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    h, w = elev.shape
    pe = np.full((h + 2, w + 2), np.nan)
    pe[1:-1, 1:-1] = np.where(valid, elev, np.nan)
    best = np.zeros((h, w))
    dirs = np.full((h, w), SINK, dtype=np.int8)
    with np.errstate(invalid="ignore"):
        for k, (dr, dc) in enumerate(zip(DR, DC)):
            s = (elev - pe[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]) / DIST[k]
            better = s > best  # NaN neighbours compare False
            best[better] = s[better]
            dirs[better] = k
    dirs[~valid] = NODATA
    return dirs


def resolve_flats(elev, valid, dirs):
    """Route interior no-descent cells across equal-elevation flats toward their drains."""
    elev = np.asarray(elev, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    dirs = np.array(dirs, dtype=np.int8)
    h, w = elev.shape
    cand = (dirs == SINK) & ~_outlets(valid)
    if not cand.any():
        return dirs
    dist = np.full((h, w), -1, dtype=np.int64)
    queue = deque()
    for r, c in zip(*np.nonzero(valid & ~cand)):
        z = elev[r, c]
        for dr, dc in zip(DR, DC):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and cand[rr, cc] and elev[rr, cc] == z:
                dist[r, c] = 0
                queue.append((int(r), int(c)))
                break
    while queue:
        r, c = queue.popleft()
        z, d = elev[r, c], dist[r, c]
        for dr, dc in zip(DR, DC):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and cand[rr, cc] and dist[rr, cc] < 0 and elev[rr, cc] == z:
                dist[rr, cc] = d + 1
                queue.append((rr, cc))
    for r, c in zip(*np.nonzero(cand & (dist > 0))):
        z, d = elev[r, c], dist[r, c]
        for k, (dr, dc) in enumerate(zip(DR, DC)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and valid[rr, cc] and elev[rr, cc] == z and dist[rr, cc] == d - 1:
                dirs[r, c] = k
                break
    return dirs


def downstream(dirs):
    """Flat index of each cell's receiver, -1 for sinks and nodata."""
    dirs = np.asarray(dirs)
    h, w = dirs.shape
    rows, cols = np.indices((h, w))
    k = np.where(dirs >= 0, dirs, 0)
    dr = np.asarray(DR)[k]
    dc = np.asarray(DC)[k]
    down = (rows + dr) * w + (cols + dc)
    return np.where(dirs >= 0, down, -1).ravel()


def topo_order(dirs):
    """Valid cells ordered upstream-to-downstream; ``None`` when the field has a cycle."""
    dirs = np.asarray(dirs)
    down = downstream(dirs)
    valid = (dirs >= SINK).ravel()
    indeg = np.bincount(down[down >= 0], minlength=down.size)
    queue = deque(int(i) for i in np.flatnonzero(valid & (indeg == 0)))
    order = []
    while queue:
        i = queue.popleft()
        order.append(i)
        d = down[i]
        if d >= 0:
            indeg[d] -= 1
            if indeg[d] == 0:
                queue.append(int(d))
    if len(order) != int(valid.sum()):
        return None
    return np.asarray(order, dtype=np.int64)


def accumulate(dirs, order):
    dirs = np.asarray(dirs)
    down = downstream(dirs)
    acc = (dirs >= SINK).ravel().astype(np.float64)
    for i in order:
        d = down[i]
        if d >= 0:
            acc[d] += acc[i]
    return acc.reshape(dirs.shape)


def basins(dirs, order, targets):
    """Untargeted (``targets`` is None): sink index + 1. Targeted: first target code on the path, else 0."""
    dirs = np.asarray(dirs)
    down = downstream(dirs)
    lab = np.zeros(dirs.size, dtype=np.int64)
    tgt = None if targets is None else np.asarray(targets, dtype=np.int64).ravel()
    for i in order[::-1]:
        if tgt is not None and tgt[i] > 0:
            lab[i] = tgt[i]
        elif down[i] >= 0:
            lab[i] = lab[down[i]]
        elif tgt is None:
            lab[i] = i + 1
    return lab.reshape(dirs.shape)


def knn_predict(samples, labels, queries, k):
    """Majority vote over the k nearest samples (squared Euclidean, ties by sample index).

    An even split is resolved by the label of the single nearest sample.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.uint8)
    n, m = samples.shape[0], queries.shape[0]
    k = min(k, n)
    out = np.zeros(m, dtype=np.uint8)
    if m == 0 or n == 0:
        return out
    chunk = max(1, 2_000_000 // max(n, 1))
    for lo in range(0, m, chunk):
        q = queries[lo:lo + chunk]
        d = np.zeros((q.shape[0], n))
        for f in range(samples.shape[1]):
            diff = q[:, f, None] - samples[None, :, f]
            d += diff * diff
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        votes = labels[nearest].astype(np.int64).sum(axis=1)
        res = np.where(2 * votes > k, 1, 0)
        tie = 2 * votes == k
        res[tie] = labels[nearest[tie, 0]]
        out[lo:lo + chunk] = res
    return out
