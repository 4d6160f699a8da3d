"""Independent brute-force references used by the tests.

Everything here is deliberately naive: per-cell Python loops, no shared code
with the package beyond the direction order, which is part of the contract.
"""

import math
from collections import deque

# E, SE, S, SW, W, NW, N, NE
NEIGHBOURS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
SINK, NODATA = -1, -2


def _inside(r, c, h, w):
    return 0 <= r < h and 0 <= c < w


def _ok(z, r, c):
    return not math.isnan(z[r][c])


def steepest_descent(z):
    """Per-cell receiver by exhaustive max drop/distance; strict '>' keeps the first maximum."""
    h, w = len(z), len(z[0])
    out = [[NODATA] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            if not _ok(z, r, c):
                continue
            best, pick = 0.0, SINK
            for k, (dr, dc) in enumerate(NEIGHBOURS):
                rr, cc = r + dr, c + dc
                if _inside(rr, cc, h, w) and _ok(z, rr, cc):
                    slope = (z[r][c] - z[rr][cc]) / (1.0 if dr == 0 or dc == 0 else math.sqrt(2.0))
                    if slope > best:
                        best, pick = slope, k
            out[r][c] = pick
    return out


def is_outlet(z, r, c):
    h, w = len(z), len(z[0])
    for dr, dc in NEIGHBOURS:
        rr, cc = r + dr, c + dc
        if not _inside(rr, cc, h, w) or not _ok(z, rr, cc):
            return True
    return False


def flat_routing(z, dirs):
    """Resolve flats: distance on equal-elevation cells by repeated relaxation (Bellman-Ford style)."""
    h, w = len(z), len(z[0])
    cand = [[dirs[r][c] == SINK and not is_outlet(z, r, c) for c in range(w)] for r in range(h)]
    inf = float("inf")
    dist = [[inf] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            if _ok(z, r, c) and not cand[r][c]:
                dist[r][c] = 0
    changed = True
    while changed:
        changed = False
        for r in range(h):
            for c in range(w):
                if not cand[r][c]:
                    continue
                for dr, dc in NEIGHBOURS:
                    rr, cc = r + dr, c + dc
                    if _inside(rr, cc, h, w) and _ok(z, rr, cc) and z[rr][cc] == z[r][c] and dist[rr][cc] + 1 < dist[r][c]:
                        dist[r][c] = dist[rr][cc] + 1
                        changed = True
    out = [row[:] for row in dirs]
    for r in range(h):
        for c in range(w):
            if cand[r][c] and dist[r][c] not in (0, inf):
                for k, (dr, dc) in enumerate(NEIGHBOURS):
                    rr, cc = r + dr, c + dc
                    if _inside(rr, cc, h, w) and _ok(z, rr, cc) and z[rr][cc] == z[r][c] and dist[rr][cc] == dist[r][c] - 1:
                        out[r][c] = k
                        break
    return out


def trace(dirs, r, c):
    """Cells visited from (r, c) to its sink, inclusive."""
    h, w = len(dirs), len(dirs[0])
    path = [(r, c)]
    for _ in range(h * w + 1):
        k = dirs[r][c]
        if k < 0:
            return path
        r, c = r + NEIGHBOURS[k][0], c + NEIGHBOURS[k][1]
        path.append((r, c))
    raise AssertionError("cycle")


def basins_by_tracing(dirs, targets=None):
    h, w = len(dirs), len(dirs[0])
    out = [[0] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            if dirs[r][c] == NODATA:
                continue
            path = trace(dirs, r, c)
            if targets is None:
                sr, sc = path[-1]
                out[r][c] = sr * w + sc + 1
            else:
                out[r][c] = next((targets[pr][pc] for pr, pc in path if targets[pr][pc] > 0), 0)
    return out


def accumulation_by_tracing(dirs):
    h, w = len(dirs), len(dirs[0])
    acc = [[0] * w for _ in range(h)]
    for r in range(h):
        for c in range(w):
            if dirs[r][c] != NODATA:
                for pr, pc in trace(dirs, r, c):
                    acc[pr][pc] += 1
    return acc


def spill_fill(z):
    """Minimal fill: each cell's lowest achievable max-elevation over any path to an outlet.

    Computed by fixed-point iteration, independent of any heap ordering.
    """
    h, w = len(z), len(z[0])
    inf = float("inf")
    level = [[z[r][c] if _ok(z, r, c) and is_outlet(z, r, c) else inf for c in range(w)] for r in range(h)]
    changed = True
    while changed:
        changed = False
        for r in range(h):
            for c in range(w):
                if not _ok(z, r, c):
                    continue
                for dr, dc in NEIGHBOURS:
                    rr, cc = r + dr, c + dc
                    if _inside(rr, cc, h, w) and _ok(z, rr, cc):
                        cand = max(z[r][c], level[rr][cc])
                        if cand < level[r][c]:
                            level[r][c] = cand
                            changed = True
    return [[level[r][c] if _ok(z, r, c) else math.nan for c in range(w)] for r in range(h)]


def knn(samples, labels, query, k):
    """Exhaustive k-NN vote; distance summed feature by feature; ties by sample index."""
    dists = []
    for i, s in enumerate(samples):
        d = 0.0
        for a, b in zip(query, s):
            diff = a - b
            d += diff * diff
        dists.append((d, i))
    dists.sort()
    nearest = [i for _, i in dists[:min(k, len(samples))]]
    votes = sum(labels[i] for i in nearest)
    if 2 * votes > len(nearest):
        return 1
    if 2 * votes < len(nearest):
        return 0
    return labels[nearest[0]]


def components(mask, connectivity=8):
    """BFS labelling in row-major first-encounter order."""
    h, w = len(mask), len(mask[0])
    nbrs = NEIGHBOURS if connectivity == 8 else [(0, 1), (1, 0), (0, -1), (-1, 0)]
    lab = [[0] * w for _ in range(h)]
    n = 0
    for r in range(h):
        for c in range(w):
            if mask[r][c] and not lab[r][c]:
                n += 1
                lab[r][c] = n
                q = deque([(r, c)])
                while q:
                    a, b = q.popleft()
                    for dr, dc in nbrs:
                        aa, bb = a + dr, b + dc
                        if _inside(aa, bb, h, w) and mask[aa][bb] and not lab[aa][bb]:
                            lab[aa][bb] = n
                            q.append((aa, bb))
    return lab, n


def confusion_counts(pred, ref, margin, valid=None):
    """Cell-by-cell counting inside the margin-dilated bounding box of pred | ref."""
    h, w = len(pred), len(pred[0])
    rows = [r for r in range(h) if any(pred[r][c] or ref[r][c] for c in range(w))]
    cols = [c for c in range(w) if any(pred[r][c] or ref[r][c] for r in range(h))]
    r0, r1 = max(0, rows[0] - margin), min(h - 1, rows[-1] + margin)
    c0, c1 = max(0, cols[0] - margin), min(w - 1, cols[-1] + margin)
    tp = tn = fp = fn = 0
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if valid is not None and not valid[r][c]:
                continue
            p, t = bool(pred[r][c]), bool(ref[r][c])
            if p and t:
                tp += 1
            elif p:
                fp += 1
            elif t:
                fn += 1
            else:
                tn += 1
    return tp, tn, fp, fn


def binary_close(mask, radius):
    """Closing on the unbounded plane by direct set definitions, cropped to the grid."""
    h, w = len(mask), len(mask[0])
    se = [(dr, dc) for dr in range(-radius, radius + 1) for dc in range(-radius, radius + 1)
          if math.hypot(dr, dc) <= radius + 0.5]
    pts = {(r, c) for r in range(h) for c in range(w) if mask[r][c]}
    dil = {(r + dr, c + dc) for r, c in pts for dr, dc in se}
    return [[all((r + dr, c + dc) in dil for dr, dc in se) for c in range(w)] for r in range(h)]
