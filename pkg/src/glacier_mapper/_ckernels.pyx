# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_pykernels`` exactly, including tie-breaking."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef int DR[8]
cdef int DC[8]
cdef double DIST[8]
DR[:] = [0, 1, 1, 1, 0, -1, -1, -1]
DC[:] = [1, 1, 0, -1, -1, -1, 0, 1]
DIST[:] = [1.0, sqrt(2.0), 1.0, sqrt(2.0), 1.0, sqrt(2.0), 1.0, sqrt(2.0)]

cdef enum:
    SINK = -1
    NODATA = -2


cdef cnp.uint8_t[:, ::1] _outlets(cnp.uint8_t[:, ::1] valid):
    cdef Py_ssize_t h = valid.shape[0], w = valid.shape[1], r, c, rr, cc
    cdef int k
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    for r in range(h):
        for c in range(w):
            if not valid[r, c]:
                continue
            for k in range(8):
                rr = r + DR[k]
                cc = c + DC[k]
                if rr < 0 or rr >= h or cc < 0 or cc >= w or not valid[rr, cc]:
                    out[r, c] = 1
                    break
    return out


# -- binary min-heap keyed by (value, index) ---------------------------------

cdef struct HeapItem:
    double z
    Py_ssize_t idx

cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    return a.z < b.z or (a.z == b.z and a.idx < b.idx)

cdef void _push(HeapItem* heap, Py_ssize_t* size, HeapItem item) nogil:
    cdef Py_ssize_t i = size[0], parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) // 2
        if _less(item, heap[parent]):
            heap[i] = heap[parent]
            i = parent
        else:
            break
    heap[i] = item

cdef HeapItem _pop(HeapItem* heap, Py_ssize_t* size) nogil:
    cdef HeapItem top = heap[0], last
    cdef Py_ssize_t i = 0, child
    size[0] -= 1
    last = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and _less(heap[child + 1], heap[child]):
            child += 1
        if _less(heap[child], last):
            heap[i] = heap[child]
            i = child
        else:
            break
    heap[i] = last
    return top


def priority_flood(elev, valid):
    cdef cnp.float64_t[:, ::1] z = np.array(elev, dtype=np.float64, order="C")
    cdef cnp.uint8_t[:, ::1] ok = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1], r, c, rr, cc, size = 0
    cdef int k
    cdef cnp.uint8_t[:, ::1] outlet = _outlets(ok)
    done_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] done = done_arr
    cdef HeapItem* heap = <HeapItem*> malloc((h * w + 1) * sizeof(HeapItem))
    cdef HeapItem item
    if heap == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(h):
                for c in range(w):
                    if not ok[r, c]:
                        done[r, c] = 1
                    elif outlet[r, c]:
                        done[r, c] = 1
                        item.z = z[r, c]
                        item.idx = r * w + c
                        _push(heap, &size, item)
            while size > 0:
                item = _pop(heap, &size)
                r = item.idx // w
                c = item.idx % w
                for k in range(8):
                    rr = r + DR[k]
                    cc = c + DC[k]
                    if rr < 0 or rr >= h or cc < 0 or cc >= w or done[rr, cc]:
                        continue
                    done[rr, cc] = 1
                    if z[rr, cc] < item.z:
                        z[rr, cc] = item.z
                    _push(heap, &size, HeapItem(z[rr, cc], rr * w + cc))
    finally:
        free(heap)
    return np.asarray(z)


def d8_flowdir(elev, valid):
    cdef cnp.float64_t[:, ::1] z = np.ascontiguousarray(elev, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] ok = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1], r, c, rr, cc
    cdef int k
    cdef signed char d
    cdef double best, s
    out = np.empty((h, w), dtype=np.int8)
    cdef cnp.int8_t[:, ::1] dirs = out
    with nogil:
        for r in range(h):
            for c in range(w):
                if not ok[r, c]:
                    dirs[r, c] = NODATA
                    continue
                best = 0.0
                d = SINK
                for k in range(8):
                    rr = r + DR[k]
                    cc = c + DC[k]
                    if rr < 0 or rr >= h or cc < 0 or cc >= w or not ok[rr, cc]:
                        continue
                    s = (z[r, c] - z[rr, cc]) / DIST[k]
                    if s > best:
                        best = s
                        d = k
                dirs[r, c] = d
    return out


def resolve_flats(elev, valid, dirs_in):
    cdef cnp.float64_t[:, ::1] z = np.ascontiguousarray(elev, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] ok = np.ascontiguousarray(valid, dtype=np.uint8)
    out = np.array(dirs_in, dtype=np.int8, order="C")
    cdef cnp.int8_t[:, ::1] dirs = out
    cdef Py_ssize_t h = z.shape[0], w = z.shape[1], r, c, rr, cc, head = 0, tail = 0, i
    cdef int k
    cdef long long d
    cdef cnp.uint8_t[:, ::1] outlet = _outlets(ok)
    cand_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] cand = cand_arr
    dist_arr = np.full((h, w), -1, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] dist = dist_arr
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef bint any_cand = False
    for r in range(h):
        for c in range(w):
            if dirs[r, c] == SINK and not outlet[r, c]:
                cand[r, c] = 1
                any_cand = True
    if not any_cand:
        return out
    with nogil:
        for r in range(h):
            for c in range(w):
                if not ok[r, c] or cand[r, c]:
                    continue
                for k in range(8):
                    rr = r + DR[k]
                    cc = c + DC[k]
                    if 0 <= rr < h and 0 <= cc < w and cand[rr, cc] and z[rr, cc] == z[r, c]:
                        dist[r, c] = 0
                        queue[tail] = r * w + c
                        tail += 1
                        break
        while head < tail:
            i = queue[head]
            head += 1
            r = i // w
            c = i % w
            for k in range(8):
                rr = r + DR[k]
                cc = c + DC[k]
                if 0 <= rr < h and 0 <= cc < w and cand[rr, cc] and dist[rr, cc] < 0 and z[rr, cc] == z[r, c]:
                    dist[rr, cc] = dist[r, c] + 1
                    queue[tail] = rr * w + cc
                    tail += 1
        for r in range(h):
            for c in range(w):
                if not cand[r, c] or dist[r, c] <= 0:
                    continue
                d = dist[r, c]
                for k in range(8):
                    rr = r + DR[k]
                    cc = c + DC[k]
                    if 0 <= rr < h and 0 <= cc < w and ok[rr, cc] and z[rr, cc] == z[r, c] and dist[rr, cc] == d - 1:
                        dirs[r, c] = k
                        break
    return out


cdef cnp.int64_t[::1] _downstream(cnp.int8_t[:, ::1] dirs):
    cdef Py_ssize_t h = dirs.shape[0], w = dirs.shape[1], r, c
    cdef int k
    out_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    for r in range(h):
        for c in range(w):
            k = dirs[r, c]
            out[r * w + c] = (r + DR[k]) * w + c + DC[k] if k >= 0 else -1
    return out


def downstream(dirs):
    return np.asarray(_downstream(np.ascontiguousarray(dirs, dtype=np.int8)))


def topo_order(dirs_in):
    cdef cnp.int8_t[:, ::1] dirs = np.ascontiguousarray(dirs_in, dtype=np.int8)
    cdef Py_ssize_t n = dirs.shape[0] * dirs.shape[1], i, head = 0, tail = 0, nvalid = 0
    cdef cnp.int64_t[::1] down = _downstream(dirs)
    cdef cnp.int8_t[::1] flat = np.asarray(dirs).ravel()
    indeg_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] indeg = indeg_arr
    order_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_arr
    cdef cnp.int64_t d
    with nogil:
        for i in range(n):
            if down[i] >= 0:
                indeg[down[i]] += 1
        for i in range(n):
            if flat[i] != NODATA:
                nvalid += 1
                if indeg[i] == 0:
                    order[tail] = i
                    tail += 1
        while head < tail:
            i = order[head]
            head += 1
            d = down[i]
            if d >= 0:
                indeg[d] -= 1
                if indeg[d] == 0:
                    order[tail] = d
                    tail += 1
    if tail != nvalid:
        return None
    return order_arr[:tail].copy()


def accumulate(dirs_in, order_in):
    cdef cnp.int8_t[:, ::1] dirs = np.ascontiguousarray(dirs_in, dtype=np.int8)
    cdef cnp.int64_t[::1] order = np.ascontiguousarray(order_in, dtype=np.int64)
    cdef cnp.int64_t[::1] down = _downstream(dirs)
    acc_arr = (np.asarray(dirs).ravel() != NODATA).astype(np.float64)
    cdef cnp.float64_t[::1] acc = acc_arr
    cdef Py_ssize_t j, i
    with nogil:
        for j in range(order.shape[0]):
            i = order[j]
            if down[i] >= 0:
                acc[down[i]] += acc[i]
    return acc_arr.reshape(dirs.shape[0], dirs.shape[1])


def basins(dirs_in, order_in, targets):
    cdef cnp.int8_t[:, ::1] dirs = np.ascontiguousarray(dirs_in, dtype=np.int8)
    cdef cnp.int64_t[::1] order = np.ascontiguousarray(order_in, dtype=np.int64)
    cdef cnp.int64_t[::1] down = _downstream(dirs)
    cdef Py_ssize_t n = dirs.shape[0] * dirs.shape[1], j, i
    lab_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] lab = lab_arr
    cdef bint targeted = targets is not None
    cdef cnp.int64_t[::1] tgt = np.ascontiguousarray(targets, dtype=np.int64).ravel() if targeted else lab_arr
    with nogil:
        for j in range(order.shape[0] - 1, -1, -1):
            i = order[j]
            if targeted and tgt[i] > 0:
                lab[i] = tgt[i]
            elif down[i] >= 0:
                lab[i] = lab[down[i]]
            elif not targeted:
                lab[i] = i + 1
    return lab_arr.reshape(dirs.shape[0], dirs.shape[1])


def knn_predict(samples_in, labels_in, queries_in, int k):
    cdef cnp.float64_t[:, ::1] samples = np.ascontiguousarray(samples_in, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] queries = np.ascontiguousarray(queries_in, dtype=np.float64)
    cdef cnp.uint8_t[::1] labels = np.ascontiguousarray(labels_in, dtype=np.uint8)
    cdef Py_ssize_t n = samples.shape[0], m = queries.shape[0], nf = samples.shape[1]
    cdef Py_ssize_t q, s, f, j, cnt
    cdef double acc, diff
    cdef long votes
    out_arr = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    if k > n:
        k = n
    if m == 0 or n == 0:
        return out_arr
    cdef double* bd = <double*> malloc(k * sizeof(double))
    cdef Py_ssize_t* bi = <Py_ssize_t*> malloc(k * sizeof(Py_ssize_t))
    if bd == NULL or bi == NULL:
        free(bd)
        free(bi)
        raise MemoryError()
    try:
        with nogil:
            for q in range(m):
                cnt = 0
                for s in range(n):
                    acc = 0.0
                    for f in range(nf):
                        diff = queries[q, f] - samples[s, f]
                        acc += diff * diff
                    # sorted insertion; strict < keeps earlier samples ahead on equal distance
                    if cnt < k:
                        j = cnt
                        cnt += 1
                    elif acc < bd[k - 1]:
                        j = k - 1
                    else:
                        continue
                    while j > 0 and acc < bd[j - 1]:
                        bd[j] = bd[j - 1]
                        bi[j] = bi[j - 1]
                        j -= 1
                    bd[j] = acc
                    bi[j] = s
                votes = 0
                for j in range(k):
                    votes += labels[bi[j]]
                if 2 * votes > k:
                    out[q] = 1
                elif 2 * votes == k:
                    out[q] = labels[bi[0]]
    finally:
        free(bd)
        free(bi)
    return out_arr
