# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.  Must stay result-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport hypot, floor

cnp.import_array()


def disc_counts(const double[::1] xs, const double[::1] ys, const cnp.int64_t[::1] owner,
                double cx, double cy, double radius, Py_ssize_t m):
    cdef cnp.int64_t[::1] out = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t i, n = xs.shape[0]
    with nogil:
        for i in range(n):
            if hypot(xs[i] - cx, ys[i] - cy) < radius:
                out[owner[i]] += 1
    return np.asarray(out)


def disc_sums(const double[::1] xs, const double[::1] ys, const cnp.int64_t[::1] owner,
              const double[::1] weights, double cx, double cy, double radius, Py_ssize_t m):
    cdef double[::1] out = np.zeros(m, dtype=np.float64)
    cdef Py_ssize_t i, n = xs.shape[0]
    with nogil:
        for i in range(n):
            if hypot(xs[i] - cx, ys[i] - cy) < radius:
                out[owner[i]] += weights[i]
    return np.asarray(out)


def grid_counts(const double[::1] xs, const double[::1] ys, const cnp.int64_t[::1] owner,
                double min_x, double min_y, double max_x, double max_y,
                Py_ssize_t k, Py_ssize_t m):
    cdef cnp.int64_t[:, ::1] out = np.zeros((m, k * k), dtype=np.int64)
    cdef Py_ssize_t i, row, col, n = xs.shape[0]
    cdef double wx = max_x - min_x, wy = max_y - min_y
    cdef double fc, fr
    with nogil:
        for i in range(n):
            fc = floor(((xs[i] - min_x) / wx) * k)
            fr = floor(((max_y - ys[i]) / wy) * k)
            if fc < 0:
                fc = 0
            elif fc > k - 1:
                fc = k - 1
            if fr < 0:
                fr = 0
            elif fr > k - 1:
                fr = k - 1
            col = <Py_ssize_t>fc
            row = <Py_ssize_t>fr
            out[owner[i], row * k + col] += 1
    return np.asarray(out)


def greedy_color(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                 const cnp.int64_t[::1] caps):
    """Lowest-available colour over a CSR conflict graph, vertices in index order.

    ``caps[u]`` bounds the size of the colour class u may join; a class also
    remembers the smallest cap among its members.
    """
    cdef Py_ssize_t m = indptr.shape[0] - 1
    cdef cnp.int64_t[::1] color = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] stamp = np.zeros(m + 2, dtype=np.int64)
    cdef cnp.int64_t[::1] size = np.zeros(m + 2, dtype=np.int64)
    cdef cnp.int64_t[::1] gcap = np.zeros(m + 2, dtype=np.int64)
    cdef Py_ssize_t u, p, c, used = 0
    cdef cnp.int64_t limit
    with nogil:
        for u in range(m):
            for p in range(indptr[u], indptr[u + 1]):
                c = color[indices[p]]
                if c > 0:
                    stamp[c] = u + 1
            c = 1
            while True:
                if c > used:
                    break
                if stamp[c] != u + 1:
                    limit = gcap[c] if gcap[c] < caps[u] else caps[u]
                    if size[c] < limit:
                        break
                c += 1
            if c > used:
                used = c
                gcap[c] = caps[u]
            elif caps[u] < gcap[c]:
                gcap[c] = caps[u]
            color[u] = c
            size[c] += 1
    return np.asarray(color)
