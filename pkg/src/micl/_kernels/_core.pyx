# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: 4-connected component search and one region-
growing iteration. Semantics mirror micl._kernels.pure exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF UNLABELED = -2  # must match micl.kernels.UNLABELED


def largest_component(const unsigned char[:, ::1] binary):
    cdef Py_ssize_t height = binary.shape[0]
    cdef Py_ssize_t width = binary.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] visited_arr = np.zeros(
        (height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] visited = visited_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] qy_arr = np.empty(height * width, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] qx_arr = np.empty(height * width, dtype=np.int64)
    cdef long long[::1] qy = qy_arr
    cdef long long[::1] qx = qx_arr

    cdef Py_ssize_t y, x, cy, cx, head, tail
    cdef Py_ssize_t size, y0, x0, y1, x1
    cdef Py_ssize_t best_size = 0, best_y0 = 0, best_x0 = 0, best_y1 = 0, best_x1 = 0
    cdef bint found = False, better

    for y in range(height):
        for x in range(width):
            if binary[y, x] == 0 or visited[y, x]:
                continue
            head = 0
            tail = 0
            qy[tail] = y
            qx[tail] = x
            tail += 1
            visited[y, x] = 1
            size = 0
            y0 = y
            x0 = x
            y1 = y
            x1 = x
            while head < tail:
                cy = qy[head]
                cx = qx[head]
                head += 1
                size += 1
                if cy < y0:
                    y0 = cy
                if cy > y1:
                    y1 = cy
                if cx < x0:
                    x0 = cx
                if cx > x1:
                    x1 = cx
                if cy > 0 and binary[cy - 1, cx] and not visited[cy - 1, cx]:
                    visited[cy - 1, cx] = 1
                    qy[tail] = cy - 1
                    qx[tail] = cx
                    tail += 1
                if cy + 1 < height and binary[cy + 1, cx] and not visited[cy + 1, cx]:
                    visited[cy + 1, cx] = 1
                    qy[tail] = cy + 1
                    qx[tail] = cx
                    tail += 1
                if cx > 0 and binary[cy, cx - 1] and not visited[cy, cx - 1]:
                    visited[cy, cx - 1] = 1
                    qy[tail] = cy
                    qx[tail] = cx - 1
                    tail += 1
                if cx + 1 < width and binary[cy, cx + 1] and not visited[cy, cx + 1]:
                    visited[cy, cx + 1] = 1
                    qy[tail] = cy
                    qx[tail] = cx + 1
                    tail += 1
            if not found:
                better = True
            elif size != best_size:
                better = size > best_size
            elif y0 != best_y0:
                better = y0 < best_y0
            else:
                better = x0 < best_x0
            if better:
                found = True
                best_size = size
                best_y0 = y0
                best_x0 = x0
                best_y1 = y1
                best_x1 = x1

    if not found:
        return None
    return (best_size, best_y0, best_x0, best_y1 + 1, best_x1 + 1)


def grow_step(const double[:, :, ::1] features, int[:, ::1] labels,
              const int[::1] cats, const double[:, ::1] means, double tau_sq):
    cdef Py_ssize_t height = labels.shape[0]
    cdef Py_ssize_t width = labels.shape[1]
    cdef Py_ssize_t n_channels = features.shape[2]
    cdef Py_ssize_t n_cats = cats.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] adopt_arr = np.full(
        (height, width), -1, dtype=np.int32)
    cdef int[:, ::1] adopt = adopt_arr

    cdef Py_ssize_t y, x, i, k
    cdef int c
    cdef double d2, best_d2, diff
    cdef bint neighbor, found
    cdef int n_adopted = 0

    for y in range(height):
        for x in range(width):
            if labels[y, x] != UNLABELED:
                continue
            found = False
            best_d2 = 0.0
            for i in range(n_cats):
                c = cats[i]
                neighbor = (
                    (y > 0 and labels[y - 1, x] == c)
                    or (y + 1 < height and labels[y + 1, x] == c)
                    or (x > 0 and labels[y, x - 1] == c)
                    or (x + 1 < width and labels[y, x + 1] == c)
                )
                if not neighbor:
                    continue
                d2 = 0.0
                for k in range(n_channels):
                    diff = features[y, x, k] - means[i, k]
                    d2 += diff * diff
                if d2 <= tau_sq and (not found or d2 < best_d2):
                    found = True
                    best_d2 = d2
                    adopt[y, x] = c

    for y in range(height):
        for x in range(width):
            if adopt[y, x] >= 0:
                labels[y, x] = adopt[y, x]
                n_adopted += 1
    return n_adopted
