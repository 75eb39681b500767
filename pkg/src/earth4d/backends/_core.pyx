# Compiled kernels for grid indexing, interpolation, and probing.
#
# These mirror fallback.py operation for operation. Plain (unprobed) paths
# accumulate corner-major in float64 and cast exactly like the numpy
# reference, so the two backends agree bitwise. Probed paths go through
# exp(), whose last ulp is not pinned across libm implementations, so their
# parity is close but not bitwise.

from libc.stdint cimport uint64_t
from libc.math cimport floor as c_floor, exp as c_exp

import numpy as np

ctypedef fused table_t:
    float
    double

cdef uint64_t P0 = 1
cdef uint64_t P1 = 2654435761
cdef uint64_t P2 = 805459861
cdef uint64_t Q0 = 2097192037
cdef uint64_t Q1 = 1434869437
cdef uint64_t Q2 = 2165219737


cdef inline uint64_t _hash3(uint64_t i, uint64_t j, uint64_t k, uint64_t mask) nogil:
    return ((i * P0) ^ (j * P1) ^ (k * P2)) & mask


cdef inline uint64_t _probe3(uint64_t i, uint64_t j, uint64_t k, uint64_t mask) nogil:
    return ((i * Q0) ^ (j * Q1) ^ (k * Q2)) & mask


cdef inline uint64_t _dense3(uint64_t i, uint64_t j, uint64_t k, uint64_t n) nogil:
    return i + n * (j + n * k)


def spatial_hash(vertices, table_rows):
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    shape = v.shape[:-1]
    flat = v.reshape(-1, 3)
    out = np.empty(flat.shape[0], dtype=np.uint64)
    cdef uint64_t[:, ::1] vv = flat
    cdef uint64_t[::1] oo = out
    cdef uint64_t mask = <uint64_t> table_rows - 1
    cdef Py_ssize_t i, n = vv.shape[0]
    with nogil:
        for i in range(n):
            oo[i] = _hash3(vv[i, 0], vv[i, 1], vv[i, 2], mask)
    return out.reshape(shape)


def probe_hash(vertices, table_rows):
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    shape = v.shape[:-1]
    flat = v.reshape(-1, 3)
    out = np.empty(flat.shape[0], dtype=np.uint64)
    cdef uint64_t[:, ::1] vv = flat
    cdef uint64_t[::1] oo = out
    cdef uint64_t mask = <uint64_t> table_rows - 1
    cdef Py_ssize_t i, n = vv.shape[0]
    with nogil:
        for i in range(n):
            oo[i] = _probe3(vv[i, 0], vv[i, 1], vv[i, 2], mask)
    return out.reshape(shape)


def dense_index(vertices, resolution):
    v = np.ascontiguousarray(vertices, dtype=np.uint64)
    shape = v.shape[:-1]
    flat = v.reshape(-1, 3)
    out = np.empty(flat.shape[0], dtype=np.uint64)
    cdef uint64_t[:, ::1] vv = flat
    cdef uint64_t[::1] oo = out
    cdef uint64_t nn = <uint64_t> resolution
    cdef Py_ssize_t i, n = vv.shape[0]
    with nogil:
        for i in range(n):
            oo[i] = _dense3(vv[i, 0], vv[i, 1], vv[i, 2], nn)
    return out.reshape(shape)


def base_cells(points, resolution):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    i0_arr = np.empty((n, 3), dtype=np.uint64)
    fr_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[:, ::1] pp = pts
    cdef uint64_t[:, ::1] i0 = i0_arr
    cdef double[:, ::1] fr = fr_arr
    cdef double scale = <double> (resolution - 1)
    cdef double hi = <double> (resolution - 2)
    cdef double x, f
    cdef Py_ssize_t i, d
    with nogil:
        for i in range(n):
            for d in range(3):
                x = pp[i, d] * scale
                f = c_floor(x)
                if f > hi:
                    f = hi
                fr[i, d] = x - f
                i0[i, d] = <uint64_t> f
    return i0_arr, fr_arr


def level_forward(points, resolution, dense, table):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    acc = np.zeros((pts.shape[0], table.shape[1]), dtype=np.float64)
    _forward_impl(pts, <Py_ssize_t> resolution, 1 if dense else 0, table, acc)
    return acc.astype(table.dtype)


def _forward_impl(double[:, ::1] pts, Py_ssize_t res, bint dense,
                  table_t[:, ::1] table, double[:, ::1] acc):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t nf = table.shape[1]
    cdef uint64_t mask = <uint64_t> table.shape[0] - 1
    cdef uint64_t nn = <uint64_t> res
    cdef double scale = <double> (res - 1)
    cdef double hi = <double> (res - 2)
    cdef double x, y, z, bx, by, bz, fx, fy, fz, w
    cdef uint64_t i0, j0, k0, vi, vj, vk, row
    cdef Py_ssize_t i, f
    cdef int c, dx, dy, dz
    with nogil:
        for i in range(n):
            x = pts[i, 0] * scale
            y = pts[i, 1] * scale
            z = pts[i, 2] * scale
            bx = c_floor(x)
            by = c_floor(y)
            bz = c_floor(z)
            if bx > hi:
                bx = hi
            if by > hi:
                by = hi
            if bz > hi:
                bz = hi
            fx = x - bx
            fy = y - by
            fz = z - bz
            i0 = <uint64_t> bx
            j0 = <uint64_t> by
            k0 = <uint64_t> bz
            for c in range(8):
                dx = c & 1
                dy = (c >> 1) & 1
                dz = (c >> 2) & 1
                vi = i0 + <uint64_t> dx
                vj = j0 + <uint64_t> dy
                vk = k0 + <uint64_t> dz
                w = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
                w = w * (fz if dz else 1.0 - fz)
                if dense:
                    row = _dense3(vi, vj, vk, nn)
                else:
                    row = _hash3(vi, vj, vk, mask)
                for f in range(nf):
                    acc[i, f] += w * <double> table[row, f]


def level_backward(points, resolution, dense, upstream, grad_table):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    up = np.ascontiguousarray(upstream, dtype=np.float64)
    i0, fr = base_cells(pts, resolution)
    _backward_impl(i0, fr, <Py_ssize_t> resolution, 1 if dense else 0, up,
                   grad_table)


def _backward_impl(uint64_t[:, ::1] i0, double[:, ::1] fr, Py_ssize_t res,
                   bint dense, double[:, ::1] up, table_t[:, ::1] grad):
    # Corner-major with ascending point index inside each corner, matching
    # the scatter-add order of the numpy reference.
    cdef Py_ssize_t n = i0.shape[0]
    cdef Py_ssize_t nf = grad.shape[1]
    cdef uint64_t mask = <uint64_t> grad.shape[0] - 1
    cdef uint64_t nn = <uint64_t> res
    cdef double w
    cdef uint64_t vi, vj, vk, row
    cdef Py_ssize_t i, f
    cdef int c, dx, dy, dz
    with nogil:
        for c in range(8):
            dx = c & 1
            dy = (c >> 1) & 1
            dz = (c >> 2) & 1
            for i in range(n):
                vi = i0[i, 0] + <uint64_t> dx
                vj = i0[i, 1] + <uint64_t> dy
                vk = i0[i, 2] + <uint64_t> dz
                w = (fr[i, 0] if dx else 1.0 - fr[i, 0]) \
                    * (fr[i, 1] if dy else 1.0 - fr[i, 1])
                w = w * (fr[i, 2] if dz else 1.0 - fr[i, 2])
                if dense:
                    row = _dense3(vi, vj, vk, nn)
                else:
                    row = _hash3(vi, vj, vk, mask)
                for f in range(nf):
                    grad[row, f] += <table_t> (w * up[i, f])


def probed_level_forward(points, resolution, table, logits, tau, hard):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    acc = np.zeros((pts.shape[0], table.shape[1]), dtype=np.float64)
    scratch = np.empty(logits.shape[1], dtype=np.float64)
    _probed_forward_impl(pts, <Py_ssize_t> resolution, table, logits,
                         <double> tau, 1 if hard else 0, acc, scratch)
    return acc.astype(table.dtype)


def _probed_forward_impl(double[:, ::1] pts, Py_ssize_t res,
                         table_t[:, ::1] table, table_t[:, ::1] logits,
                         double tau, bint hard, double[:, ::1] acc,
                         double[::1] sbuf):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t nf = table.shape[1]
    cdef Py_ssize_t np_ = logits.shape[1]
    cdef uint64_t mask = <uint64_t> table.shape[0] - 1
    cdef uint64_t pmask = <uint64_t> logits.shape[0] - 1
    cdef double scale = <double> (res - 1)
    cdef double hi = <double> (res - 2)
    cdef double x, y, z, bx, by, bz, fx, fy, fz, w, zmax, ssum, best, mix
    cdef uint64_t i0, j0, k0, vi, vj, vk, row, prow, cand
    cdef Py_ssize_t i, f, k, kbest
    cdef int c, dx, dy, dz
    with nogil:
        for i in range(n):
            x = pts[i, 0] * scale
            y = pts[i, 1] * scale
            z = pts[i, 2] * scale
            bx = c_floor(x)
            by = c_floor(y)
            bz = c_floor(z)
            if bx > hi:
                bx = hi
            if by > hi:
                by = hi
            if bz > hi:
                bz = hi
            fx = x - bx
            fy = y - by
            fz = z - bz
            i0 = <uint64_t> bx
            j0 = <uint64_t> by
            k0 = <uint64_t> bz
            for c in range(8):
                dx = c & 1
                dy = (c >> 1) & 1
                dz = (c >> 2) & 1
                vi = i0 + <uint64_t> dx
                vj = j0 + <uint64_t> dy
                vk = k0 + <uint64_t> dz
                w = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
                w = w * (fz if dz else 1.0 - fz)
                row = _hash3(vi, vj, vk, mask)
                prow = _probe3(vi, vj, vk, pmask)
                if hard:
                    kbest = 0
                    best = <double> logits[prow, 0]
                    for k in range(1, np_):
                        if <double> logits[prow, k] > best:
                            best = <double> logits[prow, k]
                            kbest = k
                    cand = (row + <uint64_t> kbest) & mask
                    for f in range(nf):
                        acc[i, f] += w * <double> table[cand, f]
                else:
                    zmax = <double> logits[prow, 0] / tau
                    for k in range(1, np_):
                        if <double> logits[prow, k] / tau > zmax:
                            zmax = <double> logits[prow, k] / tau
                    ssum = 0.0
                    for k in range(np_):
                        sbuf[k] = c_exp(<double> logits[prow, k] / tau - zmax)
                        ssum += sbuf[k]
                    for f in range(nf):
                        mix = 0.0
                        for k in range(np_):
                            cand = (row + <uint64_t> k) & mask
                            mix += (sbuf[k] / ssum) * <double> table[cand, f]
                        acc[i, f] += w * mix


def probed_level_backward(points, resolution, table, logits, tau, hard,
                          upstream, grad_table, grad_logits):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    up = np.ascontiguousarray(upstream, dtype=np.float64)
    i0, fr = base_cells(pts, resolution)
    want_logits = grad_logits is not None
    if grad_logits is None:
        grad_logits = np.zeros((1, logits.shape[1]), dtype=np.asarray(logits).dtype)
    scratch = np.empty((2, logits.shape[1]), dtype=np.float64)
    _probed_backward_impl(i0, fr, <Py_ssize_t> resolution, table, logits,
                          <double> tau, 1 if hard else 0, up, grad_table,
                          grad_logits, 1 if want_logits else 0, scratch)


def _probed_backward_impl(uint64_t[:, ::1] i0, double[:, ::1] fr,
                          Py_ssize_t res, table_t[:, ::1] table,
                          table_t[:, ::1] logits, double tau, bint hard,
                          double[:, ::1] up, table_t[:, ::1] grad_table,
                          table_t[:, ::1] grad_logits, bint want_logits,
                          double[:, ::1] scratch):
    cdef Py_ssize_t n = i0.shape[0]
    cdef Py_ssize_t nf = table.shape[1]
    cdef Py_ssize_t np_ = logits.shape[1]
    cdef uint64_t mask = <uint64_t> table.shape[0] - 1
    cdef uint64_t pmask = <uint64_t> logits.shape[0] - 1
    cdef double w, zmax, ssum, best, g, sg, s
    cdef uint64_t vi, vj, vk, row, prow, cand
    cdef Py_ssize_t i, f, k, kbest
    cdef int c, dx, dy, dz
    with nogil:
        for c in range(8):
            dx = c & 1
            dy = (c >> 1) & 1
            dz = (c >> 2) & 1
            for i in range(n):
                vi = i0[i, 0] + <uint64_t> dx
                vj = i0[i, 1] + <uint64_t> dy
                vk = i0[i, 2] + <uint64_t> dz
                w = (fr[i, 0] if dx else 1.0 - fr[i, 0]) \
                    * (fr[i, 1] if dy else 1.0 - fr[i, 1])
                w = w * (fr[i, 2] if dz else 1.0 - fr[i, 2])
                row = _hash3(vi, vj, vk, mask)
                prow = _probe3(vi, vj, vk, pmask)
                if hard:
                    kbest = 0
                    best = <double> logits[prow, 0]
                    for k in range(1, np_):
                        if <double> logits[prow, k] > best:
                            best = <double> logits[prow, k]
                            kbest = k
                    cand = (row + <uint64_t> kbest) & mask
                    for f in range(nf):
                        grad_table[cand, f] += <table_t> (w * up[i, f])
                    continue
                zmax = <double> logits[prow, 0] / tau
                for k in range(1, np_):
                    if <double> logits[prow, k] / tau > zmax:
                        zmax = <double> logits[prow, k] / tau
                ssum = 0.0
                for k in range(np_):
                    scratch[0, k] = c_exp(<double> logits[prow, k] / tau - zmax)
                    ssum += scratch[0, k]
                sg = 0.0
                for k in range(np_):
                    s = scratch[0, k] / ssum
                    scratch[0, k] = s
                    cand = (row + <uint64_t> k) & mask
                    g = 0.0
                    for f in range(nf):
                        g += up[i, f] * <double> table[cand, f]
                        grad_table[cand, f] += <table_t> (w * s * up[i, f])
                    scratch[1, k] = g
                    sg += s * g
                if want_logits:
                    for k in range(np_):
                        grad_logits[prow, k] += <table_t> (
                            (w / tau) * scratch[0, k] * (scratch[1, k] - sg))


def corner_vertices(points, resolution):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    i0, _ = base_cells(pts, resolution)
    out = np.empty((pts.shape[0], 8, 3), dtype=np.uint64)
    cdef uint64_t[:, ::1] ii = i0
    cdef uint64_t[:, :, ::1] oo = out
    cdef Py_ssize_t i, n = pts.shape[0]
    cdef int c
    with nogil:
        for i in range(n):
            for c in range(8):
                oo[i, c, 0] = ii[i, 0] + <uint64_t> (c & 1)
                oo[i, c, 1] = ii[i, 1] + <uint64_t> ((c >> 1) & 1)
                oo[i, c, 2] = ii[i, 2] + <uint64_t> ((c >> 2) & 1)
    return out
