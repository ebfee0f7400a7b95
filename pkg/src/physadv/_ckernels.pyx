# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``."""
import numpy as np
from libc.math cimport exp, fabs
from libc.stdlib cimport malloc, free


def rref(a, double tol):
    cdef double[:, ::1] r = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t nrows = r.shape[0], ncols = r.shape[1]
    cdef Py_ssize_t row = 0, col, i, j, best
    cdef double v, bestv, f, piv
    pivots = []
    for col in range(ncols):
        if row >= nrows:
            break
        best = row
        bestv = fabs(r[row, col])
        for i in range(row + 1, nrows):
            v = fabs(r[i, col])
            if v > bestv:
                bestv = v
                best = i
        if bestv < tol:
            for i in range(row, nrows):
                r[i, col] = 0.0
            continue
        if best != row:
            for j in range(ncols):
                v = r[row, j]
                r[row, j] = r[best, j]
                r[best, j] = v
        piv = r[row, col]
        for j in range(ncols):
            r[row, j] = r[row, j] / piv
        r[row, col] = 1.0
        for i in range(nrows):
            if i != row:
                f = r[i, col]
                if f != 0.0:
                    for j in range(ncols):
                        r[i, j] = r[i, j] - f * r[row, j]
                    r[i, col] = 0.0
        pivots.append(col)
        row += 1
    for i in range(row, nrows):
        for j in range(ncols):
            r[i, j] = 0.0
    return np.asarray(r), pivots


cdef void _dense(const double[:, ::1] w, const double[::1] b, const double* a,
                 double* z) noexcept nogil:
    cdef Py_ssize_t nin = w.shape[0], nout = w.shape[1], i, j
    cdef double ai
    for j in range(nout):
        z[j] = b[j]
    for i in range(nin):
        ai = a[i]
        if ai != 0.0:
            for j in range(nout):
                z[j] += ai * w[i, j]


cdef void _softmax_inplace(double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    cdef double m = z[0], s = 0.0
    for j in range(1, n):
        if z[j] > m:
            m = z[j]
    for j in range(n):
        z[j] = exp(z[j] - m)
        s += z[j]
    for j in range(n):
        z[j] /= s


cdef double* _run(list weights, list biases, const double[::1] x, Py_ssize_t* offsets,
                  Py_ssize_t nl) except NULL:
    """Forward pass into one malloc'd buffer laid out as
    [x | z_0 | a_0 | z_1 | a_1 | ... ]; caller frees. ``offsets[k]`` is the start
    of layer k's pre-activation, the activation follows it."""
    cdef Py_ssize_t k, j, n, total = x.shape[0]
    for k in range(nl):
        offsets[k] = total
        total += 2 * weights[k].shape[1]
    cdef double* buf = <double*> malloc(total * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    for j in range(x.shape[0]):
        buf[j] = x[j]
    cdef double* a = buf
    cdef double* z
    for k in range(nl):
        n = weights[k].shape[1]
        z = buf + offsets[k]
        _dense(weights[k], biases[k], a, z)
        a = z + n
        for j in range(n):
            a[j] = z[j] if z[j] > 0.0 else 0.0
        if k == nl - 1:
            for j in range(n):
                a[j] = z[j]
            _softmax_inplace(a, n)
    return buf


def forward(list weights, list biases, x):
    cdef Py_ssize_t nl = len(weights), n = weights[nl - 1].shape[1], j
    cdef Py_ssize_t* offsets = <Py_ssize_t*> malloc(nl * sizeof(Py_ssize_t))
    cdef double* buf = NULL
    out = np.empty(n)
    cdef double[::1] o = out
    try:
        buf = _run(weights, biases, np.ascontiguousarray(x, dtype=np.float64), offsets, nl)
        for j in range(n):
            o[j] = buf[offsets[nl - 1] + n + j]
    finally:
        free(buf)
        free(offsets)
    return out


def loss_input_gradient(list weights, list biases, x, target):
    cdef const double[::1] tv = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t nl = len(weights), K = weights[nl - 1].shape[1]
    cdef Py_ssize_t d = weights[0].shape[0], width, k, i, j
    cdef Py_ssize_t* offsets = <Py_ssize_t*> malloc(nl * sizeof(Py_ssize_t))
    cdef double* buf = NULL
    cdef double* scratch = NULL
    cdef double* dz
    cdef double* da
    cdef double* zprev
    cdef double* p
    cdef const double[:, ::1] w
    cdef double dot = 0.0, s
    probs = np.empty(K)
    grad = np.empty(d)
    cdef double[::1] pv = probs, gv = grad
    try:
        buf = _run(weights, biases, np.ascontiguousarray(x, dtype=np.float64), offsets, nl)
        width = d
        for k in range(nl):
            if weights[k].shape[1] > width:
                width = weights[k].shape[1]
        scratch = <double*> malloc(2 * width * sizeof(double))
        if scratch == NULL:
            raise MemoryError()
        dz = scratch
        da = scratch + width
        p = buf + offsets[nl - 1] + K
        for j in range(K):
            pv[j] = p[j]
            dz[j] = 2.0 * (p[j] - tv[j]) / K
            dot += dz[j] * p[j]
        for j in range(K):
            dz[j] = p[j] * (dz[j] - dot)
        for k in range(nl - 1, -1, -1):
            w = weights[k]
            for i in range(w.shape[0]):
                s = 0.0
                for j in range(w.shape[1]):
                    s += w[i, j] * dz[j]
                da[i] = s
            if k > 0:
                zprev = buf + offsets[k - 1]
                for i in range(w.shape[0]):
                    if zprev[i] <= 0.0:
                        da[i] = 0.0
            dz, da = da, dz
        for i in range(d):
            gv[i] = dz[i]
    finally:
        free(buf)
        free(scratch)
        free(offsets)
    return probs, grad
