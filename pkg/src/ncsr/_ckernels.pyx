# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in _pykernels (same signatures)."""
import numpy as np
cimport numpy as cnp

cdef int N_BISECT = 96


cdef inline double _ev(double x, const double[:] breaks, const double[:, :] coefs) noexcept nogil:
    cdef Py_ssize_t k = breaks.shape[0]
    cdef Py_ssize_t lo = 0, hi = k, mid
    # last index with breaks[i] <= x, clipped to 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if breaks[mid] <= x:
            lo = mid
        else:
            hi = mid
    cdef Py_ssize_t j
    cdef double acc = 0.0
    for j in range(coefs.shape[1] - 1, -1, -1):
        acc = acc * x + coefs[lo, j]
    return acc


def ppoly_eval(x, breaks, coefs):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef const double[:] xf = xa.ravel()
    cdef const double[:] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef const double[:, :] cf = np.ascontiguousarray(coefs, dtype=np.float64)
    out = np.empty(xf.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xf.shape[0]):
            o[i] = _ev(xf[i], br, cf)
    return out.reshape(shape)


def omega(x, double z0, breaks, coefs):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    shape = xa.shape
    cdef const double[:] xf = xa.ravel()
    cdef const double[:] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef const double[:, :] cf = np.ascontiguousarray(coefs, dtype=np.float64)
    out = np.empty(xf.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    cdef int it
    cdef double w, lo, hi, mid, a
    with nogil:
        for i in range(xf.shape[0]):
            w = xf[i] if xf[i] >= 0 else -xf[i]
            if w == 0:
                o[i] = z0
                continue
            lo = z0 - w
            hi = z0
            for it in range(N_BISECT):
                mid = 0.5 * (lo + hi)
                if _ev(mid, br, cf) - _ev(mid + w, br, cf) > 0:
                    lo = mid
                else:
                    hi = mid
            a = 0.5 * (lo + hi)
            o[i] = a + w if xf[i] < 0 else a
    return out.reshape(shape)


def tauinv(v, double z0, double D, breaks, coefs):
    va = np.ascontiguousarray(v, dtype=np.float64)
    shape = va.shape
    cdef const double[:] vf = va.ravel()
    cdef const double[:] br = np.ascontiguousarray(breaks, dtype=np.float64)
    cdef const double[:, :] cf = np.ascontiguousarray(coefs, dtype=np.float64)
    out = np.empty(vf.shape[0])
    cdef double[:] o = out
    cdef Py_ssize_t i
    cdef int it
    cdef double y, side, step, a, b, mid
    with nogil:
        for i in range(vf.shape[0]):
            if vf[i] == 0:
                o[i] = z0
                continue
            y = D + vf[i] * vf[i]
            side = -1.0 if vf[i] > 0 else 1.0
            step = 1.0
            for it in range(200):
                if _ev(z0 + side * step, br, cf) >= y:
                    break
                step *= 2.0
            a = z0
            b = z0 + side * step
            for it in range(N_BISECT):
                mid = 0.5 * (a + b)
                if _ev(mid, br, cf) < y:
                    a = mid
                else:
                    b = mid
            o[i] = 0.5 * (a + b)
    return out.reshape(shape)
