# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled 1-D shear resampling kernel (hot loop of the three-pass rotation).

Normalized windowed-sinc resampling, identical math to the pure-Python
fallback in _shear_py.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, floor, sin

cnp.import_array()

PAD_ZERO = 0
PAD_REPLICATE = 1

A = 3

cdef int _A = 3
cdef double _PI = 3.141592653589793


cdef inline double _sinc(double x) nogil:
    if x < 1e-6 and x > -1e-6:
        return 1.0 - _PI * _PI * x * x / 6.0
    return sin(_PI * x) / (_PI * x)


cdef inline double _dsinc(double x) nogil:
    if x < 1e-6 and x > -1e-6:
        return -_PI * _PI * x / 3.0
    return (cos(_PI * x) - _sinc(x)) / x


def shear_lines(arr, shifts, int padding):
    """Windowed-sinc resampling of each row at positions ``j - shifts[l]``.

    Returns ``(out, dpos)`` like the pure-Python kernel.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(arr, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(shifts, dtype=np.float64)
    cdef Py_ssize_t L = a.shape[0]
    cdef Py_ssize_t N = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((L, N), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dpos = np.empty((L, N), dtype=np.float64)
    cdef Py_ssize_t l, j
    cdef int m
    cdef long k, idx
    cdef double p, f, sh, x, w, dw, v, c, sn, snc
    cdef double num, dnum, den, dden

    for l in range(L):
        sh = s[l]
        for j in range(N):
            p = j - sh
            k = <long>floor(p)
            f = p - k
            num = 0.0
            dnum = 0.0
            den = 0.0
            dden = 0.0
            for m in range(-_A + 1, _A + 1):
                x = f - m
                c = cos(_PI * x / (2.0 * _A))
                sn = sin(_PI * x / (2.0 * _A))
                snc = _sinc(x)
                w = snc * c * c * c * c
                dw = (
                    _dsinc(x) * c * c * c * c
                    - snc * 4.0 * c * c * c * sn * (_PI / (2.0 * _A))
                )
                idx = k + m
                if padding == 1:
                    if idx < 0:
                        idx = 0
                    elif idx > N - 1:
                        idx = N - 1
                    v = a[l, idx]
                else:
                    v = a[l, idx] if 0 <= idx < N else 0.0
                num += w * v
                dnum += dw * v
                den += w
                dden += dw
            out[l, j] = num / den
            dpos[l, j] = (dnum * den - num * dden) / (den * den)
    return out, dpos
