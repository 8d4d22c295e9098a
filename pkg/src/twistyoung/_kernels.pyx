# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twisted-form quadrature sum.

Mode codes: 0 -> 1, 1 -> exp(i theta), 2 -> exp(i theta) - 1, 3 -> theta,
4 -> theta**2, with ``theta[a, b] = X[a] . Z[b]``.
"""
import numpy as np

from libc.math cimport cos, sin

ctypedef double complex cplx


cdef cplx _pairwise(cplx* buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, half
    cdef cplx s
    if n <= 16:
        s = 0
        for i in range(n):
            s = s + buf[i]
        return s
    half = n // 2
    return _pairwise(buf, half) + _pairwise(buf + half, n - half)


def twisted_sum(const cplx[::1] u, const cplx[::1] v, const cplx[:, ::1] F3,
                const double[:, ::1] X, const double[:, ::1] Z, int mode):
    cdef Py_ssize_t n1 = F3.shape[0], n2 = F3.shape[1], k = X.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double th, sh, kr, ki, pr, pi_
    cdef cplx total, f
    if u.shape[0] != n1 or v.shape[0] != n2 or Z.shape[0] != n2 or Z.shape[1] != k:
        raise ValueError("inconsistent kernel shapes")
    if mode < 0 or mode > 4:
        raise ValueError(f"unknown kernel mode {mode}")
    row_np = np.empty(n2, dtype=np.complex128)
    outer_np = np.empty(n1, dtype=np.complex128)
    cdef cplx[::1] row = row_np
    cdef cplx[::1] outer = outer_np
    with nogil:
        for a in range(n1):
            for b in range(n2):
                th = 0.0
                for i in range(k):
                    th = th + X[a, i] * Z[b, i]
                if mode == 0:
                    kr = 1.0
                    ki = 0.0
                elif mode == 1:
                    kr = cos(th)
                    ki = sin(th)
                elif mode == 2:
                    sh = sin(0.5 * th)
                    kr = -2.0 * sh * sh
                    ki = sin(th)
                elif mode == 3:
                    kr = th
                    ki = 0.0
                else:
                    kr = th * th
                    ki = 0.0
                # explicit real arithmetic avoids the C99 complex-multiply slow path
                f = F3[a, b]
                pr = f.real * v[b].real - f.imag * v[b].imag
                pi_ = f.real * v[b].imag + f.imag * v[b].real
                row[b].real = pr * kr - pi_ * ki
                row[b].imag = pr * ki + pi_ * kr
            f = _pairwise(&row[0], n2)
            outer[a].real = u[a].real * f.real - u[a].imag * f.imag
            outer[a].imag = u[a].real * f.imag + u[a].imag * f.real
        total = _pairwise(&outer[0], n1)
    return total
