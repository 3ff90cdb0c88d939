# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``berezinlab._fallback`` mirrors every function here."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, exp, log, ceil, floor, M_PI

cdef extern from "complex.h" nogil:
    double complex clog(double complex)
    double complex cexp(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)

cnp.import_array()


cdef inline void _neu(double *s, double *c, double x) nogil:
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def neumaier_sum(double complex[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double sr = 0, cr = 0, si = 0, ci = 0
    with nogil:
        for i in range(n):
            _neu(&sr, &cr, creal(x[i]))
            _neu(&si, &ci, cimag(x[i]))
    return complex(sr + cr, si + ci)


def neumaier_rows(double complex[:, ::1] x):
    """Compensated sum along the last axis of a C-contiguous 2-D array."""
    cdef Py_ssize_t i, j, m = x.shape[0], n = x.shape[1]
    out = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double sr, cr, si, ci
    with nogil:
        for i in range(m):
            sr = 0; cr = 0; si = 0; ci = 0
            for j in range(n):
                _neu(&sr, &cr, creal(x[i, j]))
                _neu(&si, &ci, cimag(x[i, j]))
            o[i] = (sr + cr) + 1j * (si + ci)
    return out


def log_delta_series(double complex[::1] z, double tol, long max_terms):
    """2*pi*i*z + 24*sum Log(1 - q^n) with a per-point truncation.

    Returns (values, M) where M is the number of factors used.
    """
    cdef Py_ssize_t i, n = z.shape[0]
    cdef long k, M
    cdef double aq
    cdef double complex q, qn, acc
    out = np.empty(n, dtype=np.complex128)
    terms = np.empty(n, dtype=np.int64)
    cdef double complex[::1] o = out
    cdef long[::1] mt = terms
    with nogil:
        for i in range(n):
            q = cexp(2j * M_PI * z[i])
            aq = cabs(q)
            if aq <= 0.0:
                M = 0
            else:
                M = <long>ceil(log(tol * (1.0 - aq) / 24.0) / log(aq))
                if M < 1:
                    M = 1
                if M > max_terms:
                    M = max_terms
            acc = 0
            qn = 1
            for k in range(M):
                qn = qn * q
                acc = acc + clog(1.0 - qn)
            o[i] = 2j * M_PI * z[i] + 24.0 * acc
            mt[i] = M
    return out, terms


def reduce_points(double complex[::1] z, long maxiter):
    """Reduce points of H into F.

    Returns (z0, mats, ok) with mats[i] = (a, b, c, d) and gamma z = z0.
    """
    cdef Py_ssize_t i, n = z.shape[0]
    cdef long it, a, b, c, d, na, nb, m
    cdef double complex w
    cdef double r2
    out = np.empty(n, dtype=np.complex128)
    mats = np.empty((n, 4), dtype=np.int64)
    ok = np.ones(n, dtype=np.uint8)
    cdef double complex[::1] o = out
    cdef long[:, ::1] mm = mats
    cdef unsigned char[::1] okv = ok
    with nogil:
        for i in range(n):
            w = z[i]
            a = 1; b = 0; c = 0; d = 1
            it = 0
            while True:
                m = <long>floor(creal(w) + 0.5)
                if m != 0:
                    w = w - m
                    a = a - m * c
                    b = b - m * d
                r2 = creal(w) * creal(w) + cimag(w) * cimag(w)
                if r2 < 1.0 - 1e-15:
                    w = -1.0 / w
                    na = -c; nb = -d
                    c = a; d = b
                    a = na; b = nb
                else:
                    break
                it += 1
                if it > maxiter:
                    okv[i] = 0
                    break
            if c < 0 or (c == 0 and d < 0):
                a = -a; b = -b; c = -c; d = -d
            o[i] = w
            mm[i, 0] = a; mm[i, 1] = b; mm[i, 2] = c; mm[i, 3] = d
    return out, mats, ok


cdef long _dede12(long d, long c):
    # 12*c*s(d, c) for c > 0, gcd(d, c) = 1, by reciprocity
    cdef long dr
    if c == 1:
        return 0
    dr = d % c
    if dr < 0:
        dr += c
    return (c * c + dr * dr + 1 - 3 * c * dr - c * _dede12(c % dr, dr)) // dr


def dedekind_12c(long d, long c):
    return _dede12(d, c)


def rademacher_batch(long[:, ::1] mats):
    """Rademacher Phi for canonical (a, b, c, d) rows with entries below 1e5."""
    cdef Py_ssize_t i, n = mats.shape[0]
    out = np.empty(n, dtype=np.int64)
    cdef long[::1] o = out
    cdef long a, b, c, d
    for i in range(n):
        a = mats[i, 0]; b = mats[i, 1]; c = mats[i, 2]; d = mats[i, 3]
        if c == 0:
            o[i] = b * d
        else:
            o[i] = (a + d - _dede12(d, c)) // c
    return out
