"""Pure numpy/Python versions of the compiled kernels in ``_core.pyx``."""

from __future__ import annotations

import math

import numpy as np


def neumaier_sum(x: np.ndarray) -> complex:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    return complex(math.fsum(x.real), math.fsum(x.imag))


def neumaier_rows(x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    out = np.empty(x.shape[0], dtype=np.complex128)
    for i, row in enumerate(x):
        out[i] = complex(math.fsum(row.real), math.fsum(row.imag))
    return out


def log_delta_series(z: np.ndarray, tol: float, max_terms: int):
    z = np.asarray(z, dtype=np.complex128)
    q = np.exp(2j * np.pi * z)
    aq = np.abs(q)
    with np.errstate(divide="ignore"):
        M = np.ceil(np.log(tol * (1.0 - aq) / 24.0) / np.log(aq))
    M = np.clip(np.nan_to_num(M, nan=1.0, posinf=1.0), 1, max_terms).astype(np.int64)
    acc = np.zeros_like(z)
    qn = np.ones_like(z)
    for k in range(int(M.max(initial=0))):
        qn = qn * q
        live = k < M
        acc = acc + np.where(live, np.log(1.0 - np.where(live, qn, 0.0)), 0.0)
    return 2j * np.pi * z + 24.0 * acc, M


def reduce_points(z: np.ndarray, maxiter: int):
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    mats = np.empty((z.size, 4), dtype=np.int64)
    ok = np.ones(z.size, dtype=np.uint8)
    for i, w in enumerate(z):
        a, b, c, d = 1, 0, 0, 1
        it = 0
        while True:
            m = math.floor(w.real + 0.5)
            if m:
                w = w - m
                a, b = a - m * c, b - m * d
            if w.real * w.real + w.imag * w.imag < 1.0 - 1e-15:
                w = -1.0 / w
                a, b, c, d = -c, -d, a, b
            else:
                break
            it += 1
            if it > maxiter:
                ok[i] = 0
                break
        if c < 0 or (c == 0 and d < 0):
            a, b, c, d = -a, -b, -c, -d
        out[i] = w
        mats[i] = (a, b, c, d)
    return out, mats, ok


def dedekind_12c(d: int, c: int) -> int:
    if c == 1:
        return 0
    dr = d % c
    return (c * c + dr * dr + 1 - 3 * c * dr - c * dedekind_12c(c % dr, dr)) // dr


def rademacher_batch(mats: np.ndarray) -> np.ndarray:
    out = np.empty(len(mats), dtype=np.int64)
    for i, (a, b, c, d) in enumerate(np.asarray(mats).tolist()):
        out[i] = b * d if c == 0 else (a + d - dedekind_12c(d, c)) // c
    return out
