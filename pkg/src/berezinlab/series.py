"""Exact power-series arithmetic for symbols of finite matrices.

A symbol x at weight t is stored as the coefficient matrix h of
x(z, conj w) K_t(z, w) = sum h[m, n] z^m conj(w)^n (disk model). In this
representation

    x *_t y  <->  h_x D_t h_y,      D_t = diag(pi n! Gamma(t-1) / Gamma(n+t)),

and moving to weight s multiplies by (chi_s/chi_t)(1 - z conj w)^{t-s},
a convolution along diagonals. Differentiating in s at s = t gives the
deformation cocycle exactly, with no quadrature anywhere.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import digamma, gammaln

from . import berg


def _dmat(t: float, D: int) -> np.ndarray:
    n = np.arange(D)
    return np.exp(math.log(math.pi) + gammaln(n + 1) + gammaln(t - 1) - gammaln(n + t))


def _diag_conv(h: np.ndarray, c: np.ndarray) -> np.ndarray:
    D = h.shape[0]
    out = np.zeros_like(h)
    for j, cj in enumerate(c[:D]):
        if cj:
            out[j:, j:] += cj * h[: D - j, : D - j]
    return out


def _conv_deriv(t: float, D: int) -> np.ndarray:
    """d/ds at s = t of (chi_s/chi_t)(1 - x)^{t-s} = sum c_j x^j."""
    c = np.empty(D)
    c[0] = 1.0 / (t - 1)
    c[1:] = 1.0 / np.arange(1, D)
    return c


class SeriesAlgebra:
    """Symbols of matrices (and their star/cocycle combinations) at weight t, degree < D."""

    def __init__(self, t: float, D: int = 80):
        self.t = float(t)
        self.D = int(D)
        self.d = _dmat(self.t, self.D)
        self.d_prime = self.d * (digamma(self.t - 1) - digamma(np.arange(self.D) + self.t))
        self.cprime = _conv_deriv(self.t, self.D)

    def from_matrix(self, A: berg.OperatorMatrix) -> np.ndarray:
        N = A.trunc.N
        if A.trunc.t != self.t:
            raise ValueError("weight mismatch")
        h = np.zeros((self.D, self.D), dtype=np.complex128)
        nrm = np.sqrt(np.asarray(A.trunc.norms))
        h[:N, :N] = A.entries / np.outer(nrm, nrm)
        return h

    def one(self) -> np.ndarray:
        return np.diag(1.0 / self.d).astype(np.complex128)

    def star(self, hx, hy):
        return (hx * self.d) @ hy

    def cocycle(self, hx, hy):
        """c_t(x, y) = d/ds (x *_s y) at s = t, in the weight-t representation."""
        cp = self.cprime
        return (
            self.star(_diag_conv(hx, cp), hy)
            + self.star(hx, _diag_conv(hy, cp))
            + (hx * self.d_prime) @ hy
            - _diag_conv(self.star(hx, hy), cp)
        )

    def evaluate(self, h, z, w):
        """x(z, conj w) at point arrays z, w (same shape)."""
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        n = np.arange(self.D)
        Zp = z[..., None] ** n
        Wp = np.conj(w)[..., None] ** n
        num = np.einsum("...m,mn,...n->...", Zp, h, Wp)
        return num / berg.full_kernel(self.t, z, w)


def hochschild_terms(alg: SeriesAlgebra, hk, hl, hm):
    """The four terms k c(l,m), c(kl,m), c(k,lm), c(k,l) m as series."""
    return (
        alg.star(hk, alg.cocycle(hl, hm)),
        alg.cocycle(alg.star(hk, hl), hm),
        alg.cocycle(hk, alg.star(hl, hm)),
        alg.star(alg.cocycle(hk, hl), hm),
    )
