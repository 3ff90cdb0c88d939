"""Truncated weighted Bergman spaces H_t on the unit disk.

Orthonormal basis e_n(z) = z^n / sqrt(norm_n) with
norm_n = ||z^n||^2 = pi n! Gamma(t-1) / Gamma(n+t) in L^2((1-|z|^2)^{t-2} dA).
Full reproducing kernel K(z, w) = chi_t (1 - z conj(w))^{-t}, chi_t = (t-1)/pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as sp_integrate

from . import quad


class NormMismatch(ArithmeticError):
    pass


def chi(t: float) -> float:
    return (t - 1) / math.pi


@lru_cache(maxsize=4096)
def basis_norm(t: float, n: int) -> float:
    """||z^n||^2 by adaptive 1-D quadrature, checked against the Beta recursion."""
    if t <= 1:
        raise ValueError("t must exceed 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    # pi * int_0^1 u^n (1-u)^{t-2} du with algebraic endpoint weights
    val, _ = sp_integrate.quad(lambda u: 1.0, 0.0, 1.0, weight="alg", wvar=(n, t - 2), epsabs=0, epsrel=1e-13)
    quad_val = math.pi * val
    rec = beta_norm(t, n)
    if abs(quad_val - rec) > 1e-10 * rec:
        raise NormMismatch(f"basis_norm(t={t}, n={n}): quadrature {quad_val} vs recursion {rec}")
    return rec


def beta_norm(t: float, n: int) -> float:
    """pi B(n+1, t-1) via norm_{k+1} = norm_k (k+1)/(k+t), norm_0 = pi/(t-1)."""
    v = math.pi / (t - 1)
    for k in range(n):
        v *= (k + 1) / (k + t)
    return v


@dataclass(frozen=True)
class BergmanTruncation:
    t: float = 4.0
    N: int = 16
    norms: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.t <= 1 or self.N < 1:
            raise ValueError("need t > 1 and N >= 1")
        if not self.norms:
            object.__setattr__(self, "norms", tuple(basis_norm(float(self.t), n) for n in range(self.N)))

    @property
    def chi(self) -> float:
        return chi(self.t)

    def basis(self, z) -> np.ndarray:
        """e_n(z) for n < N, stacked on a new last axis."""
        z = np.asarray(z, dtype=np.complex128)
        powers = np.empty(z.shape + (self.N,), dtype=np.complex128)
        powers[..., 0] = 1.0
        for n in range(1, self.N):
            np.multiply(powers[..., n - 1], z, out=powers[..., n])
        return powers / np.sqrt(np.asarray(self.norms))


def reproducing_kernel(t: float, z, w, trunc: BergmanTruncation | None = None):
    """Truncated kernel sum_{n<N} e_n(z) conj(e_n(w)); closed form when trunc is None."""
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    if trunc is None:
        return chi(t) * (1 - z * np.conj(w)) ** (-t)
    if trunc.t != t:
        raise ValueError("truncation weight differs from t")
    return np.sum(trunc.basis(z) * np.conj(trunc.basis(w)), axis=-1)


def full_kernel(t: float, z, w):
    """chi_t (1 - z conj w)^{-t}, principal branch (Re(1 - z conj w) > 0)."""
    base = 1 - np.asarray(z) * np.conj(np.asarray(w))
    if float(t).is_integer() and 0 < t <= 64:
        return chi(t) / base ** int(t)
    return chi(t) * np.exp(-t * np.log(base))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    trunc: BergmanTruncation

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.complex128)
        if e.shape != (self.trunc.N, self.trunc.N):
            raise ValueError(f"entries must be {self.trunc.N}x{self.trunc.N}")
        if not np.all(np.isfinite(e)):
            raise ValueError("non-finite entries")
        object.__setattr__(self, "entries", e)

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.trunc)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries @ other.entries, self.trunc)

    def to_json(self) -> str:
        rows = [[[v.real, v.imag] for v in row] for row in self.entries]
        return json.dumps({"t": self.trunc.t, "N": self.trunc.N, "entries": rows})

    @classmethod
    def from_json(cls, text: str) -> "OperatorMatrix":
        d = json.loads(text)
        e = np.array([[complex(a, b) for a, b in row] for row in d["entries"]])
        return cls(e, BergmanTruncation(d["t"], d["N"]))

    @classmethod
    def identity(cls, trunc: BergmanTruncation) -> "OperatorMatrix":
        return cls(np.eye(trunc.N, dtype=np.complex128), trunc)


def covariant_symbol(A: OperatorMatrix, z, w, denominator: str = "full"):
    """k_A(z, conj w) = <A K_w, K_z> / K(z, w).

    ``denominator="full"`` divides by the closed-form kernel, which makes k_A
    the symbol of A (+) 0 on the whole space; star products of such symbols
    are exactly the symbols of matrix products. ``"truncated"`` divides by the
    truncated kernel, so the identity matrix has symbol exactly 1.
    """
    tr = A.trunc
    Ez = tr.basis(z)
    Ew = tr.basis(w)
    num = np.sum((Ez @ A.entries) * np.conj(Ew), axis=-1)
    if denominator == "full":
        den = full_kernel(tr.t, z, w)
    elif denominator == "truncated":
        den = np.sum(Ez * np.conj(Ew), axis=-1)
    else:
        raise ValueError(denominator)
    return num / den


def _coefficients(k, trunc: BergmanTruncation, radius: float, M: int) -> np.ndarray:
    ang = 2 * np.pi * np.arange(M) / M
    zs = radius * np.exp(1j * ang)
    Z, W = np.meshgrid(zs, zs, indexing="ij")
    Fv = np.asarray(k(Z, W), dtype=np.complex128) * full_kernel(trunc.t, Z, W)
    n = np.arange(trunc.N)
    E = np.exp(-1j * np.outer(n, ang)) / M
    c = E @ Fv @ E.conj().T
    nrm = np.sqrt(np.asarray(trunc.norms))
    scale = np.outer(nrm, nrm) / radius ** (n[:, None] + n[None, :])
    return c * scale


def operator_from_kernel(k, trunc: BergmanTruncation, radius: float = 0.75, M: int | None = None):
    """Matrix whose full-denominator symbol is ``k`` (a callable k(z, w) on the disk).

    Taylor coefficients of k(z, conj w) K(z, w) are read off by trapezoid
    (Cauchy) quadrature on a circle; the estimate is the change under a
    second radius. Returns (OperatorMatrix, err).
    """
    if hasattr(k, "on_disk"):
        fn = k.on_disk
    else:
        fn = k
    M = M or max(64, 4 * trunc.N)
    A1 = _coefficients(fn, trunc, radius, M)
    A2 = _coefficients(fn, trunc, radius * 0.93, M)
    return OperatorMatrix(A1, trunc), float(np.max(np.abs(A1 - A2)))


def toeplitz_matrix(f, trunc: BergmanTruncation, level: int = 6) -> OperatorMatrix:
    """(T_f)_{mn} = <f e_n, e_m> by the Gauss-Jacobi disk rule for weight t."""
    rule = quad.rule_for_weight(trunc.t, level)
    nodes, wts = rule.nodes, rule.weights
    E = trunc.basis(nodes)
    fv = np.asarray(f(nodes), dtype=np.complex128) * np.ones(nodes.shape)
    Tm = (E.conj() * (wts * fv)[:, None]).T @ E
    return OperatorMatrix(Tm, trunc)


def gram_matrix(trunc: BergmanTruncation, level: int = 6) -> np.ndarray:
    return toeplitz_matrix(lambda z: np.ones_like(z), trunc, level).entries


def positivity_gram(points, eps: float) -> np.ndarray:
    """[(1 - w_i conj w_j)^{-eps}] on the principal branch."""
    w = np.asarray(points, dtype=np.complex128)
    return np.exp(-eps * np.log(1 - w[:, None] * np.conj(w[None, :])))


def random_operator(trunc: BergmanTruncation, rng: np.random.Generator, scale: float = 1.0) -> OperatorMatrix:
    N = trunc.N
    return OperatorMatrix(scale * (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / math.sqrt(N), trunc)
