"""Dedekind Delta, its global logarithm, Dedekind sums and the Rademacher function."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _accel
from .hyp import IDENTITY, S, T, ModularMatrix, as_upper, reduce_points

Y_MIN = 0.05
TAIL_TOL = 1e-14
MAX_TERMS = 200_000
EULER_MAX_RADIUS = 24


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class QTruncation:
    """Number of q-product factors and the bound on the discarded log-tail.

    The tail of 24 * sum_{n > M} Log(1 - q^n) is bounded by
    24 |q|^{M+1} / ((1 - |q|)(1 - |q|^{M+1})), so M grows like log(tol)/log|q|.
    """

    M: int
    tail_bound: float

    @staticmethod
    def bound(aq: float, M: int) -> float:
        if aq == 0.0:
            return 0.0
        r = aq ** (M + 1)
        return 24.0 * r / ((1.0 - aq) * (1.0 - r))

    @classmethod
    def for_point(cls, z, tol: float = TAIL_TOL, y_min: float = Y_MIN) -> "QTruncation":
        y = float(np.min(np.imag(z)))
        if y < y_min:
            raise TruncationError(f"Im z = {y:.3g} is below y_min = {y_min}")
        aq = math.exp(-2 * math.pi * y)
        M = 1
        if aq > 0:
            M = max(1, math.ceil(math.log(tol * (1 - aq) / 24.0) / math.log(aq)))
        return cls(M, cls.bound(aq, M))


def log_delta(z, trunc: QTruncation | None = None, y_min: float = Y_MIN):
    """Global continuous branch 2 pi i z + 24 sum Log(1 - q^n).

    ``trunc`` only validates; the factor count is chosen per point so the
    tail stays below 1e-14.
    """
    z = as_upper(z)
    if trunc is None:
        trunc = QTruncation.for_point(z, y_min=y_min)
    elif trunc.tail_bound > TAIL_TOL:
        raise TruncationError("tail bound of supplied truncation exceeds 1e-14")
    flat = np.ascontiguousarray(z.ravel())
    vals, _ = _accel.log_delta_series(flat, TAIL_TOL, MAX_TERMS)
    vals = vals.reshape(z.shape)
    return complex(vals) if vals.ndim == 0 else vals


def delta(z, trunc: QTruncation | None = None, y_min: float = Y_MIN):
    """Delta(z) = q prod (1 - q^n)^24 for Im z >= y_min."""
    z = as_upper(z)
    if trunc is None:
        trunc = QTruncation.for_point(z, y_min=y_min)
    flat = np.ascontiguousarray(z.ravel())
    q = np.exp(2j * np.pi * flat)
    lv, _ = _accel.log_delta_series(flat, TAIL_TOL, MAX_TERMS)
    # factor q exactly to keep relative accuracy deep in the cusp
    vals = (q * np.exp(lv - 2j * np.pi * flat)).reshape(z.shape)
    return complex(vals) if vals.ndim == 0 else vals


def delta_anywhere(z):
    """Delta at arbitrary points of H via reduction: Delta(z) = j^-12 Delta(gamma z)."""
    z = as_upper(z)
    z0, mats, ok = reduce_points(z)
    if not np.all(ok):
        raise TruncationError("reduction to F failed")
    c = mats[..., 2]
    d = mats[..., 3]
    j = c * z + d
    return delta(z0) / j**12


def log_delta_anywhere(z):
    """Global log Delta at arbitrary points, using the calibrated transport law.

    For gamma z = z0 with c > 0:
        log Delta(z) = log Delta(z0) - 12 Log((cz + d)/i) - 2 pi i Phi(gamma);
    for c = 0 (gamma = T^b) the shift is -2 pi i b.
    """
    z = as_upper(z)
    z0, mats, ok = reduce_points(z)
    if not np.all(ok):
        raise TruncationError("reduction to F failed")
    flat = mats.reshape(-1, 4)
    phi = rademacher_batch(flat).reshape(z.shape)
    c = mats[..., 2]
    d = mats[..., 3]
    j = c * z + d
    corr = np.where(c > 0, 12 * np.log(np.where(c > 0, j, 1j) / 1j), 0.0)
    return log_delta(z0) - corr - 2j * np.pi * phi


def sup_delta_y6(n: int = 200) -> float:
    """sup over H of |Delta(z)| (Im z)^6, attained on F; grid search plus refinement."""
    from scipy.optimize import minimize

    xs = np.linspace(-0.5, 0.5, n)
    ys = np.linspace(np.sqrt(3) / 2, 3.0, n)
    X, Y = np.meshgrid(xs, ys)
    Z = X + 1j * Y
    Z = Z[np.abs(Z) >= 1]
    vals = np.abs(delta(Z)) * Z.imag**6
    z0 = Z[np.argmax(vals)]

    def neg(p):
        zz = complex(p[0], max(p[1], 0.2))
        return -abs(delta_anywhere(np.array([zz]))[0]) * zz.imag**6

    res = minimize(neg, [z0.real, z0.imag], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-16})
    return float(-res.fun)


# ---------------------------------------------------------------- Dedekind sums


def _sawtooth(x: Fraction) -> Fraction:
    if x.denominator == 1:
        return Fraction(0)
    return x - math.floor(x) - Fraction(1, 2)


def dedekind_sum_direct(d: int, c: int) -> Fraction:
    """Defining sawtooth sum; O(c)."""
    if c <= 0 or math.gcd(d, c) != 1:
        raise ValueError("need c > 0 and gcd(d, c) = 1")
    return sum((_sawtooth(Fraction(k, c)) * _sawtooth(Fraction(k * d, c)) for k in range(1, c)), Fraction(0))


def dedekind_sum(d: int, c: int) -> Fraction:
    """s(d, c) exactly, via the reciprocity recursion on 12 c s(d, c)."""
    if c <= 0 or math.gcd(d, c) != 1:
        raise ValueError("need c > 0 and gcd(d, c) = 1")
    return Fraction(_accel_free_12c(d, c), 12 * c)


def _accel_free_12c(d: int, c: int) -> int:
    if c == 1:
        return 0
    dr = d % c
    return (c * c + dr * dr + 1 - 3 * c * dr - c * _accel_free_12c(c % dr, dr)) // dr


def rademacher_phi(gamma: ModularMatrix) -> int:
    """Phi(gamma) = (a + d)/c - 12 s(d, c) for c > 0; Phi(T^b) = b."""
    a, b, c, d = gamma.as_tuple()
    if c == 0:
        return b * d
    num = a + d - _accel_free_12c(d, c)
    q, r = divmod(num, c)
    if r:
        raise ArithmeticError(f"Rademacher value not integral for {gamma}")
    return q


_SMALL = 100_000


def rademacher_batch(mats: np.ndarray) -> np.ndarray:
    mats = np.ascontiguousarray(np.asarray(mats, dtype=np.int64).reshape(-1, 4))
    if mats.size and np.abs(mats).max() < _SMALL:
        return _accel.rademacher_batch(mats)
    return np.array([rademacher_phi(ModularMatrix(*r)) for r in mats.tolist()], dtype=np.int64)


# ---------------------------------------------------------------- theta defect


@dataclass(frozen=True)
class ThetaDefect:
    theta: float
    n: int
    basepoint: complex
    retries: int


def theta_defect(gamma: ModularMatrix, basepoint: complex = 10j, y_min: float = 1e-3, max_retries: int = 5) -> ThetaDefect:
    """theta_gamma = Im log Delta(gamma b) - Arg Delta(gamma b), with n = round(theta / 2 pi).

    The q-series is summed directly at gamma b, so Im(gamma b) must exceed ``y_min``.
    """
    b = complex(basepoint)
    rng = np.random.default_rng(abs(hash(gamma.as_tuple())) % (2**32))
    for attempt in range(max_retries + 1):
        p = complex(gamma.act(b))
        if p.imag < y_min:
            raise TruncationError(f"Im(gamma b) = {p.imag:.3g} below {y_min}; choose a lower basepoint")
        lv = log_delta(np.array([p]), y_min=y_min)[0]
        arg0 = float(np.angle(np.exp(lv)))
        theta = lv.imag - arg0
        n = round(theta / (2 * math.pi))
        if abs(theta / (2 * math.pi) - n) <= 0.25:
            return ThetaDefect(theta, n, b, attempt)
        b = b + complex(rng.uniform(-0.1, 0.1), rng.uniform(0, 0.1))
    raise RuntimeError(f"theta defect for {gamma} did not settle")


def _winding(gamma: ModularMatrix, b: complex) -> int:
    """Nearest integer to 12 Arg j(gamma, b) / 2 pi, plain principal argument."""
    return round(12 * float(np.angle(gamma.j(b))) / (2 * math.pi))


def theta_features(gamma: ModularMatrix, b: complex) -> tuple[int, int, int]:
    return (rademacher_phi(gamma), _winding(gamma, b), int(np.sign(gamma.c)))


# Frozen from ``calibrate_theta_relation``: n(gamma) = A Phi + B W + C sign(c).
THETA_RELATION = (1, 1, -3)


def predicted_theta_n(gamma: ModularMatrix, b: complex = 10j) -> int:
    A, B, C = THETA_RELATION
    phi, w, s = theta_features(gamma, b)
    return A * phi + B * w + C * s


def calibrate_theta_relation(mats, basepoint: complex = 10j):
    """Least-squares fit of n(gamma) on (Phi, winding, sign c); returns rounded coefficients and residual."""
    X = np.array([theta_features(g, basepoint) for g in mats], dtype=float)
    y = np.array([theta_defect(g, basepoint).n for g in mats], dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rounded = tuple(int(round(c)) for c in coef)
    resid = float(np.max(np.abs(X @ np.array(rounded) - y)))
    return rounded, coef, resid


def arg_delta_transport_check(gamma: ModularMatrix, z: complex) -> dict:
    """Compare arg Delta(gamma z) - arg Delta(z) with Arg j and 12 Arg j, both modulo 2 pi."""
    lz = log_delta_anywhere(np.array([z]))[0]
    lg = log_delta_anywhere(np.array([complex(gamma.act(z))]))[0]
    diff = lg.imag - lz.imag
    aj = float(np.angle(gamma.j(z)))

    def mod2pi(x):
        return float((x + math.pi) % (2 * math.pi) - math.pi)

    return {"plain_arg_j": abs(mod2pi(diff - aj)), "weight12_arg_j": abs(mod2pi(diff - 12 * aj))}


# ---------------------------------------------------------------- Euler scans


def word_ball(L: int) -> dict[tuple[int, int, int, int], int]:
    """Elements of PSL2(Z) with word length <= L over {S, T, T^-1}, with their lengths."""
    if L > EULER_MAX_RADIUS:
        raise ValueError(f"radius capped at {EULER_MAX_RADIUS}")
    gens = [S, T, T.inverse()]
    seen = {IDENTITY.as_tuple(): 0}
    frontier = [IDENTITY]
    for r in range(1, L + 1):
        nxt = []
        for g in frontier:
            for s in gens:
                h = g @ s
                key = h.as_tuple()
                if key not in seen:
                    seen[key] = r
                    nxt.append(h)
        frontier = nxt
    return seen


@dataclass
class EulerReport:
    scan_radius: int
    max_defect: int
    max_phi: int
    defect_histogram: dict[int, int] = field(default_factory=dict)
    n_pairs: int = 0
    ball_size: int = 0

    def to_json(self) -> dict:
        return {
            "scan_radius": self.scan_radius,
            "max_defect": self.max_defect,
            "max_phi": self.max_phi,
            "defect_histogram": {str(k): v for k, v in sorted(self.defect_histogram.items())},
            "n_pairs": self.n_pairs,
            "ball_size": self.ball_size,
        }


def _compose_batch(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    a = A[:, 0] * B[:, 0] + A[:, 1] * B[:, 2]
    b = A[:, 0] * B[:, 1] + A[:, 1] * B[:, 3]
    c = A[:, 2] * B[:, 0] + A[:, 3] * B[:, 2]
    d = A[:, 2] * B[:, 1] + A[:, 3] * B[:, 3]
    M = np.stack([a, b, c, d], axis=1)
    flip = (M[:, 2] < 0) | ((M[:, 2] == 0) & (M[:, 3] < 0))
    M[flip] *= -1
    return M


def euler_report(L: int, n_pairs: int = 10_000, seed: int = 0) -> EulerReport:
    """Rademacher defect over sampled pairs in the word ball and max |Phi| over the ball."""
    ball = np.array(list(word_ball(L).keys()), dtype=np.int64)
    phi_ball = rademacher_batch(ball)
    if L <= 2:
        i1, i2 = np.meshgrid(np.arange(len(ball)), np.arange(len(ball)), indexing="ij")
        i1, i2 = i1.ravel(), i2.ravel()
    else:
        rng = np.random.default_rng(seed)
        i1 = rng.integers(0, len(ball), n_pairs)
        i2 = rng.integers(0, len(ball), n_pairs)
    prod = _compose_batch(ball[i1], ball[i2])
    defect = rademacher_batch(prod) - phi_ball[i1] - phi_ball[i2]
    hist = Counter(int(v) for v in defect)
    return EulerReport(
        scan_radius=L,
        max_defect=int(np.max(np.abs(defect))),
        max_phi=int(np.max(np.abs(phi_ball))),
        defect_histogram=dict(hist),
        n_pairs=int(len(defect)),
        ball_size=int(len(ball)),
    )
