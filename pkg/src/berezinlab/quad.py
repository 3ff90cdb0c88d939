"""Product Gauss rules on the disk, the half-plane, the modular fundamental domain F and F x H.

Refinement scheme: the rule at level n uses ``base * n`` Gauss points per
direction, so its polynomial degree of exactness strictly dominates level
n - 1 (Gauss rules are not nested; dominance is by degree). Error estimates
compare against a companion rule with 3/4 of the points per direction.

Measures. ``integrate(f, rule, t)`` evaluates the integral of f against
(1 - |z|^2)^{t-2} dA on the disk and y^{t-2} dx dy on H and F; ``t=None``
means plain Lebesgue measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import roots_jacobi, roots_legendre

from . import _accel

MAX_LEVEL = 16


class IntegrandError(FloatingPointError):
    """Non-finite integrand value; carries the offending node."""

    def __init__(self, node, value):
        super().__init__(f"non-finite integrand {value!r} at node {node!r}")
        self.node = node
        self.value = value


@dataclass(frozen=True)
class Disk:
    """Unit disk. With ``weight_exponent`` set, radial Gauss-Jacobi nodes absorb (1-|z|^2)^alpha
    and cover the whole open disk; otherwise Gauss-Legendre up to ``radius_cut``."""

    radius_cut: float = 1.0 - 1e-9
    weight_exponent: float | None = None


@dataclass(frozen=True)
class HalfPlane:
    y_min: float = 1e-4
    y_max: float = 1e4
    x_half_width: float = 2.5e3


@dataclass(frozen=True)
class FundamentalDomain:
    y_max: float = math.inf


@dataclass(frozen=True)
class Product:
    left: "Domain"
    right: "Domain"


Domain = Union[Disk, HalfPlane, FundamentalDomain, Product]


@dataclass(frozen=True)
class FormValue:
    value: complex
    err: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise IntegrandError(None, self.value)
        if not self.err >= 0:
            raise ValueError("err must be nonnegative")

    def __add__(self, other):
        if isinstance(other, FormValue):
            return FormValue(self.value + other.value, self.err + other.err)
        return FormValue(self.value + other, self.err)

    def __sub__(self, other):
        if isinstance(other, FormValue):
            return FormValue(self.value - other.value, self.err + other.err)
        return FormValue(self.value - other, self.err)

    def scale(self, c: complex) -> "FormValue":
        return FormValue(self.value * c, self.err * abs(c))

    def to_json(self) -> dict:
        v = complex(self.value)
        return {"re": v.real, "im": v.imag, "err": self.err}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    domain: Domain
    level: int
    nodes: np.ndarray  # complex (n,) or (n, 2) for Product
    weights: np.ndarray  # Lebesgue (times Jacobi factor for weighted disks)
    error_estimate: float
    coarse_nodes: np.ndarray | None = None
    coarse_weights: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.weights)

    def to_json(self) -> str:
        def enc(a):
            a = np.asarray(a)
            if np.iscomplexobj(a):
                return {"re": a.real.tolist(), "im": a.imag.tolist()}
            return a.tolist()

        return json.dumps(
            {
                "domain": {"type": type(self.domain).__name__, **_domain_dict(self.domain)},
                "level": self.level,
                "nodes": enc(self.nodes),
                "weights": enc(self.weights),
                "error_estimate": self.error_estimate,
            }
        )


def _domain_dict(d) -> dict:
    if isinstance(d, Product):
        return {
            "left": {"type": type(d.left).__name__, **_domain_dict(d.left)},
            "right": {"type": type(d.right).__name__, **_domain_dict(d.right)},
        }
    return {k: (None if v is None else (str(v) if v == math.inf else v)) for k, v in asdict(d).items()}


# ------------------------------------------------------------------ 1-D rules


@lru_cache(maxsize=256)
def _legendre(n: int):
    x, w = roots_legendre(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=256)
def _jacobi01(n: int, alpha: float):
    """Nodes/weights on [0,1] for weight (1 - rho)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1) / 2, w / 2 ** (alpha + 1)


def _counts(domain: Domain, level: int, frac: float = 1.0) -> tuple[int, int]:
    def k(base):
        return max(2, int(round(base * level * frac)))

    if isinstance(domain, Disk):
        return k(8), k(16)
    if isinstance(domain, HalfPlane):
        return k(16), k(16)
    if isinstance(domain, FundamentalDomain):
        return k(8), k(8)
    raise TypeError(f"unsupported domain {domain!r}")


def _disk_nodes(dom: Disk, nr: int, nt: int):
    theta = 2 * np.pi * (np.arange(nt) + 0.5) / nt
    if dom.weight_exponent is not None:
        rho, wr = _jacobi01(nr, float(dom.weight_exponent))
    else:
        rc2 = dom.radius_cut**2
        v, wv = _legendre(nr)
        p = 3
        # rho = rc2 (1 - (1 - v)^p) clusters nodes near the rim
        rho = rc2 * (1 - (1 - v) ** p)
        wr = wv * rc2 * p * (1 - v) ** (p - 1)
    r = np.sqrt(rho)
    nodes = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = (0.5 * wr[:, None] * np.full(nt, 2 * np.pi / nt)[None, :]).ravel()
    return nodes, weights


def _halfplane_nodes(dom: HalfPlane, nb: int, na: int):
    v, wv = _legendre(nb)
    lo, hi = math.log(dom.y_min), math.log(dom.y_max)
    b = lo + (hi - lo) * v
    wb = wv * (hi - lo)
    y = np.exp(b)
    u, wu = _legendre(na)
    A = np.arcsinh(dom.x_half_width / (1 + y))
    a = (2 * u[None, :] - 1) * A[:, None]
    wa = 2 * A[:, None] * wu[None, :]
    x = (1 + y)[:, None] * np.sinh(a)
    jac = (1 + y)[:, None] * np.cosh(a) * y[:, None]
    nodes = (x + 1j * y[:, None]).ravel()
    weights = (wb[:, None] * wa * jac).ravel()
    return nodes, weights


def _fd_nodes(dom: FundamentalDomain, nx: int, ns: int):
    u, wu = _legendre(nx)
    x = u - 0.5
    s_hi = 1 / np.sqrt(1 - x**2)
    s_lo = 0.0 if dom.y_max == math.inf else 1 / dom.y_max
    v, wv = _legendre(ns)
    s = s_lo + (s_hi[:, None] - s_lo) * v[None, :]
    ws = (s_hi[:, None] - s_lo) * wv[None, :]
    y = 1 / s
    nodes = (x[:, None] + 1j * y).ravel()
    # dx dy = y^2 dx ds
    weights = (wu[:, None] * ws * y**2).ravel()
    return nodes, weights


def _raw(domain: Domain, level: int, frac: float = 1.0):
    n1, n2 = _counts(domain, level, frac)
    if isinstance(domain, Disk):
        return _disk_nodes(domain, n1, n2)
    if isinstance(domain, HalfPlane):
        return _halfplane_nodes(domain, n1, n2)
    return _fd_nodes(domain, n1, n2)


# ------------------------------------------------------------------ tails


def halfplane_tail(dom: HalfPlane, t: float) -> float:
    """Bound on the mass of w_t(i, .) d nu_0* (d nu_0* = dx dy / 4y^2) outside the rectangle."""
    B = beta_fn(0.5, t - 0.5)
    low = 4 ** (t - 1) * B * dom.y_min ** (t - 1) / (t - 1)
    high = 4 ** (t - 1) * B * dom.y_max ** (-t) / t
    side = 2 * 4 ** (t - 1) * 2.0 ** (-t) * dom.x_half_width ** (1 - t) / (t - 1) ** 2
    return float(low + high + side)


def halfplane_for_weight(t: float, tol: float = 1e-12) -> HalfPlane:
    """Smallest rectangle (in a fixed search grid) whose w_t tail bound is below ``tol``."""
    B = beta_fn(0.5, t - 0.5)
    y_min = (tol / 3 * (t - 1) / (4 ** (t - 1) * B)) ** (1 / (t - 1))
    y_max = (tol / 3 * t / (4 ** (t - 1) * B)) ** (-1 / t)
    X = (tol / 3 * (t - 1) ** 2 / (2 * 4 ** (t - 1) * 2.0 ** (-t))) ** (1 / (1 - t))
    return HalfPlane(float(y_min), float(y_max), float(X))


def fd_tail(dom: FundamentalDomain, t: float = 4.0) -> float:
    """Hyperbolic area of F above y_max (integrands bounded by 1)."""
    return 0.0 if dom.y_max == math.inf else 1.0 / dom.y_max


def disk_tail(dom: Disk, t: float | None = 4.0) -> float:
    """Mass of (1 - |z|^2)^{t-2} dA (dA when t is None) outside radius_cut."""
    if dom.weight_exponent is not None:
        return 0.0
    if t is None:
        return float(np.pi * (1 - dom.radius_cut**2))
    return float(np.pi * (1 - dom.radius_cut**2) ** (t - 1) / (t - 1))


def _tail(dom: Domain, t: float | None = 4.0) -> float:
    if isinstance(dom, HalfPlane):
        return halfplane_tail(dom, t if t and t > 1 else 4.0)
    if isinstance(dom, FundamentalDomain):
        return fd_tail(dom, t)
    if isinstance(dom, Disk):
        return disk_tail(dom, t if t is None or t > 1 else 4.0)
    return _tail(dom.left, t) + _tail(dom.right, t)


def _reference(dom: Domain) -> Callable:
    if isinstance(dom, Disk):
        return lambda z: np.exp(z.real) * np.cos(z.imag) * (1 - np.abs(z) ** 2)
    if isinstance(dom, HalfPlane):
        return lambda z: (4 * z.imag / np.abs(z + 1j) ** 2) ** 4 / z.imag**2
    return lambda z: np.exp(-z.imag) / z.imag**2


# ------------------------------------------------------------------ building


@lru_cache(maxsize=128)
def build_rule(domain: Domain, level: int) -> QuadratureRule:
    """Deterministic rule for ``domain`` at ``level`` (1 <= level <= MAX_LEVEL)."""
    if not isinstance(level, int) or not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be an integer in [1, {MAX_LEVEL}]")
    if isinstance(domain, Product):
        L = build_rule(domain.left, level)
        R = build_rule(domain.right, level)
        nodes = np.stack(np.broadcast_arrays(L.nodes[:, None], R.nodes[None, :]), axis=-1).reshape(-1, 2)
        weights = (L.weights[:, None] * R.weights[None, :]).ravel()
        return QuadratureRule(domain, level, nodes, weights, L.error_estimate + R.error_estimate)
    if not isinstance(domain, (Disk, HalfPlane, FundamentalDomain)):
        raise TypeError(f"unsupported domain {domain!r}")
    nodes, weights = _raw(domain, level)
    cn, cw = _raw(domain, level, 0.75)
    g = _reference(domain)
    floor = 4 * np.finfo(float).eps
    est = abs(np.dot(weights, g(nodes)) - np.dot(cw, g(cn)))
    prev = build_rule(domain, level - 1).error_estimate if level > 1 else math.inf
    est = min(prev, max(est, floor) + _tail(domain))
    return QuadratureRule(domain, level, nodes, weights, float(est), cn, cw)


def rule_for_weight(t: float, level: int) -> QuadratureRule:
    """Disk rule whose radial nodes absorb (1 - |z|^2)^{t-2}."""
    return build_rule(Disk(weight_exponent=float(t - 2)), level)


# ------------------------------------------------------------------ integration


def density(domain: Domain, nodes: np.ndarray, t: float | None) -> np.ndarray:
    """Measure density relative to the stored weights."""
    if isinstance(domain, Disk):
        one_m = 1 - np.abs(nodes) ** 2
        alpha = domain.weight_exponent or 0.0
        ex = (0.0 if t is None else t - 2) - alpha
        return one_m**ex if ex != 0 else np.ones(nodes.shape)
    if t is None:
        return np.ones(nodes.shape)
    return nodes.imag ** (t - 2)


def _check_finite(vals, nodes):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.flatnonzero(bad.ravel())[0])
        raise IntegrandError(np.asarray(nodes).reshape(len(bad.ravel()), -1)[i].tolist(), vals.ravel()[i])


def _weighted_sum(f, domain, nodes, weights, t) -> complex:
    vals = np.asarray(f(nodes), dtype=np.complex128)
    vals = np.broadcast_to(vals, nodes.shape)
    _check_finite(vals, nodes)
    return _accel.neumaier_sum(np.ascontiguousarray(weights * density(domain, nodes, t) * vals))


def integrate(
    f: Callable, rule: QuadratureRule, measure_weight: float | None = None, tail_t: float | None = None
) -> FormValue:
    """Compensated node sum in node order; err = |fine - coarse| + tail bound.

    ``tail_t`` is the decay exponent of the integrand's w_t envelope used for the
    truncation-tail term (defaults to ``measure_weight``, or 4).
    """
    if isinstance(rule.domain, Product):
        raise TypeError("use integrate_product for product domains")
    val = _weighted_sum(f, rule.domain, rule.nodes, rule.weights, measure_weight)
    cval = _weighted_sum(f, rule.domain, rule.coarse_nodes, rule.coarse_weights, measure_weight)
    tail = _tail(rule.domain, tail_t if tail_t is not None else measure_weight)
    if val == 0 and cval == 0:
        tail = 0.0
    return FormValue(val, abs(val - cval) + tail)


def integrate_product(
    f: Callable,
    ruleF: QuadratureRule,
    ruleH: QuadratureRule,
    tF: float | None = 0.0,
    tH: float | None = 0.0,
) -> FormValue:
    """Tensor double sum of f(z, eta); rows summed first, each compensated."""

    def run(nF, wF, nH, wH):
        vals = np.asarray(f(nF[:, None], nH[None, :]), dtype=np.complex128)
        vals = np.broadcast_to(vals, (len(nF), len(nH)))
        _check_finite(vals, np.stack(np.broadcast_arrays(nF[:, None], nH[None, :]), -1))
        inner = _accel.neumaier_rows(np.ascontiguousarray(vals * (wH * density(ruleH.domain, nH, tH))[None, :]))
        return _accel.neumaier_sum(np.ascontiguousarray(inner * wF * density(ruleF.domain, nF, tF)))

    val = run(ruleF.nodes, ruleF.weights, ruleH.nodes, ruleH.weights)
    c1 = run(ruleF.coarse_nodes, ruleF.coarse_weights, ruleH.nodes, ruleH.weights)
    c2 = run(ruleF.nodes, ruleF.weights, ruleH.coarse_nodes, ruleH.coarse_weights)
    if val == 0:
        return FormValue(0j, 0.0)
    return FormValue(val, abs(val - c1) + abs(val - c2))


def integrate_fibered(f: Callable, ruleF: QuadratureRule, ruleH: QuadratureRule) -> FormValue:
    """Integral over F x H of f(z, eta) d nu_0(z) d nu_0(eta), nu_0 = dx dy / y^2.

    The H-rule (centred at i) is carried to each z by eta = Re z + Im z * eta',
    which preserves nu_0.
    """

    def run(nF, wF, nH, wH):
        eta = nF.real[:, None] + nF.imag[:, None] * nH[None, :]
        vals = np.asarray(f(nF[:, None], eta), dtype=np.complex128)
        vals = np.broadcast_to(vals, eta.shape)
        _check_finite(vals, eta)
        inner = _accel.neumaier_rows(np.ascontiguousarray(vals * (wH / nH.imag**2)[None, :]))
        return _accel.neumaier_sum(np.ascontiguousarray(inner * wF / nF.imag**2))

    val = run(ruleF.nodes, ruleF.weights, ruleH.nodes, ruleH.weights)
    c1 = run(ruleF.coarse_nodes, ruleF.coarse_weights, ruleH.nodes, ruleH.weights)
    c2 = run(ruleF.nodes, ruleF.weights, ruleH.coarse_nodes, ruleH.coarse_weights)
    return FormValue(val, abs(val - c1) + abs(val - c2))
