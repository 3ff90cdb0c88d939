"""Berezin star product, traces, pairings, the deformation cocycle and CP multipliers.

Integrals over H (or D) use a disk rule centred at a chosen point c: eta =
g_c(u) with g_c a Mobius map sending 0 to c. The cross-ratio is invariant,
so in centred coordinates

    [z, conj eta, eta, conj zeta] = (1 - z' conj zeta')(1 - |u|^2) / ((1 - z' conj u)(1 - u conj zeta'))

and its t-th power carries (1 - |u|^2)^t, absorbed by the radial
Gauss-Jacobi weight. Every factor 1 - a conj b has positive real part, so
the logarithm is taken factor by factor (this branch is Mobius invariant
and agrees with the kernel branch (1 - z conj w)^{-t}).

Measures: star products use d nu_0* = dx dy / (4 y^2) on H, the pullback of
dA / (1 - |u|^2)^2, so chi_t int [.]^t d nu_0* = 1. The trace uses
d nu_0 = dx dy / y^2 on F with ha(F) = pi / 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _accel, berg, hyp, quad
from .kernels import (
    AdjointOf,
    Constant,
    GroupAveraged,
    KernelFn,
    Multiplier,
    Retagged,
    Scale,
    TruncatedMatrix,
    ipow,
    log_phi,
    multiply,
)
from .quad import FormValue

HA_F = math.pi / 3
DEFAULT_LEVEL = 4
F_LEVEL = 2
FD_STEPS = (1e-2, 5e-3)
CHUNK_ELEMS = 2_000_000


class NonInvariantKernel(ValueError):
    pass


@dataclass(frozen=True)
class WeightParam:
    t: float = 4.0

    def __post_init__(self):
        if self.t <= 1:
            raise ValueError("t must exceed 1")

    @property
    def chi(self) -> float:
        return (self.t - 1) / math.pi

    @property
    def chi_prime_over_chi(self) -> float:
        return 1.0 / (self.t - 1)

    @property
    def lambda_half(self) -> float:
        return 0.5 / (self.t - 1)


def chi(t: float) -> float:
    return (t - 1) / math.pi


# ------------------------------------------------------------------ geometry helpers


def _model_of(*ks: KernelFn) -> str:
    ms = {k.model for k in ks} - {None}
    return "H" if "H" in ms else "D"


def _from_center(model, c, u):
    return hyp.disk_from_center_H(c, u) if model == "H" else hyp.disk_from_center_D(c, u)


def _to_center(model, c, z):
    return hyp.disk_to_center_H(c, z) if model == "H" else hyp.disk_to_center_D(c, z)


def _midpoint(model, z, w):
    return hyp.midpoint_H(z, w) if model == "H" else hyp.midpoint_D(z, w)



def _rowsum(vals: np.ndarray, wts: np.ndarray) -> np.ndarray:
    """Weighted sums over the last axis (weights along that axis only)."""
    w = np.ravel(wts)
    if w.size != vals.shape[-1]:
        flat = np.ascontiguousarray((vals * wts).reshape(-1, vals.shape[-1]))
        return _accel.neumaier_rows(flat).reshape(vals.shape[:-1])
    return vals @ w.astype(np.complex128)


# ------------------------------------------------------------------ engine


def _star_core(k, l, s, z, w, nodes, wts, model, center, log_weight, extra):
    if center == "z":
        c = z
    elif center == "w":
        c = w
    elif center == "mid":
        c = _midpoint(model, z, w)
    else:
        c = center
    u = nodes
    eta = _from_center(model, np.asarray(c)[..., None], u)
    kv = k.on(model, z[..., None], eta)
    lv = l.on(model, eta, w[..., None])
    # cross-ratio factors in centred coordinates; the ones involving the centre vanish
    fz = fw = f0 = None
    if center != "z":
        zp = _to_center(model, c, z)
        fz = 1 - zp[..., None] * np.conj(u)
    if center != "w":
        wp_ = _to_center(model, c, w)
        fw = 1 - u * np.conj(wp_)[..., None]
    if center not in ("z", "w"):
        f0 = (1 - zp * np.conj(wp_))[..., None]
    integer_s = float(s).is_integer() and 0 < s <= 64
    if log_weight is False and integer_s:
        ratio = 1.0
        if f0 is not None:
            ratio = ratio * f0
        for f in (fz, fw):
            if f is not None:
                ratio = ratio / f
        integrand = kv * lv if isinstance(ratio, float) else kv * lv * ipow(ratio, int(s))
    else:
        lx = 0.0
        if f0 is not None:
            lx = lx + np.log(f0)
        for f in (fz, fw):
            if f is not None:
                lx = lx - np.log(f)
        integrand = kv * lv * np.exp(s * lx)
        if log_weight is not False:
            # log_weight may be a number: the integrand then carries (log_weight + ln[.])
            shift = 0.0 if log_weight is True else float(log_weight)
            integrand = integrand * (shift + lx + np.log1p(-np.abs(u) ** 2))
    if extra is not None:
        integrand = integrand * extra(z[..., None], eta, w[..., None])
    return chi(s) * _rowsum(integrand, wts)


def _chunked(fn, z, w, n):
    """Apply fn over the broadcast of z and w in slabs of at most CHUNK_ELEMS * n work.

    Slabs are cut along the leading non-trivial axis, so arrays that are
    constant along an axis are never expanded.
    """
    shape = np.broadcast_shapes(np.shape(z), np.shape(w))
    size = int(np.prod(shape))
    if size * n <= CHUNK_ELEMS or not shape:
        return fn(z, w)
    nd = len(shape)
    z = np.reshape(z, (1,) * (nd - np.ndim(z)) + np.shape(z))
    w = np.reshape(w, (1,) * (nd - np.ndim(w)) + np.shape(w))
    ax = next(i for i, e in enumerate(shape) if e > 1)
    step = max(1, CHUNK_ELEMS // (n * (size // shape[ax])))
    out = np.empty(shape, dtype=np.complex128)
    for i in range(0, shape[ax], step):
        sl = (slice(None),) * ax + (slice(i, i + step),)
        zi = z[sl] if z.shape[ax] > 1 else z
        wi = w[sl] if w.shape[ax] > 1 else w
        out[sl] = _chunked(fn, zi, wi, n)
    return out


def star_values(
    k: KernelFn,
    l: KernelFn,
    t: float,
    z,
    w,
    level: int = DEFAULT_LEVEL,
    center="mid",
    s: float | None = None,
    log_weight: bool = False,
    model: str | None = None,
    with_err: bool = True,
    extra: Callable | None = None,
):
    """chi_s int k(z, conj eta) l(eta, conj w) [z, conj eta, eta, conj w]^s d nu_0*(eta).

    Returns (values, errs) over the broadcast shape of z and w. With
    ``log_weight`` the integrand carries ln[.] (the cocycle integral).
    """
    s = t if s is None else s
    model = model or _model_of(k, l)
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    rule = quad.rule_for_weight(s, level)

    def run(nodes, wts):
        return _chunked(
            lambda zz, ww: _star_core(k, l, s, zz, ww, nodes, wts, model, center, log_weight, extra),
            z,
            w,
            len(nodes),
        )

    fine = run(rule.nodes, rule.weights)
    if not with_err:
        return fine, np.zeros(fine.shape)
    coarse = run(rule.coarse_nodes, rule.coarse_weights)
    return fine, np.abs(fine - coarse)


def _formvalues(vals, errs):
    return [FormValue(complex(v), float(e)) for v, e in zip(np.ravel(vals), np.ravel(errs))]


def star_product(k, l, wp: WeightParam, z, w, level: int = DEFAULT_LEVEL, center="mid") -> list[FormValue]:
    """Values of k *_t l at the point pairs (z[i], w[i]) (model of the kernels)."""
    v, e = star_values(k, l, wp.t, z, w, level=level, center=center)
    return _formvalues(v, e)


@dataclass(frozen=True, eq=False)
class StarNode(KernelFn):
    """Lazy k *_t l, evaluated by quadrature centred at the first argument."""

    k: KernelFn = None
    l: KernelFn = None
    t: float = 4.0
    level: int = DEFAULT_LEVEL
    center: str = "z"

    @property
    def model(self):
        return _model_of(self.k, self.l)

    @property
    def invariant(self):
        return self.k.invariant and self.l.invariant

    @property
    def growth(self):
        return self.k.growth + self.l.growth

    def _eval(self, z, w):
        return star_values(self.k, self.l, self.t, z, w, self.level, center=self.center, with_err=False)[0]


@dataclass(frozen=True, eq=False)
class CocycleNode(KernelFn):
    """Lazy c_t(k, l) by the log-weighted quadrature."""

    k: KernelFn = None
    l: KernelFn = None
    t: float = 4.0
    level: int = DEFAULT_LEVEL
    center: str = "z"

    @property
    def model(self):
        return _model_of(self.k, self.l)

    @property
    def invariant(self):
        return self.k.invariant and self.l.invariant

    @property
    def growth(self):
        return self.k.growth + self.l.growth

    def _eval(self, z, w):
        return cocycle_values(self.k, self.l, self.t, z, w, self.level, center=self.center, with_err=False)[0]


def _unit_factor(k):
    if isinstance(k, Constant):
        return complex(k.c)
    return None


def star(k, l, wp: WeightParam, level: int = DEFAULT_LEVEL, center: str = "z") -> KernelFn:
    """k *_t l as a lazy node; a constant factor is pulled out exactly (1 is the unit)."""
    ck, cl = _unit_factor(k), _unit_factor(l)
    if ck is not None:
        return l if ck == 1 else Scale(ck, l)
    if cl is not None:
        return k if cl == 1 else Scale(cl, k)
    return StarNode(k, l, wp.t, level, center)


def cocycle(k, l, wp: WeightParam, level: int = DEFAULT_LEVEL, center: str = "z") -> KernelFn:
    """c_t(k, l) as a lazy node; c_t vanishes when either argument is constant
    (1 is the unit of every *_s)."""
    if _unit_factor(k) is not None or _unit_factor(l) is not None:
        return Constant(0.0)
    return CocycleNode(k, l, wp.t, level, center)


# ------------------------------------------------------------------ cocycle


def cocycle_values(k, l, t, z, w, level=DEFAULT_LEVEL, center="mid", with_err=True, model=None):
    """c_t(k, l) = (chi'/chi)(k * l) + chi int k l [.]^t ln[.] d nu_0*."""
    return star_values(k, l, t, z, w, level, center, log_weight=1.0 / (t - 1), with_err=with_err, model=model)


def cocycle_fd_values(k, l, t, z, w, level=DEFAULT_LEVEL, center="mid", steps=FD_STEPS):
    """Forward differences of s -> k *_s l with order-2 Richardson over h, h/2."""
    base, e0 = star_values(k, l, t, z, w, level, center)
    h1, h2 = steps
    s1, e1 = star_values(k, l, t, z, w, level, center, s=t + h1)
    s2, e2 = star_values(k, l, t, z, w, level, center, s=t + h2)
    d1 = (s1 - base) / h1
    d2 = (s2 - base) / h2
    rich = (h1 * d2 - h2 * d1) / (h1 - h2)
    err = np.abs(d2 - d1) * h2 / (h1 - h2) + (e0 + e1) / h1 + (e0 + e2) / h2
    return rich, err


def cocycle_ct(k, l, wp: WeightParam, z, w, method: str = "LogQuadrature", level=DEFAULT_LEVEL) -> list[FormValue]:
    if method == "LogQuadrature":
        v, e = cocycle_values(k, l, wp.t, z, w, level)
    elif method == "FiniteDifference":
        v, e = cocycle_fd_values(k, l, wp.t, z, w, level)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _formvalues(v, e)


def matrix_star(A, sample: Callable, t: float, z, w, side: str = "left", radius: float = 0.55, M: int = 64):
    """k_A *_t X (side="left") or X *_t k_A (side="right") for a holomorphic symbol X.

    X K_t is holomorphic in its first argument and antiholomorphic in its
    second, so only N Taylor coefficients enter; they come from trapezoid
    sums of ``sample`` on the circle |eta| = radius. ``sample(a, b)``
    returns (values, errs) of X(a, conj b). The result's err propagates the
    sample errors through the (linear) map and adds the change under a
    second radius. Disk model.
    """
    tr = A.trunc
    N = tr.N
    nrm = np.sqrt(np.asarray(tr.norms))
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    th = 2 * np.pi * np.arange(M) / M
    n = np.arange(N)

    def one(r):
        eta = r * np.exp(1j * th)
        sgn = -1 if side == "left" else 1
        F = np.exp(sgn * 1j * np.outer(n, th)) / (M * r ** n[:, None])
        if side == "left":
            xv, xe = sample(eta[None, :], w[:, None])
            kk = berg.full_kernel(t, eta[None, :], w[:, None])
            # Taylor coefficients a_n(w) of eta -> X K; value = sum_m e_m(z) sum_n A_mn nrm_n a_n / K(z, w)
            coef = ((tr.basis(z) @ A.entries) * nrm) @ F
        else:
            xv, xe = sample(z[:, None], eta[None, :])
            kk = berg.full_kernel(t, z[:, None], eta[None, :])
            coef = (nrm * (np.conj(tr.basis(w)) @ A.entries.T)) @ F
        coef = coef / berg.full_kernel(t, z, w)[:, None] * kk
        return np.sum(coef * xv, axis=1), np.sum(np.abs(coef) * xe, axis=1)

    v1, e1 = one(radius)
    v2, e2 = one(0.85 * radius)
    return v1, e1 + e2 + np.abs(v1 - v2)


def hochschild_terms(A, B, C, t: float, z, w, level: int = 8) -> list[list[FormValue]]:
    """k c(l,m), c(k*l,m), c(k,l*m), c(k,l) m for matrix kernels k, l, m at points (z, w).

    Returns one list of four FormValues per point; the defect is
    T0 - T1 + T2 - T3.
    """
    kA, kB, kC = (TruncatedMatrix(X) for X in (A, B, C))
    t0 = matrix_star(A, lambda a, b: cocycle_values(kB, kC, t, a, b, level), t, z, w, "left")
    t1 = cocycle_values(TruncatedMatrix(A @ B), kC, t, z, w, level)
    t2 = cocycle_values(kA, TruncatedMatrix(B @ C), t, z, w, level)
    t3 = matrix_star(C, lambda a, b: cocycle_values(kA, kB, t, a, b, level), t, z, w, "right")
    cols = [_formvalues(*x) for x in (t0, t1, t2, t3)]
    return [list(r) for r in zip(*cols)]


def hochschild_defect(terms: list[FormValue]) -> FormValue:
    a, b, c, d = terms
    return a - b + c - d


# ------------------------------------------------------------------ invariance and trace


def spot_check_invariance(k: KernelFn, n: int = 10, seed: int = 7, tol: float | None = None) -> float:
    """Max relative |k(gz, gw) - k(z, w)| over n random (gamma, z, w); raises if above tolerance."""
    tol = k.invariance_tol if tol is None else tol
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        g = hyp.random_modular(rng, 4)
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 1.6))
        w = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 1.6))
        a = k.on("H", np.array(z), np.array(w))
        b = k.on("H", np.array(complex(g.act(z))), np.array(complex(g.act(w))))
        worst = max(worst, float(abs(a - b) / max(abs(a), 1e-300)))
    if worst > tol:
        raise NonInvariantKernel(f"invariance defect {worst:.3g} exceeds {tol:.1g}")
    return worst


def f_rule(level: int = F_LEVEL) -> quad.QuadratureRule:
    return quad.build_rule(quad.FundamentalDomain(), level)


def trace_invariant(k: KernelFn, wp: WeightParam | None = None, level: int = 3, check: bool = True) -> FormValue:
    """tau(k) = (1 / ha(F)) int_F k(z, conj z) d nu_0."""
    if check:
        if not k.invariant:
            raise NonInvariantKernel("trace_invariant needs a Gamma-invariant kernel")
        spot_check_invariance(k)
    rule = f_rule(level)
    val = quad.integrate(lambda z: k.on("H", z, z), rule, 0.0)
    return val.scale(1 / HA_F)


# ------------------------------------------------------------------ fibre integrals over F x H


def fiber_integral(
    f2: Callable,
    t: float,
    fiber: str = "disk",
    level_F: int = F_LEVEL,
    level_D: int = DEFAULT_LEVEL,
    growth: float = 0.0,
    chunk: int = 8,
):
    """(chi_t / ha) int_F int_H f2(z, zeta) w_t(z, zeta) d nu_0*(zeta) d nu_0(z).

    ``fiber="disk"``: zeta = g_z(u) on the Gauss-Jacobi disk rule, where
    w_t d nu_0* = (1-|u|^2)^{t-2} dA. ``fiber="halfplane"``: zeta = Re z +
    Im z eta' with eta' on a half-plane rectangle sized for w_{t - growth}.
    f2 gets z of shape (m, 1) and zeta of shape (m, n) and returns an array
    or a list of arrays; the result is a FormValue or a list of them.
    """
    rF = f_rule(level_F)

    def run(zF, wF, nodes, wts):
        acc = []
        for i in range(0, len(zF), chunk):
            z = zF[i : i + chunk][:, None]
            if fiber == "disk":
                zeta = hyp.disk_from_center_H(z, nodes[None, :])
                vals = f2(z, zeta)
                ww = wts[None, :]
            else:
                zeta = z.real + z.imag * nodes[None, :]
                wt = hyp.w1(z, zeta) ** t
                vals = f2(z, zeta)
                vals = [v * wt for v in vals] if isinstance(vals, list) else vals * wt
                ww = (wts / (4 * nodes.imag**2))[None, :]
            vals = vals if isinstance(vals, list) else [vals]
            acc.append([_rowsum(np.broadcast_to(v, zeta.shape), ww) for v in vals])
        inner = [np.concatenate(col) for col in zip(*acc)]
        return [_accel.neumaier_sum(np.ascontiguousarray(c * wF / zF.imag**2)) for c in inner]

    if fiber == "disk":
        rD = quad.rule_for_weight(t, level_D)
    else:
        rD = quad.build_rule(quad.halfplane_for_weight(max(t - growth, 1.5)), level_D)
    fine = run(rF.nodes, rF.weights, rD.nodes, rD.weights)
    c1 = run(rF.coarse_nodes, rF.coarse_weights, rD.nodes, rD.weights)
    c2 = run(rF.nodes, rF.weights, rD.coarse_nodes, rD.coarse_weights)
    scale = chi(t) / HA_F
    out = [FormValue(f * scale, (abs(f - a) + abs(f - b)) * scale) for f, a, b in zip(fine, c1, c2)]
    return out if len(out) > 1 else out[0]


def log_w_factor(t: float):
    """chi'/chi + ln w_1: the s-derivative of chi_s w_s over chi_t w_t."""
    return lambda z, zeta: 1.0 / (t - 1) + np.log(hyp.w1(z, zeta))


def pair_traces(x: KernelFn, y: KernelFn, wp: WeightParam, factors, **kw) -> list[FormValue]:
    """(chi/ha) int_F int_H f(z, zeta) x(z, conj zeta) y(zeta, conj z) w_t for each factor f.

    A factor of None means 1 (tau(x * y)); "E" means the log weight of
    :func:`log_w_factor` (the Dirichlet pairing); a callable d gives
    tau(M_d(x) * y). x and y are evaluated once for all factors.
    """
    t = wp.t
    fs = [log_w_factor(t) if f == "E" else f for f in factors]

    def f2(z, zeta):
        v = x.on("H", z, zeta) * y.on("H", zeta, z)
        return [v if f is None else v * f(z, zeta) for f in fs]

    kw.setdefault("growth", x.growth + y.growth)
    out = fiber_integral(f2, t, **kw)
    return out if isinstance(out, list) else [out]


def pair_trace(x: KernelFn, y: KernelFn, wp: WeightParam, log_weight: bool = False, d=None, **kw) -> FormValue:
    """tau(x *_t y), or tau(M_d(x) * y) with a symbol d, or with ``log_weight``
    the Dirichlet pairing E_t(x, y) = d/ds tau(x *_s y) at s = t."""
    f = d
    if log_weight:
        lw = log_w_factor(wp.t)
        f = lw if d is None else (lambda z, zeta: lw(z, zeta) * d(z, zeta))
    return pair_traces(x, y, wp, [f], **kw)[0]


def inner_product(k: KernelFn, l: KernelFn, wp: WeightParam, mode: str = "Invariant", **kw) -> FormValue:
    """Invariant: (chi/ha) int_F int_H k conj(l) w_t. HS: chi^2 int int_{D x D} k conj(l) w_t d mu_0^2."""
    if mode == "Invariant":
        kw.setdefault("fiber", "halfplane")
        kw.setdefault("growth", k.growth + l.growth)
        return fiber_integral(lambda z, zeta: k.on("H", z, zeta) * np.conj(l.on("H", z, zeta)), wp.t, **kw)
    if mode == "HS":
        return hs_pairing(lambda z, w: k.on("D", z, w) * np.conj(l.on("D", z, w)), wp.t, **kw)
    raise ValueError(f"unknown mode {mode!r}")


def hs_pairing(f2: Callable, t: float, level: int = DEFAULT_LEVEL) -> FormValue:
    """chi_t^2 int int_{D x D} f2(u, v) w_t(u, v) d mu_0(u) d mu_0(v).

    Normalized so that f2 = k_A conj(k_B) gives Tr(A B*). Product Jacobi
    rule in both variables; exact for matrix kernels of low degree.
    """
    r = quad.rule_for_weight(t, level)

    def run(nodes, wts):
        acc = 0j
        step = max(1, int(CHUNK_ELEMS // len(nodes)))
        for a in range(0, len(nodes), step):
            u = nodes[a : a + step, None]
            v = nodes[None, :]
            vals = np.broadcast_to(f2(u, v), (len(u), len(nodes))) * np.abs(1 - u * np.conj(v)) ** (-2 * t)
            acc += wts[a : a + step] @ (vals @ wts.astype(np.complex128))
        return acc

    fine = run(r.nodes, r.weights)
    coarse = run(r.coarse_nodes, r.coarse_weights)
    c2 = chi(t) ** 2
    return FormValue(fine * c2, abs(fine - coarse) * c2)


# ------------------------------------------------------------------ Dirichlet form and R


def dirichlet_and_real(k, l, wp: WeightParam, fd: bool = True, **kw) -> tuple[FormValue, FormValue]:
    """E_t(k, l) = d/ds tau(k *_s l) at s = t, and <R_t k, l> = -1/2 E_t(k, l*).

    The value comes from the log-weighted pairing; when ``fd`` is set the
    Richardson finite difference of s -> <k, l*>_s is computed too and
    their gap is added to err.
    """
    E = pair_trace(k, l, wp, log_weight=True, **kw)
    R = pair_trace(k, AdjointOf(l), wp, log_weight=True, **kw).scale(-0.5)
    if fd:
        h1, h2 = FD_STEPS
        base = pair_trace(k, l, wp, **kw).value
        d1 = (_pair_at(k, l, wp.t + h1, wp.t, **kw) - base) / h1
        d2 = (_pair_at(k, l, wp.t + h2, wp.t, **kw) - base) / h2
        rich = (h1 * d2 - h2 * d1) / (h1 - h2)
        E = FormValue(E.value, E.err + abs(rich - E.value))
    return E, R


def _pair_at(x, y, s, t, **kw):
    """tau(x *_s y) with the disk fibre rule for weight s."""
    return pair_trace(x, y, WeightParam(s), **kw).value


# ------------------------------------------------------------------ c0 and psi


def c0_terms(k, l, m, wp: WeightParam, symbols=(), level_D: int = DEFAULT_LEVEL, level_F: int = F_LEVEL) -> dict:
    """Pairings needed for tau(c0(k, l) * m) and for coboundaries tested against m.

    Nested products are evaluated at the fibre nodes with the inner rule
    centred on the point shared with the outer integral. For each symbol d
    in ``symbols`` the coboundary pairing
    tau(delta(M_d)(k, l) * m) = B_d(k*l, m) - B_d(l, m*k) - B_d(k, l*m)
    is returned, with B_d(x, y) = tau(M_d(x) * y).
    """
    kw = dict(level_D=level_D, level_F=level_F)
    t = wp.t
    kl = star(k, l, wp, level_D)
    mk = star(m, k, wp, level_D, center="w")
    lm = star(l, m, wp, level_D, center="w")
    fac = [None, "E", *symbols]
    p1 = pair_traces(kl, m, wp, fac, **kw)
    p2 = pair_traces(l, mk, wp, fac[1:], **kw)
    p3 = pair_traces(k, lm, wp, fac[1:], **kw)
    c_kl = cocycle(k, l, wp, level_D)
    if isinstance(c_kl, Constant):
        c = FormValue(0.0, 0.0)
    else:
        (c,) = pair_traces(c_kl, m, wp, [None], **kw)
    e1, e2, e3 = p1[1], p2[0], p3[0]
    value = c + (e1 - e2 - e3).scale(0.5)
    cob = [a - b - cc for a, b, cc in zip(p1[2:], p2[1:], p3[1:])]
    return {
        "value": value,
        "tau_c": c,
        "tau_klm": p1[0],
        "E_kl_m": e1,
        "E_l_mk": e2,
        "E_k_lm": e3,
        "coboundaries": cob,
    }


def imaginary_cocycle_c0(k, l, m, wp: WeightParam, level_D: int = DEFAULT_LEVEL, level_F: int = F_LEVEL) -> dict:
    """tau(c0(k, l) * m) with c0 = c - [R(kl) - k R(l) - R(k) l], R weak via E.

    tau(R(x) * y) = -1/2 E(x, y), so
    tau(c0(k,l) m) = tau(c(k,l) m) + 1/2 [E(k*l, m) - E(l, m*k) - E(k, l*m)].
    Returns the value and each term.
    """
    out = c0_terms(k, l, m, wp, (), level_D, level_F)
    out.pop("coboundaries")
    return out


def cyclic_psi(k, l, m, wp: WeightParam, **kw) -> FormValue:
    """psi_t(k, l, m) = tau(c0(k, l) m)."""
    return imaginary_cocycle_c0(k, l, m, wp, **kw)["value"]


# ------------------------------------------------------------------ CP maps


def Phi(eps: float, t: float) -> Multiplier:
    """exp(eps (log phi - chi'/chi)): an exact semigroup with generator L_t."""
    return Multiplier(phi_eps=eps, phi_t=t)


def Beta(eps: float, t: float) -> Multiplier:
    """(chi_t / chi_{t+12 eps}) Delta(z)^eps conj(Delta(w))^eps, weight t -> t + 12 eps."""
    return Multiplier(delta_eps=eps, chi_from=t, chi_to=t + 12 * eps)


def Theta(eps: float) -> Multiplier:
    return Multiplier(theta_eps=eps)


def apply_cp_map(kind: str, k: KernelFn, wp: WeightParam, eps: float = 0.0, s: float | None = None, l=None):
    """Kernel-level CP maps. Dform returns a FormValue (needs ``l``)."""
    if kind in ("Beta", "Phi", "Theta") and eps < 0:
        raise ValueError("eps must be nonnegative")
    t = k.weight if k.weight is not None else wp.t
    if kind == "Phi":
        return multiply(k, Phi(eps, t))
    if kind == "Beta":
        return multiply(k, Beta(eps, t), new_weight=t + 12 * eps)
    if kind == "Theta":
        return multiply(k, Theta(eps))
    if kind == "Psi":
        if s is None or s < t:
            raise ValueError("Psi needs s >= t")
        return Retagged(k, s)
    if kind == "Dform":
        from .forms import InvariantRadial, q_form

        if l is None:
            raise ValueError("Dform needs a second kernel")
        return q_form(InvariantRadial(coeffs=None, power=eps), k, l, wp, "Invariant")
    raise ValueError(f"unknown map {kind!r}")


def psi_kernel_factor(t: float, s: float, z, w):
    """K_s / K_t = (chi_s / chi_t)(1 - z conj w)^{-(s-t)} on the disk (Theta(s - t) scaled)."""
    return (chi(s) / chi(t)) * np.exp(-(s - t) * np.log(1 - np.asarray(z) * np.conj(np.asarray(w))))


def generator_Lt(k: KernelFn, wp: WeightParam, z, w) -> list[FormValue]:
    """L_t(k) = (log phi - chi'/chi) k; err is the gap to a Richardson central difference of Phi."""
    direct = k.on("H", z, w) * (log_phi(z, w) - wp.chi_prime_over_chi)
    fd = phi_derivative_fd(k, wp, z, w)
    return _formvalues(direct, np.abs(direct - fd))


def phi_derivative_fd(k, wp, z, w, h: float = 1e-3):
    def D(hh):
        plus = multiply(k, Phi(hh, wp.t)).on("H", z, w)
        minus = multiply(k, Phi(-hh, wp.t)).on("H", z, w) if hh else 0
        return (plus - minus) / (2 * hh)

    d1, d2 = D(h), D(h / 2)
    return (4 * d2 - d1) / 3


def group_average(seed: KernelFn, L: int) -> GroupAveraged:
    return GroupAveraged(seed, L)


def invariance_defect(k: KernelFn, n: int = 20, seed: int = 3) -> float:
    try:
        return spot_check_invariance(k, n=n, seed=seed, tol=math.inf)
    except NonInvariantKernel:  # pragma: no cover
        return math.inf


__all__ = [
    "WeightParam",
    "star_product",
    "star_values",
    "StarNode",
    "CocycleNode",
    "cocycle_ct",
    "trace_invariant",
    "inner_product",
    "pair_trace",
    "dirichlet_and_real",
    "imaginary_cocycle_c0",
    "cyclic_psi",
    "apply_cp_map",
    "generator_Lt",
    "group_average",
    "Constant",
]
