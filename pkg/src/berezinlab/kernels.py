"""Symbols k(z, conj w) as immutable node trees.

Every node evaluates in its own model ('H' upper half-plane, 'D' disk, or
None for model-free nodes) and transports points through the Cayley map
otherwise; covariant symbols are invariant under the unitary transport.
Evaluation keeps each argument's own array shape until the final
broadcast, so point-only factors (Delta(z), basis vectors) are computed
once per distinct point array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import berg, hyp, modf
from .hyp import ModularMatrix


def ipow(x, n: int):
    """x**n for a nonnegative integer n by repeated squaring (exact branch-free power)."""
    n = int(n)
    result = None
    base = x
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return np.ones_like(x) if result is None else result


def _bshape(*arrays):
    return np.broadcast_shapes(*(np.shape(a) for a in arrays))


class KernelFn:
    model: str | None = None
    invariant: bool = False
    growth: float = 0.0  # |k| <= C w_1^{-growth}
    weight: float | None = None
    invariance_tol: float = 1e-8

    def _eval(self, z, w):
        raise NotImplementedError

    def __call__(self, z, w):
        return self._eval(np.asarray(z, dtype=np.complex128), np.asarray(w, dtype=np.complex128))

    def on(self, model: str, z, w):
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        if self.model is None or self.model == model:
            return self._eval(z, w)
        if model == "H":
            return self._eval(hyp.cayley(z), hyp.cayley(w))
        return self._eval(hyp.cayley_inv(z), hyp.cayley_inv(w))

    def on_disk(self, u, v):
        return self.on("D", u, v)

    def adjoint(self) -> "KernelFn":
        return AdjointOf(self)

    def __add__(self, other):
        return Sum(self, as_kernel(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum(self, Scale(-1.0, as_kernel(other)))

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, c):
        if isinstance(c, KernelFn):
            raise TypeError("use star products for kernel products")
        return Scale(complex(c), self)

    __rmul__ = __mul__

    def spec(self) -> dict:
        raise NotImplementedError


def as_kernel(x) -> KernelFn:
    return x if isinstance(x, KernelFn) else Constant(complex(x))


@dataclass(frozen=True, eq=False)
class Constant(KernelFn):
    c: complex = 1.0

    invariant = True

    def _eval(self, z, w):
        return np.full(_bshape(z, w), complex(self.c))

    def spec(self):
        return {"type": "Constant", "c": [complex(self.c).real, complex(self.c).imag]}


@dataclass(frozen=True, eq=False)
class InvariantPower(KernelFn):
    """phi^m with phi(z, conj w) = Delta(z) conj(Delta(w)) (z - conj w)^12."""

    m: int = 1

    model = "H"
    invariant = True

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError("m must be a positive integer")

    @property
    def growth(self):
        return 6.0 * self.m

    def _eval(self, z, w):
        dz = modf.delta_anywhere(z)
        dw = modf.delta_anywhere(w)
        return ipow(dz * np.conj(dw) * ipow(z - np.conj(w), 12), self.m)

    def spec(self):
        return {"type": "InvariantPower", "m": int(self.m)}


@dataclass(frozen=True, eq=False)
class TruncatedMatrix(KernelFn):
    A: berg.OperatorMatrix = None

    model = "D"

    @property
    def weight(self):
        return self.A.trunc.t

    def _eval(self, z, w):
        return berg.covariant_symbol(self.A, z, w)

    def spec(self):
        e = self.A.entries
        return {
            "type": "TruncatedMatrix",
            "t": self.A.trunc.t,
            "entries": [[[v.real, v.imag] for v in row] for row in e],
        }


def CoherentRankOne(v1, v2, trunc: berg.BergmanTruncation) -> TruncatedMatrix:
    """Symbol of the rank-one operator v1 (x) v2* (coefficients in the orthonormal basis)."""
    v1 = np.asarray(v1, dtype=np.complex128)
    v2 = np.asarray(v2, dtype=np.complex128)
    return TruncatedMatrix(berg.OperatorMatrix(np.outer(v1, np.conj(v2)), trunc))


@dataclass(frozen=True, eq=False)
class PoincareSeed(KernelFn):
    """((z - conj w)/2i)^p (2i/(z+i))^p conj((2i/(w+i))^p); decays like |j|^-p under the group."""

    p: int = 12

    model = "H"

    @property
    def decay_exponent(self):
        return self.p

    def _eval(self, z, w):
        p = int(self.p)
        a = (2j / (z + 1j)) ** p
        b = np.conj((2j / (w + 1j)) ** p)
        return ((z - np.conj(w)) / 2j) ** p * a * b

    def spec(self):
        return {"type": "PoincareSeed", "p": int(self.p)}


def ball_by_entries(L: int) -> list[ModularMatrix]:
    """PSL2(Z) elements with all |entries| <= L."""
    out = []
    for c in range(0, L + 1):
        for d in range(-L, L + 1):
            if c == 0 and d != 1:
                continue
            if math.gcd(c, d) != 1:
                continue
            for a in range(-L, L + 1):
                if c == 0:
                    if a != 1:
                        continue
                    for b in range(-L, L + 1):
                        out.append(ModularMatrix(1, b, 0, 1))
                    continue
                if (a * d - 1) % c:
                    continue
                b = (a * d - 1) // c
                if abs(b) <= L:
                    out.append(ModularMatrix(a, b, c, d))
    return out


MIN_SEED_DECAY = 4


@dataclass(frozen=True, eq=False)
class GroupAveraged(KernelFn):
    """sum over gamma with max|entry| <= L of seed(gamma z, gamma w)."""

    seed: KernelFn = None
    L: int = 5
    elements: tuple = field(default=(), compare=False)

    model = "H"
    invariant = True
    invariance_tol = 1e-6

    def __post_init__(self):
        decay = getattr(self.seed, "decay_exponent", None)
        if not getattr(self.seed, "invariant", False) and (decay is None or decay < MIN_SEED_DECAY):
            raise ValueError(f"seed must decay with exponent >= {MIN_SEED_DECAY} under the group action")
        if not self.elements:
            object.__setattr__(self, "elements", tuple(ball_by_entries(self.L)))

    def _eval(self, z, w):
        acc = np.zeros(_bshape(z, w), dtype=np.complex128)
        for g in self.elements:
            acc = acc + self.seed.on("H", g.act(z), g.act(w))
        return acc

    def spec(self):
        return {"type": "GroupAveraged", "seed": self.seed.spec(), "L": self.L}


@dataclass(frozen=True, eq=False)
class Sum(KernelFn):
    a: KernelFn = None
    b: KernelFn = None

    def __post_init__(self):
        ms = {k.model for k in (self.a, self.b)} - {None}
        if len(ms) > 1:
            raise ValueError("summands live in different models")

    @property
    def model(self):
        return self.a.model or self.b.model

    @property
    def invariant(self):
        return self.a.invariant and self.b.invariant

    @property
    def growth(self):
        return max(self.a.growth, self.b.growth)

    @property
    def invariance_tol(self):
        return max(self.a.invariance_tol, self.b.invariance_tol)

    def _eval(self, z, w):
        m = self.model or "D"
        return self.a.on(m, z, w) + self.b.on(m, z, w)

    def spec(self):
        return {"type": "Sum", "a": self.a.spec(), "b": self.b.spec()}


@dataclass(frozen=True, eq=False)
class Scale(KernelFn):
    c: complex = 1.0
    k: KernelFn = None

    @property
    def model(self):
        return self.k.model

    @property
    def invariant(self):
        return self.k.invariant

    @property
    def growth(self):
        return self.k.growth

    @property
    def weight(self):
        return self.k.weight

    @property
    def invariance_tol(self):
        return self.k.invariance_tol

    def _eval(self, z, w):
        return complex(self.c) * self.k._eval(z, w)

    def spec(self):
        c = complex(self.c)
        return {"type": "Scale", "c": [c.real, c.imag], "k": self.k.spec()}


@dataclass(frozen=True, eq=False)
class AdjointOf(KernelFn):
    """k*(z, conj w) = conj(k(w, conj z))."""

    k: KernelFn = None

    @property
    def model(self):
        return self.k.model

    @property
    def invariant(self):
        return self.k.invariant

    @property
    def growth(self):
        return self.k.growth

    @property
    def weight(self):
        return self.k.weight

    @property
    def invariance_tol(self):
        return self.k.invariance_tol

    def adjoint(self):
        return self.k

    def _eval(self, z, w):
        return np.conj(self.k._eval(w, z))

    def spec(self):
        return {"type": "AdjointOf", "k": self.k.spec()}


@dataclass(frozen=True, eq=False)
class Retagged(KernelFn):
    """Same symbol, read at another weight (the Psi_{s,t} map on symbols)."""

    k: KernelFn = None
    s: float = 4.0

    @property
    def model(self):
        return self.k.model

    @property
    def invariant(self):
        return self.k.invariant

    @property
    def growth(self):
        return self.k.growth

    @property
    def weight(self):
        return self.s

    def _eval(self, z, w):
        return self.k._eval(z, w)

    def spec(self):
        return {"type": "Retagged", "k": self.k.spec(), "s": self.s}


# ------------------------------------------------------------------ multipliers


def log_phi(z, w):
    """Global log phi(z, conj w) = log Delta(z) + conj log Delta(w) + 12 Log(z - conj w).

    Diagonally invariant: the difference under gamma is continuous, lies in
    2 pi i Z and vanishes on the diagonal, where Im log phi = 6 pi.
    """
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    return modf.log_delta_anywhere(z) + np.conj(modf.log_delta_anywhere(w)) + 12 * np.log(z - np.conj(w))


def chi_ratio_log(t_from: float, t_to: float) -> float:
    return math.log((t_from - 1) / (t_to - 1))


@dataclass(frozen=True)
class Multiplier:
    """exp(phi_eps (log phi - 1/(phi_t - 1))) * (chi_from / chi_to)
    * Delta(z)^de conj(Delta(w))^de * (1 - u conj v)^{-theta_eps}, u, v the disk images."""

    phi_eps: float = 0.0
    phi_t: float | None = None
    delta_eps: float = 0.0
    chi_from: float | None = None
    chi_to: float | None = None
    theta_eps: float = 0.0

    def then(self, other: "Multiplier") -> "Multiplier | None":
        """Canonical merge of ``other`` applied after ``self``; None if not mergeable."""
        if self.phi_eps and other.phi_eps and self.phi_t != other.phi_t:
            return None
        if self.chi_to is not None and other.chi_from is not None and self.chi_to != other.chi_from:
            return None
        phi_t = self.phi_t if self.phi_eps else other.phi_t
        phi_eps = self.phi_eps + other.phi_eps
        if self.chi_from is None:
            cf, ct = other.chi_from, other.chi_to
        elif other.chi_from is None:
            cf, ct = self.chi_from, self.chi_to
        else:
            cf, ct = self.chi_from, other.chi_to
        return Multiplier(
            phi_eps=phi_eps,
            phi_t=phi_t if phi_eps else None,
            delta_eps=self.delta_eps + other.delta_eps,
            chi_from=cf,
            chi_to=ct,
            theta_eps=self.theta_eps + other.theta_eps,
        )

    def log_value(self, z, w):
        """log of the multiplier at H points z, w."""
        z = np.asarray(z, dtype=np.complex128)
        w = np.asarray(w, dtype=np.complex128)
        out = np.zeros(_bshape(z, w), dtype=np.complex128)
        if self.phi_eps:
            out = out + self.phi_eps * (log_phi(z, w) - 1.0 / (self.phi_t - 1))
        if self.delta_eps:
            out = out + self.delta_eps * (modf.log_delta_anywhere(z) + np.conj(modf.log_delta_anywhere(w)))
        if self.theta_eps:
            u, v = hyp.cayley(z), hyp.cayley(w)
            out = out - self.theta_eps * np.log(1 - u * np.conj(v))
        if self.chi_from is not None and self.chi_from != self.chi_to:
            out = out + chi_ratio_log(self.chi_from, self.chi_to)
        return out

    def __call__(self, z, w):
        return np.exp(self.log_value(z, w))


@dataclass(frozen=True, eq=False)
class MultiplierProduct(KernelFn):
    k: KernelFn = None
    mult: Multiplier = Multiplier()
    new_weight: float | None = None

    model = "H"

    @property
    def invariant(self):
        return self.k.invariant and self.mult.theta_eps == 0

    @property
    def growth(self):
        return self.k.growth + 6 * max(self.mult.phi_eps, 0.0)

    @property
    def weight(self):
        return self.new_weight if self.new_weight is not None else self.k.weight

    def _eval(self, z, w):
        return self.k.on("H", z, w) * self.mult(z, w)

    def spec(self):
        return {"type": "MultiplierProduct", "k": self.k.spec(), "mult": self.mult.__dict__}


def multiply(k: KernelFn, m: Multiplier, new_weight: float | None = None) -> KernelFn:
    """Attach a multiplier, merging with an existing multiplier node when possible."""
    if isinstance(k, MultiplierProduct):
        merged = k.mult.then(m)
        if merged is not None:
            return MultiplierProduct(k.k, merged, new_weight if new_weight is not None else k.new_weight)
    return MultiplierProduct(k, m, new_weight)


# ------------------------------------------------------------------ spec parsing


def from_spec(spec: dict, default_t: float = 4.0) -> KernelFn:
    kind = spec["type"]
    if kind == "Constant":
        c = spec.get("c", 1.0)
        return Constant(complex(*c) if isinstance(c, list) else complex(c))
    if kind == "InvariantPower":
        return InvariantPower(int(spec.get("m", 1)))
    if kind == "TruncatedMatrix":
        e = np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in spec["entries"]])
        tr = berg.BergmanTruncation(float(spec.get("t", default_t)), e.shape[0])
        return TruncatedMatrix(berg.OperatorMatrix(e, tr))
    if kind == "RandomMatrix":
        tr = berg.BergmanTruncation(float(spec.get("t", default_t)), int(spec.get("N", 8)))
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        return TruncatedMatrix(berg.random_operator(tr, rng))
    if kind == "PoincareSeed":
        return PoincareSeed(int(spec.get("p", 12)))
    if kind == "GroupAveraged":
        return GroupAveraged(from_spec(spec["seed"], default_t), int(spec.get("L", 5)))
    if kind == "Sum":
        return Sum(from_spec(spec["a"], default_t), from_spec(spec["b"], default_t))
    if kind == "Scale":
        c = spec.get("c", 1.0)
        return Scale(complex(*c) if isinstance(c, list) else complex(c), from_spec(spec["k"], default_t))
    if kind == "AdjointOf":
        return AdjointOf(from_spec(spec["k"], default_t))
    raise ValueError(f"unknown kernel type {kind!r}")
