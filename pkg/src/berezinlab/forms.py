"""Toeplitz forms with two-point symbols, coboundaries, Alexander-Spanier forms,
the group 1-cocycle K and the unbounded-form obstruction diagnostics.

Symbols d(z, zeta) live on H x H. The Invariant domain integrates over
F x H against (chi_t / ha) w_t, the HS domain over D x D against
chi_t^2 w_t d mu_0^2; symbols used on the disk have a disk form
(:meth:`SymbolFn2.on_disk`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import berg, hyp, modf, quad, quant
from .hyp import ModularMatrix
from .kernels import AdjointOf, Constant, KernelFn, TruncatedMatrix
from .quad import FormValue
from .quant import WeightParam

FLAG_TOL = 1e-10


class FlagMismatch(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


# ------------------------------------------------------------------ symbols


class SymbolFn2:
    """Two-point symbol d(z, zeta) on H x H."""

    diag_invariant: bool = False  # d(gz, g zeta) = d(z, zeta)
    gg_invariant: bool = False  # d(g1 z, g2 zeta) = d(z, zeta)
    phi0_class: bool = False  # pieces of the Alexander-Spanier symbol phi_0

    def __call__(self, z, zeta):
        return self._eval(np.asarray(z, dtype=np.complex128), np.asarray(zeta, dtype=np.complex128))

    def _eval(self, z, zeta):
        raise NotImplementedError

    def on_disk(self, u, v):
        return self(hyp.cayley_inv(u), hyp.cayley_inv(v))

    def __add__(self, other):
        return SymSum(self, other)

    def __rmul__(self, c):
        return SymScale(complex(c), self)

    def conj_swap(self):
        return ConjSwap(self)

    def spec(self) -> dict:
        return {"type": type(self).__name__}


@dataclass(frozen=True, eq=False)
class ZeroSymbol(SymbolFn2):
    diag_invariant = True
    gg_invariant = True

    def _eval(self, z, zeta):
        return np.zeros(np.broadcast_shapes(z.shape, zeta.shape), dtype=np.complex128)

    def on_disk(self, u, v):
        return np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)), dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class ConstantSymbol(SymbolFn2):
    c: complex = 1.0
    diag_invariant = True
    gg_invariant = True

    def _eval(self, z, zeta):
        return np.full(np.broadcast_shapes(z.shape, zeta.shape), complex(self.c))

    def on_disk(self, u, v):
        return np.full(np.broadcast_shapes(np.shape(u), np.shape(v)), complex(self.c))


@dataclass(frozen=True, eq=False)
class ArgCrossTerm(SymbolFn2):
    """a(z, zeta) = Arg(z - conj zeta), minus pi/2 when ``centered``.

    The disk form is Arg(1 - u conj v); it differs from the transported
    half-plane symbol by the separated term arg(1 - v) - arg(1 - u).
    """

    centered: bool = True
    phi0_class = True

    def _eval(self, z, zeta):
        a = np.angle(z - np.conj(zeta))
        return a - math.pi / 2 if self.centered else a

    def on_disk(self, u, v):
        return np.angle(1 - np.asarray(u) * np.conj(np.asarray(v))).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class ArgDeltaDiff(SymbolFn2):
    """Im log Delta(z) - Im log Delta(zeta) with the global (continuous) log."""

    phi0_class = True

    def _eval(self, z, zeta):
        return (modf.log_delta_anywhere(z).imag - modf.log_delta_anywhere(zeta).imag).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class Arg0DeltaDiff(SymbolFn2):
    """Principal-argument version Arg Delta(z) - Arg Delta(zeta)."""

    phi0_class = True

    def _eval(self, z, zeta):
        return (np.angle(modf.delta_anywhere(z)) - np.angle(modf.delta_anywhere(zeta))).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class InvariantRadial(SymbolFn2):
    """g(w_1) = w_1^power * sum_j coeffs[j] w_1^j, w_1 = 4 Im z Im zeta / |z - conj zeta|^2."""

    coeffs: tuple | None = (1.0,)
    power: float = 0.0
    diag_invariant = True

    def _g(self, w):
        cs = (1.0,) if self.coeffs is None else self.coeffs
        out = np.zeros(w.shape, dtype=np.complex128)
        for c in reversed(cs):
            out = out * w + c
        return out * w**self.power if self.power else out

    def _eval(self, z, zeta):
        return self._g(hyp.w1(z, zeta))

    def on_disk(self, u, v):
        return self._g(hyp.disk_w1(np.asarray(u), np.asarray(v)))

    def spec(self):
        return {"type": "InvariantRadial", "coeffs": list(self.coeffs or (1.0,)), "power": self.power}


@dataclass(frozen=True, eq=False)
class Separated(SymbolFn2):
    """d1(z) - d1(zeta) for a point function d1 (given in the model ``model``)."""

    d1: Callable = None
    model: str = "D"
    name: str = "d1"

    def _eval(self, z, zeta):
        if self.model == "D":
            return self.on_disk(hyp.cayley(z), hyp.cayley(zeta))
        return np.asarray(self.d1(z) - self.d1(zeta), dtype=np.complex128)

    def on_disk(self, u, v):
        if self.model == "D":
            return np.asarray(self.d1(np.asarray(u)) - self.d1(np.asarray(v)), dtype=np.complex128)
        return self(hyp.cayley_inv(u), hyp.cayley_inv(v))

    def spec(self):
        return {"type": "Separated", "name": self.name}


@dataclass(frozen=True, eq=False)
class SymSum(SymbolFn2):
    a: SymbolFn2 = None
    b: SymbolFn2 = None

    @property
    def diag_invariant(self):
        return self.a.diag_invariant and self.b.diag_invariant

    @property
    def gg_invariant(self):
        return self.a.gg_invariant and self.b.gg_invariant

    @property
    def phi0_class(self):
        return all(s.phi0_class or s.diag_invariant for s in (self.a, self.b))

    def _eval(self, z, zeta):
        return self.a(z, zeta) + self.b(z, zeta)

    def on_disk(self, u, v):
        return self.a.on_disk(u, v) + self.b.on_disk(u, v)


@dataclass(frozen=True, eq=False)
class SymScale(SymbolFn2):
    c: complex = 1.0
    d: SymbolFn2 = None

    @property
    def diag_invariant(self):
        return self.d.diag_invariant

    @property
    def gg_invariant(self):
        return self.d.gg_invariant

    @property
    def phi0_class(self):
        return self.d.phi0_class

    def _eval(self, z, zeta):
        return complex(self.c) * self.d(z, zeta)

    def on_disk(self, u, v):
        return complex(self.c) * self.d.on_disk(u, v)


@dataclass(frozen=True, eq=False)
class ConjSwap(SymbolFn2):
    """conj(d(zeta, z))."""

    d: SymbolFn2 = None

    @property
    def diag_invariant(self):
        return self.d.diag_invariant

    @property
    def gg_invariant(self):
        return self.d.gg_invariant

    @property
    def phi0_class(self):
        return self.d.phi0_class

    def _eval(self, z, zeta):
        return np.conj(self.d(zeta, z))

    def on_disk(self, u, v):
        return np.conj(self.d.on_disk(v, u))


def phi0_symbol(kappa: float = 12.0) -> SymbolFn2:
    """kappa a_0 + arg Delta(z) - arg Delta(zeta); diagonally invariant for kappa = 12."""
    return SymSum(SymScale(kappa, ArgCrossTerm()), ArgDeltaDiff())


@dataclass(frozen=True)
class FlagReport:
    diag_defect: float
    gg_defect: float


def measure_flags(d: SymbolFn2, n_gamma: int = 10, n_pairs: int = 10, seed: int = 11) -> FlagReport:
    """Largest |d(g z, g zeta) - d(z, zeta)| and |d(g1 z, g2 zeta) - d(z, zeta)| over random samples."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.5, 0.5, n_pairs) + 1j * rng.uniform(0.9, 1.8, n_pairs)
    w = rng.uniform(-0.5, 0.5, n_pairs) + 1j * rng.uniform(0.9, 1.8, n_pairs)
    base = d(z, w)
    diag = gg = 0.0
    for _ in range(n_gamma):
        g1 = hyp.random_modular(rng, 3)
        g2 = hyp.random_modular(rng, 3)
        diag = max(diag, float(np.max(np.abs(d(g1.act(z), g1.act(w)) - base))))
        gg = max(gg, float(np.max(np.abs(d(g1.act(z), g2.act(w)) - base))))
    return FlagReport(diag, gg)


def verify_flags(d: SymbolFn2, tol: float = FLAG_TOL) -> FlagReport:
    """Check the claimed invariance flags by sampling; raise FlagMismatch when a claim fails."""
    rep = measure_flags(d)
    if d.diag_invariant and rep.diag_defect > tol * 10:
        raise FlagMismatch(f"diagonal invariance claimed, defect {rep.diag_defect:.3g}")
    if d.gg_invariant and rep.gg_defect > tol * 10:
        raise FlagMismatch(f"Gamma x Gamma invariance claimed, defect {rep.gg_defect:.3g}")
    return rep


# ------------------------------------------------------------------ forms


@dataclass(frozen=True, eq=False)
class Multiplied(KernelFn):
    """The pointwise product d(z, zeta) k(z, conj zeta) (the symbol of M_d(k))."""

    d: SymbolFn2 = None
    k: KernelFn = None

    @property
    def model(self):
        return self.k.model or "H"

    @property
    def growth(self):
        return self.k.growth

    def _eval(self, z, w):
        if self.model == "D":
            return self.d.on_disk(z, w) * self.k.on("D", z, w)
        return self.d(z, w) * self.k.on("H", z, w)


def q_form(d: SymbolFn2, k: KernelFn, l: KernelFn, wp: WeightParam, domain: str = "Invariant", **kw) -> FormValue:
    """Q_d(k, l) = chi int int d k conj(l) w_t over F x H (Invariant) or D x D (HS)."""
    if isinstance(d, ZeroSymbol):
        return FormValue(0.0, 0.0)
    if domain == "Invariant":
        if not (d.diag_invariant or d.phi0_class):
            raise FlagMismatch("Invariant domain needs a diagonally invariant symbol or a phi_0 piece")
        return quant.pair_traces(k, AdjointOf(l), wp, [d], **kw)[0]
    if domain == "HS":
        return quant.hs_pairing(lambda u, v: d.on_disk(u, v) * k.on("D", u, v) * np.conj(l.on("D", u, v)), wp.t, **kw)
    raise ValueError(f"unknown domain {domain!r}")


def _matrix_of(k: KernelFn) -> berg.OperatorMatrix | None:
    return k.A if isinstance(k, TruncatedMatrix) else None


def _mstar(x: KernelFn, y: KernelFn) -> KernelFn:
    """Product of two matrix symbols (exact: matrix product)."""
    return TruncatedMatrix(_matrix_of(x) @ _matrix_of(y))


def derivation_defect(d: SymbolFn2, k, l, m, wp: WeightParam, domain: str = "HS", **kw) -> dict:
    """<M_d(k*l), m> - <M_d(k)*l, m> - <k*M_d(l), m>; zero iff Leibniz holds on this triple.

    HS domain (matrix kernels): the second and third terms are moved across
    with <x*l, m> = <x, m*l^*> and <k*x, m> = <x, k^* * m>, so all three are
    Toeplitz forms between matrix symbols. Invariant domain: tau pairings,
    with nested star products by quadrature.
    """
    if domain == "HS":
        kl = _mstar(k, l)
        t1 = q_form(d, kl, m, wp, "HS", **kw)
        t2 = q_form(d, k, _mstar(m, TruncatedMatrix(_matrix_of(l).adjoint())), wp, "HS", **kw)
        t3 = q_form(d, l, _mstar(TruncatedMatrix(_matrix_of(k).adjoint()), m), wp, "HS", **kw)
    elif domain == "Invariant":
        kw2 = {kk: v for kk, v in kw.items() if kk in ("level_D", "level_F")}
        lev = kw2.get("level_D", quant.DEFAULT_LEVEL)
        ms = AdjointOf(m)
        t1 = quant.pair_traces(quant.star(k, l, wp, lev), ms, wp, [d], **kw2)[0]
        t2 = quant.pair_traces(k, quant.star(l, ms, wp, lev, center="w"), wp, [d], **kw2)[0]
        t3 = quant.pair_traces(l, quant.star(ms, k, wp, lev, center="w"), wp, [d], **kw2)[0]
    else:
        raise ValueError(domain)
    defect = t1 - t2 - t3
    return {"defect": defect, "terms": (t1, t2, t3)}


# ------------------------------------------------------------------ iQ_a constant


@dataclass(frozen=True)
class IQaReport:
    t: float
    constant: float
    imag_part: float
    residual: float
    err: float
    half_prediction: float
    full_prediction: float
    matches: str
    method: str = "series"

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _iqa_series(t: float, N: int, J: int) -> np.ndarray:
    """<i Q_a 1, E_nn> / <1, E_nn> for n < N by moment expansion.

    With a = (log(1 - u v^) - log(1 - u^ v)) / 2i and (1 - u v^)^{-t} expanded
    in powers of u v^, only |u|^2k |v|^2k monomials survive, whose weighted
    moments are pi k! Gamma(t-1) / Gamma(k+t). Off-diagonal E_pq vanish.
    """
    k = np.arange(N + J + 1)
    lb = gammaln(k + t) - gammaln(t) - gammaln(k + 1)
    lM = np.log(np.pi) + gammaln(k + 1) + gammaln(t - 1) - gammaln(k + t)
    out = np.empty(N)
    ii = np.arange(1, J)
    for n in range(N):
        i = np.arange(1, n + 1)
        inner = -np.sum(np.exp(lb[n - i] - lb[n]) / i)
        outer = -np.sum(np.exp(lb[n + ii] + 2 * lM[n + ii] - lb[n] - 2 * lM[n]) / ii)
        out[n] = (inner - outer) / 2
    return out


def _iqa_quadrature(t: float, N: int, level: int):
    tr = berg.BergmanTruncation(t, N)

    def run(nodes, wts):
        U = nodes[:, None]
        V = nodes[None, :]
        a = np.angle(1 - U * np.conj(V))
        wt = np.abs(1 - U * np.conj(V)) ** (-2 * t)
        # K^{-1} w_t = (1 - u v^)^t |1 - u v^|^{-2t} / chi
        Kinv = (1 - U * np.conj(V)) ** t / tr.chi
        E = tr.basis(nodes)
        F = a * wt * np.conj(Kinv) * wts[:, None] * wts[None, :]
        return 1j * tr.chi**2 * (np.conj(E).T @ F @ E)

    rule = quad.rule_for_weight(t, level)
    G = run(rule.nodes, rule.weights)
    return G, float(np.max(np.abs(G - run(rule.coarse_nodes, rule.coarse_weights))))


def iQa_identity_constant(
    wp: WeightParam, N: int = 6, method: str = "series", level: int = 8, J: int = 100_000
) -> IQaReport:
    """Fit <i Q_a 1, m> = c <1, m> over the matrix units m = E_pq (HS domain).

    a = Arg(1 - u conj v) on the disk. ``method="series"`` uses the exact
    moment expansion (tail err from doubling J); ``"quadrature"`` evaluates
    the double integral directly and converges slowly near the boundary
    diagonal. The residual is the relative Frobenius distance to c Id.
    """
    t = wp.t
    if not 2.5 <= t <= 10:
        raise ValueError("t outside the stable range [2.5, 10]")
    if method == "series":
        d = _iqa_series(t, N, J)
        err = float(np.max(np.abs(d - _iqa_series(t, N, 2 * J))))
        vals = np.diag(d).astype(np.complex128)
    elif method == "quadrature":
        vals, err = _iqa_quadrature(t, N, level)
    else:
        raise ValueError(f"unknown method {method!r}")
    c = complex(np.trace(vals) / N)
    residual = float(np.linalg.norm(vals - c * np.eye(N)) / max(np.linalg.norm(vals), 1e-300))
    half = 0.5 / (t - 1)
    full = 1.0 / (t - 1)
    cands = {"+half": half, "-half": -half, "+full": full, "-full": -full}
    best = min(cands, key=lambda k: abs(cands[k] - c.real))
    match = best if abs(cands[best] - c.real) <= 0.02 * abs(cands[best]) else "none"
    return IQaReport(t, c.real, c.imag, residual, err, -half, full, match, method)


# ------------------------------------------------------------------ coboundary of c0


PREDICTED = {"kappa": 12.0, "sigma": 1.0 / 12.0}


@dataclass
class CoboundaryFit:
    t: float
    lam: complex
    sigma_kappa: complex
    sigma: complex
    kappa: float
    residual: float
    rows: list = field(default_factory=list)

    def to_json(self) -> dict:
        c = lambda z: [complex(z).real, complex(z).imag]  # noqa: E731
        return {
            "t": self.t,
            "lambda": c(self.lam),
            "sigma_kappa": c(self.sigma_kappa),
            "sigma": c(self.sigma),
            "kappa": self.kappa,
            "lambda_over_chi_ratio": (complex(self.lam) * (self.t - 1)).real,
            "residual": self.residual,
            "rows": self.rows,
        }


def coboundary_rows(k, l, m, wp: WeightParam, level_D: int = 2, level_F: int = 2) -> dict:
    """Per-triple pairings: psi = tau(c0(k,l) m) and the three basis coboundaries.

    c0 is tested against delta(Z) with Z = lambda Id + i sigma M_{phi0},
    phi0 = kappa a_0 + arg Delta(z) - arg Delta(zeta); paired with m,
    delta(lambda Id)(k, l) = -lambda k*l, so
    psi = -lambda S + i sigma kappa A + i sigma B.
    """
    r = quant.c0_terms(k, l, m, wp, (ArgCrossTerm(), ArgDeltaDiff()), level_D=level_D, level_F=level_F)
    A, B = r["coboundaries"]
    return {"psi": r["value"], "S": r["tau_klm"], "A": A, "B": B}


def measure_kappa(n_gamma: int = 10, n_pairs: int = 20, seed: int = 7) -> tuple[float, float]:
    """Least-squares kappa making kappa a_0 + arg Delta(z) - arg Delta(zeta) diagonally invariant.

    Returns (kappa, relative residual).
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.5, 0.5, n_pairs) + 1j * rng.uniform(0.9, 1.8, n_pairs)
    w = rng.uniform(-0.5, 0.5, n_pairs) + 1j * rng.uniform(0.9, 1.8, n_pairs)
    a, b = ArgCrossTerm(), ArgDeltaDiff()
    da, db = [], []
    for _ in range(n_gamma):
        g = hyp.random_modular(rng, 3)
        da.append((a(g.act(z), g.act(w)) - a(z, w)).real)
        db.append((b(g.act(z), g.act(w)) - b(z, w)).real)
    da, db = np.concatenate(da), np.concatenate(db)
    kappa = -float(da @ db / (da @ da))
    return kappa, float(np.linalg.norm(kappa * da + db) / np.linalg.norm(db))


def fit_coboundary(rows: list[dict], t: float, kappa: float | None = None) -> CoboundaryFit:
    """Least squares for (lambda, sigma kappa, sigma) over the rows.

    Rows with psi = 0 only fix ratios, so with few rows pass ``kappa``
    (see measure_kappa) and fit (lambda, sigma) alone.
    """
    y = np.array([r["psi"].value for r in rows])
    S = np.array([r["S"].value for r in rows])
    A = np.array([r["A"].value for r in rows])
    B = np.array([r["B"].value for r in rows])
    if kappa is None:
        M = np.stack([-S, 1j * A, 1j * B], axis=1)
    else:
        M = np.stack([-S, 1j * (kappa * A + B)], axis=1)
    sol, *_ = np.linalg.lstsq(M, y, rcond=None)
    res = y - M @ sol
    scale = max(np.linalg.norm(y), np.max(np.abs(M), initial=0.0) * np.linalg.norm(sol), 1e-300)
    if kappa is None:
        lam, sk, sg = sol
        kappa = float((sk / sg).real) if abs(sg) > 0 else float("nan")
    else:
        lam, sg = sol
        sk = kappa * sg
    table = [
        {"psi": [r["psi"].value.real, r["psi"].value.imag], "psi_err": r["psi"].err, "residual": abs(e)}
        for r, e in zip(rows, res)
    ]
    return CoboundaryFit(t, lam, sk, sg, float(kappa), float(np.linalg.norm(res) / scale), table)


def coboundary_defect_c0(k, l, m, wp: WeightParam, constants: dict | None = None, **kw) -> FormValue:
    """tau((c0(k,l) - delta(Z)(k,l)) * m) for Z = lambda Id + i sigma M_{phi0}.

    Default constants are lambda = -chi'/(2 chi), kappa = 12, sigma = 1/12.
    """
    c = {"lambda": -wp.lambda_half, **PREDICTED, **(constants or {})}
    r = coboundary_rows(k, l, m, wp, **kw)
    model = r["S"].scale(-c["lambda"]) + r["A"].scale(1j * c["sigma"] * c["kappa"]) + r["B"].scale(1j * c["sigma"])
    return r["psi"] - model


def _row_defect(r: dict, lam: complex, sk: complex, sg: complex) -> tuple[float, float]:
    parts = (r["S"].scale(-lam), r["A"].scale(1j * sk), r["B"].scale(1j * sg))
    d = r["psi"] - parts[0] - parts[1] - parts[2]
    mag = max(abs(r["psi"].value), *(abs(p.value) for p in parts), 1e-300)
    return abs(d.value) / mag, d.err / mag


def coboundary_scan(triples, wp: WeightParam, level_D: int = 2, level_F: int = 2) -> dict:
    """Rows for each (k, l, m), the fitted constants and relative defects.

    kappa is measured from diagonal invariance of phi_0, then (lambda, sigma)
    are fitted over the rows.
    Defects are reported for the predicted constants (lambda = -chi'/2chi,
    kappa = 12, sigma = 1/12) and for the fit.
    """
    rows = [coboundary_rows(k, l, m, wp, level_D, level_F) for k, l, m in triples]
    kappa, kappa_res = measure_kappa()
    fit = fit_coboundary(rows, wp.t, kappa=kappa)
    pred = (-wp.lambda_half, PREDICTED["sigma"] * PREDICTED["kappa"], PREDICTED["sigma"])
    out = []
    for r in rows:
        dp, ep = _row_defect(r, *pred)
        df, _ = _row_defect(r, fit.lam, fit.sigma_kappa, fit.sigma)
        out.append({"predicted": dp, "fitted": df, "err": ep})
    return {"fit": fit, "kappa_invariance_residual": kappa_res, "rows": rows, "defects": out}


# ------------------------------------------------------------------ Alexander-Spanier forms


AS_BUDGET = 5_000_000


def alexander_spanier_form(theta: Callable, k: KernelFn, l: KernelFn, wp: WeightParam, z, w, level: int = 4):
    """c_Theta(k, l)(z, conj w) = chi int Theta(z, eta, w) k(z, conj eta) l(eta, conj w) [.]^t d nu_0*(eta).

    Returns (values, errs). Refuses when points x nodes exceed AS_BUDGET.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    w = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    n = len(quad.rule_for_weight(wp.t, level).nodes)
    if z.size * n > AS_BUDGET:
        raise BudgetExceeded(f"{z.size} points x {n} nodes exceeds {AS_BUDGET}")
    return quant.star_values(k, l, wp.t, z, w, level, extra=theta)


def theta_from_phi(phi: SymbolFn2, model: str = "D") -> Callable:
    """Theta(x, y, z) = phi(x, z) - phi(x, y) - phi(y, z)."""
    f = phi.on_disk if model == "D" else phi

    def th(x, y, z):
        return f(x, z) - f(x, y) - f(y, z)

    return th


def x_phi_coboundary(phi: SymbolFn2, k, l, wp: WeightParam, z, w, level: int = 4):
    """M_phi(k*l) - M_phi(k)*l - k*M_phi(l) at the points; the Alexander-Spanier
    form of theta_from_phi(phi) equals this."""
    model = quant._model_of(k, l)
    kl, e0 = quant.star_values(k, l, wp.t, z, w, level)
    d = phi.on_disk(z, w) if model == "D" else phi(z, w)
    a, e1 = quant.star_values(Multiplied(phi, k), l, wp.t, z, w, level)
    b, e2 = quant.star_values(k, Multiplied(phi, l), wp.t, z, w, level)
    return d * kl - a - b, np.abs(d) * e0 + e1 + e2


# ------------------------------------------------------------------ group 1-cocycle K


def argj_toeplitz(gamma: ModularMatrix, trunc: berg.BergmanTruncation, level: int = 8, pre: ModularMatrix | None = None):
    """Toeplitz matrix of u -> Arg j(gamma, pre . z(u)), z(u) the half-plane point of u."""

    def f(u):
        z = hyp.cayley_inv(u)
        if pre is not None:
            z = pre.act(z)
        return np.angle(gamma.j(z)).astype(np.complex128)

    return berg.toeplitz_matrix(f, trunc, level)


def one_cocycle_K(gamma: ModularMatrix, A: berg.OperatorMatrix, wp: WeightParam | None = None, trunc=None, level: int = 8):
    """K(gamma)(A) = -i [T_{arg j(gamma, .)}, A]."""
    trunc = trunc or A.trunc
    T = argj_toeplitz(gamma, trunc, level).entries
    return berg.OperatorMatrix(-1j * (T @ A.entries - A.entries @ T), trunc)


def _commutator(T, A):
    return -1j * (T @ A - A @ T)


def k_cocycle_check(g1: ModularMatrix, g2: ModularMatrix, A: berg.OperatorMatrix, level: int = 8) -> dict:
    """Residuals of the corrected identity K(g1 g2) = g2^{-1}.K(g1) + K(g2) and of the printed one
    K(g1 g2) = g1.K(g2) + K(g2).

    g.K(h) is the commutator with the Toeplitz matrix of Arg j(h, g z), the
    covariant transport of T_{Arg j(h, .)}; constants (from sign
    normalization) drop out of commutators.
    """
    tr = A.trunc
    lhs = _commutator(argj_toeplitz(g1 @ g2, tr, level).entries, A.entries)
    K2 = _commutator(argj_toeplitz(g2, tr, level).entries, A.entries)
    moved1 = _commutator(argj_toeplitz(g1, tr, level, pre=g2).entries, A.entries)
    moved2 = _commutator(argj_toeplitz(g2, tr, level, pre=g1).entries, A.entries)
    corrected = moved1 + K2
    printed = moved2 + K2
    # relative to the largest term: lhs vanishes when g1 g2 = +-1
    nrm = max(np.linalg.norm(x) for x in (lhs, K2, moved1, moved2, np.ones(1) * 1e-300))
    return {
        "corrected_residual": float(np.linalg.norm(lhs - corrected) / nrm),
        "printed_residual": float(np.linalg.norm(lhs - printed) / nrm),
        "norm": float(nrm),
    }


# ------------------------------------------------------------------ obstruction


@dataclass
class ObstructionReport:
    L: int
    t: float
    bounded_part_norm: float
    bounded_part_err: float
    theta_part_values: list
    identity_residual: float
    growth_trend: list
    cancellation: list
    mass_check: float

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "t": self.t,
            "bounded_part_norm": self.bounded_part_norm,
            "bounded_part_err": self.bounded_part_err,
            "theta_part_values": self.theta_part_values,
            "identity_residual": self.identity_residual,
            "growth_trend": self.growth_trend,
            "cancellation": self.cancellation,
            "mass_check": self.mass_check,
        }


RADIAL_DEGREE = 4
OBSTRUCTION_BUDGET = 400_000_000


def _translate_data(gammas, t: float, level: int):
    """For each gamma: W = int int_{F x F} w_t(z, g zeta), D_j = int int w_1^j w_t, and the bounded integrand."""
    rF = quant.f_rule(level)
    z = rF.nodes[:, None]
    wz = (rF.weights / rF.nodes.imag**2)[:, None]
    zeta0 = rF.nodes[None, :]
    wzeta = (rF.weights / rF.nodes.imag**2)[None, :]
    argz = modf.log_delta_anywhere(rF.nodes).imag[:, None]
    arg0 = np.angle(modf.delta_anywhere(rF.nodes))
    out = []
    for g in gammas:
        zeta = g.act(zeta0)
        w1 = hyp.w1(z, zeta).real
        wt = w1**t * wz * wzeta
        th = modf.theta_defect(g).theta if g.as_tuple() != (1, 0, 0, 1) else 0.0
        # Arg Delta(g zeta0) = Arg Delta(zeta0) + 12 Arg j(g, zeta0) mod 2 pi; the principal value is taken
        argg = np.angle(modf.delta_anywhere(zeta))
        a0 = np.angle(z - np.conj(zeta)) - math.pi / 2
        bounded = (argz - argg + th + a0) * wt
        D = [float(np.sum(w1**j * wt)) for j in range(RADIAL_DEGREE + 1)]
        out.append({"gamma": g, "theta": th, "W": D[0], "D": D, "bounded": float(np.sum(bounded)), "arg0": arg0})
    return out


def obstruction_report(
    d: SymbolFn2 | None = None, wp: WeightParam | None = None, L: int = 4, level: int = 2, radii=None
) -> ObstructionReport:
    """Split the phi_0 form at k = l = 1 into a bounded part and the theta part.

    Translates g F of F (word length <= L in S, T) carry the piecewise
    constant jump theta_g between the global and principal arg Delta. The
    theta part -sum_g theta_g W_g chi / ha is compared with the best
    cancellation by an invariant radial symbol (degree <= 4 in w_1, fitted
    by least squares over the translate-indexed vector); the residual is
    recorded for each radius in ``radii``.
    """
    wp = wp or WeightParam(30.0)
    t = wp.t
    if d is not None and not (d.diag_invariant or d.gg_invariant):
        raise FlagMismatch("cancellation symbol must carry an invariance flag")
    radii = sorted(set(radii or [L]) | {L})
    ball = modf.word_ball(max(radii))
    elems = sorted(ball.items(), key=lambda kv: (kv[1], kv[0]))
    n_f = len(quant.f_rule(level).nodes)
    if len(elems) * n_f * n_f > OBSTRUCTION_BUDGET:
        raise BudgetExceeded(f"{len(elems)} translates at level {level} exceed the node budget")
    gammas = [ModularMatrix(*m) for m, _ in elems]
    lengths = np.array([ln for _, ln in elems])
    data = _translate_data(gammas, t, level)
    scale = quant.chi(t) / quant.HA_F
    theta = np.array([x["theta"] for x in data])
    W = np.array([x["W"] for x in data])
    Dm = np.array([x["D"] for x in data])
    bounded = np.array([x["bounded"] for x in data])
    trend, canc = [], []
    for r in radii:
        sel = lengths <= r
        target = theta[sel] * W[sel] * scale
        basis = Dm[sel] * scale
        if d is None:
            res = float(np.linalg.norm(target))
            coef = [0.0] * basis.shape[1]
        else:
            coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
            res = float(np.linalg.norm(target - basis @ coef))
            coef = [float(c) for c in coef]
        trend.append({"L": r, "residual": res, "translates": int(sel.sum()), "theta_part": float(-np.sum(target))})
        canc.append({"L": r, "coeffs": coef})
    sel = lengths <= L
    bp = float(np.sum(bounded[sel]) * scale / 4)
    finer = _translate_data([g for g, s in zip(gammas, sel) if s], t, level + 1)
    bp_fine = float(sum(x["bounded"] for x in finer) * scale / 4)
    mass = float(np.sum(W[sel]) * scale / 4)
    tv = [
        {"gamma": str(g), "word_length": int(ln), "theta": float(th), "contribution": float(-th * w * scale / 4)}
        for g, ln, th, w, s in zip(gammas, lengths, theta, W, sel)
        if s
    ]
    return ObstructionReport(
        L=L,
        t=t,
        bounded_part_norm=abs(bp_fine),
        bounded_part_err=abs(bp_fine - bp),
        theta_part_values=tv,
        identity_residual=next(x["residual"] for x in trend if x["L"] == L),
        growth_trend=trend,
        cancellation=canc,
        mass_check=mass,
    )


# ------------------------------------------------------------------ Gamma x Gamma check


def gamma_invariance_check(d: SymbolFn2, gamma: ModularMatrix, samples: int = 20, N: int = 8, t: float = 4.0, seed: int = 5):
    """Symbol defect max |d(z, g zeta) - d(z, zeta)| and the matrix defect at truncation N.

    The matrix defect compares the Toeplitz matrices (disk model) of
    d(z(u), g z(v)) and d(z(u), z(v)) restricted to the diagonal u = v
    block, i.e. the Toeplitz matrices of u -> d(z, g z) and u -> d(z, z).
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.5, 0.5, samples) + 1j * rng.uniform(0.9, 1.8, samples)
    w = rng.uniform(-0.5, 0.5, samples) + 1j * rng.uniform(0.9, 1.8, samples)
    sym = float(np.max(np.abs(d(z, gamma.act(w)) - d(z, w))))
    tr = berg.BergmanTruncation(t, N)

    def diag_f(pre):
        def f(u):
            x = hyp.cayley_inv(u)
            y = pre.act(x) if pre is not None else x
            return d(x, y)

        return f

    T1 = berg.toeplitz_matrix(diag_f(gamma), tr).entries
    T0 = berg.toeplitz_matrix(diag_f(None), tr).entries
    mat = float(np.max(np.abs(T1 - T0)))
    return {"symbol_defect": sym, "matrix_defect": mat, "gamma": str(gamma)}


# ------------------------------------------------------------------ spec parsing


def _sep_function(name: str) -> Callable:
    table = {
        "re": lambda u: u.real,
        "abs2": lambda u: np.abs(u) ** 2,
        "cos_re": lambda u: np.cos(u.real),
        "im_sq": lambda u: u.imag**2,
    }
    if name not in table:
        raise ValueError(f"unknown separated function {name!r}")
    return table[name]


def symbol_from_spec(spec: dict) -> SymbolFn2:
    kind = spec["type"]
    if kind == "Zero":
        return ZeroSymbol()
    if kind == "Constant":
        c = spec.get("c", 1.0)
        return ConstantSymbol(complex(*c) if isinstance(c, list) else complex(c))
    if kind == "ArgCrossTerm":
        return ArgCrossTerm(bool(spec.get("centered", True)))
    if kind == "ArgDeltaDiff":
        return ArgDeltaDiff()
    if kind == "Arg0DeltaDiff":
        return Arg0DeltaDiff()
    if kind == "InvariantRadial":
        return InvariantRadial(tuple(spec.get("coeffs", [1.0])), float(spec.get("power", 0.0)))
    if kind == "Separated":
        name = spec.get("name", "re")
        return Separated(_sep_function(name), "D", name)
    if kind == "Phi0":
        return phi0_symbol(float(spec.get("kappa", 12.0)))
    if kind == "Sum":
        return SymSum(symbol_from_spec(spec["a"]), symbol_from_spec(spec["b"]))
    if kind == "Scale":
        c = spec.get("c", 1.0)
        return SymScale(complex(*c) if isinstance(c, list) else complex(c), symbol_from_spec(spec["d"]))
    if kind == "ConjSwap":
        return ConjSwap(symbol_from_spec(spec["d"]))
    raise ValueError(f"unknown symbol type {kind!r}")
