"""Batch driver: ``berezinlab <subcommand> [--scenario FILE] [--out FILE] ...``.

Exit codes: 0 all checks pass, 1 some check failed, 2 scenario rejected,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import traceback
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, berg, forms, hyp, kernels, modf, quad, quant

SUBCOMMANDS = ("star", "cocycle", "trace", "cpmap", "qform", "coboundary", "obstruction", "kcocycle", "euler", "iqa")

CONVENTIONS = {
    "weight": "w_t = (4 Im z Im zeta / |z - conj zeta|^2)^t, chi_t = (t - 1)/pi",
    "trace": "tau(k) = (chi_t / (pi/3)) int_F int_H k w_t, <1, 1> = 1",
    "hs_normalization": "chi_t^2 int int k_A conj(k_B) w_t = Tr(A B*)",
    "kappa": forms.PREDICTED["kappa"],
    "sigma": forms.PREDICTED["sigma"],
    "lambda": "-chi'_t / (2 chi_t)",
    "iQa_constant": "+chi'_t / (2 chi_t)",
    "cross_term": "a_0 = Arg(z - conj zeta) - pi/2",
    "theta_relation": list(modf.THETA_RELATION),
    "phi_multiplier": "exp(eps (log phi - chi'_t/chi_t))",
    "cocycle_log_branch": "log of the invariant four-point weight, real on the diagonal",
}

NUMERICAL_ERRORS = (
    FloatingPointError,
    ArithmeticError,
    np.linalg.LinAlgError,
    quad.IntegrandError,
    modf.TruncationError,
    hyp.ReductionError,
    forms.BudgetExceeded,
)

DEFAULTS = {"t": 4.0, "level": quant.DEFAULT_LEVEL, "N": 8, "radius": 8}


class ScenarioError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("berezinlab").joinpath("schema/scenario.json").read_text())


def validate(scenario: dict) -> None:
    try:
        jsonschema.validate(scenario, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {exc.message}") from None


# ------------------------------------------------------------------ helpers


def _cx(v) -> complex:
    return complex(*v) if isinstance(v, list) else complex(v)


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _fv(f: quad.FormValue) -> dict:
    return {"value": _pair(f.value), "err": float(f.err)}


def _kernel(sc: dict, key: str, default=None) -> kernels.KernelFn:
    spec = sc.get(key, default)
    if spec is None:
        raise ScenarioError(f"missing kernel {key!r}")
    return kernels.from_spec(spec, sc["t"])


def _points(sc: dict, model: str):
    pts = sc.get("points")
    if not pts:
        pts = [[[0.1, 0.2], [-0.3, 0.1]], [[0.25, -0.1], [0.2, 0.3]]] if model == "D" else [[[0.2, 1.1], [-0.1, 0.9]], [[0.3, 1.4], [0.1, 1.2]]]
    z = np.array([_cx(p[0]) for p in pts])
    w = np.array([_cx(p[1]) for p in pts])
    return z, w


class Report:
    def __init__(self, subcommand: str):
        self.subcommand = subcommand
        self.results: dict = {}
        self.checks: list[dict] = []
        self.table: list[dict] = []

    def check(self, name: str, value: float, tol: float, passed: bool | None = None, **extra):
        ok = bool(value <= tol) if passed is None else bool(passed)
        self.checks.append({"name": name, "value": float(value), "tolerance": float(tol), "pass": ok, **extra})

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self, scenario: dict) -> dict:
        return {
            "berezinlab_version": __version__,
            "subcommand": self.subcommand,
            "scenario": scenario,
            "results": self.results,
            "checks": self.checks,
            "status": "pass" if self.ok else "fail",
            "conventions": CONVENTIONS,
        }


def _tol(sc: dict, name: str, default: float) -> float:
    return float(sc.get("tolerances", {}).get(name, default))


# ------------------------------------------------------------------ subcommands


def run_star(sc: dict, rep: Report) -> None:
    k = _kernel(sc, "k", {"type": "Constant"})
    l = _kernel(sc, "l", {"type": "Constant"})
    model = quant._model_of(k, l)
    z, w = _points(sc, model)
    vals, errs = quant.star_values(k, l, sc["t"], z, w, sc["level"])
    if isinstance(k, kernels.TruncatedMatrix) and isinstance(l, kernels.TruncatedMatrix):
        ref, label = berg.covariant_symbol(k.A @ l.A, z, w), "matrix_product_symbol"
    elif isinstance(k, kernels.Constant):
        ref, label = complex(k.c) * l.on(model, z, w), "unit_reproduction"
    elif isinstance(l, kernels.Constant):
        ref, label = complex(l.c) * k.on(model, z, w), "unit_reproduction"
    else:
        ref, label = None, None
    for zi, wi, v, e in zip(z, w, vals, errs):
        rep.table.append({"z": str(zi), "w": str(wi), "re": v.real, "im": v.imag, "err": e})
    rep.results["values"] = [{"z": _pair(a), "w": _pair(b), "value": _pair(v), "err": float(e)} for a, b, v, e in zip(z, w, vals, errs)]
    if ref is not None:
        ref = np.broadcast_to(ref, vals.shape)
        rel = np.abs(vals - ref) / np.maximum(np.abs(ref), 1e-300)
        rep.results["oracle"] = label
        rep.check(label, float(np.max(rel)), _tol(sc, "star", 1e-6))


def run_cocycle(sc: dict, rep: Report) -> None:
    k = _kernel(sc, "k", {"type": "Constant"})
    l = _kernel(sc, "l", {"type": "Constant"})
    z, w = _points(sc, quant._model_of(k, l))
    wp = quant.WeightParam(sc["t"])
    lq = quant.cocycle_ct(k, l, wp, z, w, "LogQuadrature", sc["level"])
    fd = quant.cocycle_ct(k, l, wp, z, w, "FiniteDifference", sc["level"])
    worst = 0.0
    for zi, wi, a, b in zip(z, w, lq, fd):
        rep.table.append({"z": str(zi), "w": str(wi), "log_quadrature": str(a.value), "finite_difference": str(b.value), "err": a.err + b.err})
        scale = max(abs(a.value), abs(b.value))
        gap = abs(a.value - b.value)
        if scale <= a.err + b.err:
            # zero within err (e.g. c(1, 1)): compare with the err instead
            worst = max(worst, 0.0 if abs(a.value) <= a.err else 1.0)
        else:
            worst = max(worst, gap / scale)
    rep.results["log_quadrature"] = [_fv(x) for x in lq]
    rep.results["finite_difference"] = [_fv(x) for x in fd]
    rep.check("log_quadrature_vs_fd", worst, _tol(sc, "cocycle", 1e-4))


def run_trace(sc: dict, rep: Report) -> None:
    wp = quant.WeightParam(sc["t"])
    k = _kernel(sc, "k", {"type": "Constant"})
    l = _kernel(sc, "l", {"type": "Constant"})
    ip = quant.inner_product(k, l, wp)
    tr = quant.pair_trace(k, kernels.AdjointOf(l), wp)
    rep.results["inner_product"] = _fv(ip)
    rep.results["tau_k_star_lstar"] = _fv(tr)
    gap = abs(ip.value - tr.value)
    rep.check("convention_pin", gap, ip.err + tr.err + _tol(sc, "trace", 1e-12))


def run_cpmap(sc: dict, rep: Report) -> None:
    t = sc["t"]
    kind = sc.get("kind", "Phi")
    eps = [float(e) for e in sc.get("eps", [0.25, 0.5])]
    if len(eps) < 2:
        eps = eps * 2
    e1, e2 = eps[0], eps[1]
    make = {"Phi": lambda e, s: quant.Phi(e, s), "Beta": lambda e, s: quant.Beta(e, s), "Theta": lambda e, s: quant.Theta(e)}[kind]
    shift = 12 * e1 if kind == "Beta" else 0.0
    composed = make(e1, t).then(make(e2, t + shift))
    direct = make(e1 + e2, t)
    z, w = _points(sc, "H")
    lhs, rhs = composed.log_value(z, w), direct.log_value(z, w)
    exact = composed == direct and bool(np.array_equal(lhs, rhs))
    rep.results["composed"] = dict(composed.__dict__)
    rep.results["direct"] = dict(direct.__dict__)
    rep.results["max_log_gap"] = float(np.max(np.abs(lhs - rhs)))
    rep.check("semigroup_bit_exact", 0.0 if exact else 1.0, 0.0, passed=exact)


def run_qform(sc: dict, rep: Report) -> None:
    wp = quant.WeightParam(sc["t"])
    d = forms.symbol_from_spec(sc.get("symbol", {"type": "Constant"}))
    domain = sc.get("domain", "HS")
    if domain == "HS":
        tr = berg.BergmanTruncation(sc["t"], sc["N"])
        rng = np.random.default_rng(sc.get("seed", 0))
        k = _kernel(sc, "k") if "k" in sc else kernels.TruncatedMatrix(berg.random_operator(tr, rng))
        l = _kernel(sc, "l") if "l" in sc else kernels.TruncatedMatrix(berg.random_operator(tr, rng))
        q = forms.q_form(d, k, l, wp, "HS", level=sc["level"])
        adj = forms.q_form(d.conj_swap(), l, k, wp, "HS", level=sc["level"])
    else:
        k = _kernel(sc, "k", {"type": "Constant"})
        l = _kernel(sc, "l", {"type": "Constant"})
        kw = {"level_F": sc.get("level_F", quant.F_LEVEL), "level_D": sc["level"]}
        q = forms.q_form(d, k, l, wp, "Invariant", **kw)
        adj = forms.q_form(d.conj_swap(), l, k, wp, "Invariant", **kw)
    rep.results["q_form"] = _fv(q)
    rep.results["adjoint_q_form"] = _fv(adj)
    gap = abs(q.value - np.conj(adj.value))
    rep.check("adjoint_law", gap, q.err + adj.err + _tol(sc, "qform", 1e-12))


def _default_triples():
    one = {"type": "Constant"}
    p1 = {"type": "InvariantPower", "m": 1}
    return [[p1, p1, one], [one, p1, p1], [p1, p1, p1]]


def run_coboundary(sc: dict, rep: Report) -> None:
    t = sc["t"]
    wp = quant.WeightParam(t)
    triples = [[kernels.from_spec(s, t) for s in tri] for tri in sc.get("triples", _default_triples())]
    scan = forms.coboundary_scan(triples, wp, level_D=min(sc["level"], 3), level_F=sc.get("level_F", quant.F_LEVEL))
    fit = scan["fit"]
    rep.results["fit"] = fit.to_json()
    rep.results["kappa_invariance_residual"] = scan["kappa_invariance_residual"]
    rows = []
    for r, d in zip(scan["rows"], scan["defects"]):
        row = {key: _fv(r[key]) for key in ("psi", "S", "A", "B")}
        row.update(d)
        rows.append(row)
        rep.table.append({"psi": r["psi"].value.real, "S": r["S"].value.real, "A": r["A"].value.imag, "B": r["B"].value.imag, **d})
    rep.results["rows"] = rows
    tol = _tol(sc, "coboundary", 1e-4)
    rep.check("defect_predicted_constants", max(d["predicted"] for d in scan["defects"]), tol)
    rep.check("fit_residual", fit.residual, tol)


def run_obstruction(sc: dict, rep: Report) -> None:
    L = sc["radius"]
    radii = sc.get("radii") or sorted({r for r in (2, 4, 6, 8) if r <= L} | {L})
    d = forms.symbol_from_spec(sc.get("symbol", {"type": "InvariantRadial", "coeffs": [0, 1, 0, 0, 0]}))
    wp = quant.WeightParam(sc["t"])
    r = forms.obstruction_report(d, wp, L=L, level=min(sc["level"], 3), radii=radii)
    rep.results["report"] = r.to_json()
    rep.table.extend(r.growth_trend)
    res = [x["residual"] for x in r.growth_trend]
    mono = all(b >= a for a, b in zip(res, res[1:]))
    rep.check("residual_nondecreasing", 0.0 if mono else 1.0, 0.0, passed=mono)
    rep.check("bounded_part_refinement", r.bounded_part_err, _tol(sc, "bounded", 1e-6))


def run_kcocycle(sc: dict, rep: Report) -> None:
    g1 = hyp.ModularMatrix(*sc.get("g1", [0, -1, 1, 0]))
    g2 = hyp.ModularMatrix(*sc.get("g2", [1, 1, 0, 1]))
    tr = berg.BergmanTruncation(sc["t"], sc["N"])
    A = berg.random_operator(tr, np.random.default_rng(sc.get("seed", 0)))
    r = forms.k_cocycle_check(g1, g2, A, level=max(sc["level"], 6))
    rep.results.update(r)
    rep.check("corrected_identity", r["corrected_residual"], _tol(sc, "kcocycle", 1e-6))


def run_euler(sc: dict, rep: Report) -> None:
    R = sc["radius"]
    radii = sc.get("radii") or [r for r in range(4, R + 1, 4)] or [R]
    reps = [modf.euler_report(r, sc.get("n_pairs", 10_000), sc.get("seed", 0)) for r in radii]
    rep.results["reports"] = [r.to_json() for r in reps]
    for r in reps:
        rep.table.append({"L": r.scan_radius, "max_phi": r.max_phi, "max_defect": r.max_defect, "ball_size": r.ball_size})
    support = set().union(*(r.defect_histogram for r in reps))
    ok = support <= {-3, 0, 3}
    rep.check("defect_support", 0.0 if ok else 1.0, 0.0, passed=ok, support=sorted(support))
    phis = [r.max_phi for r in reps]
    grow = all(b > a for a, b in zip(phis, phis[1:]))
    rep.check("max_phi_increasing", 0.0 if grow else 1.0, 0.0, passed=grow)


def run_iqa(sc: dict, rep: Report) -> None:
    r = forms.iQa_identity_constant(quant.WeightParam(sc["t"]), N=min(sc["N"], 32))
    rep.results.update(r.to_json())
    rep.check("fit_residual", r.residual, _tol(sc, "iqa", 1e-4))


RUNNERS = {
    "star": run_star,
    "cocycle": run_cocycle,
    "trace": run_trace,
    "cpmap": run_cpmap,
    "qform": run_qform,
    "coboundary": run_coboundary,
    "obstruction": run_obstruction,
    "kcocycle": run_kcocycle,
    "euler": run_euler,
    "iqa": run_iqa,
}


# ------------------------------------------------------------------ output


def _json_default(o):
    if isinstance(o, complex | np.complexfloating):
        return _pair(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _clean(o):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, list | tuple):
        return [_clean(v) for v in o]
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def write_csv(path: Path, rows: list[dict]) -> None:
    cols: list[str] = []
    for r in rows:
        cols.extend(c for c in r if c not in cols)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _json_default(v) if not isinstance(v, str | int | float) else v for c, v in r.items()})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="berezinlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS)
    p.add_argument("--scenario", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--level", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--radius", type=int)
    return p


def assemble(args) -> dict:
    sc: dict = {}
    if args.scenario is not None:
        try:
            sc = json.loads(args.scenario.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
        if not isinstance(sc, dict):
            raise ScenarioError("scenario must be a JSON object")
    if args.subcommand:
        if sc.get("subcommand", args.subcommand) != args.subcommand:
            raise ScenarioError("subcommand on the command line differs from the scenario")
        sc["subcommand"] = args.subcommand
    for key in ("t", "level", "N", "radius"):
        v = getattr(args, key)
        if v is not None:
            sc[key] = v
    validate(sc)
    return sc


def run(sc: dict) -> tuple[int, dict, Report]:
    full = {**DEFAULTS, **sc}
    if sc["subcommand"] == "coboundary" and "t" not in sc:
        full["t"] = 30.0
    rep = Report(sc["subcommand"])
    RUNNERS[sc["subcommand"]](full, rep)
    return (0 if rep.ok else 1), _clean(json.loads(json.dumps(rep.to_json(sc), default=_json_default))), rep


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = assemble(args)
    except ScenarioError as exc:
        print(f"scenario rejected: {exc}", file=sys.stderr)
        return 2
    try:
        code, report, rep = run(sc)
    except NUMERICAL_ERRORS as exc:
        tb = traceback.extract_tb(exc.__traceback__)[-1]
        print(f"numerical failure in {sc['subcommand']}: {exc} ({Path(tb.filename).name}:{tb.lineno})", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as exc:
        print(f"scenario rejected: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out = args.out or (Path(sc["output"]) if "output" in sc else None)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        if rep.table:
            write_csv(out.with_suffix(".csv"), rep.table)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
