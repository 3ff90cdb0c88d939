import numpy as np
import pytest

from berezinlab import berg, forms as F, kernels as K, quant as Q
from berezinlab.modf import ModularMatrix

S = ModularMatrix(0, -1, 1, 0)
T = ModularMatrix(1, 1, 0, 1)


def _disk(rng, n, r=0.4):
    return r * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))


def _mat(rng, t=4.0, N=4):
    return K.TruncatedMatrix(berg.random_operator(berg.BergmanTruncation(t, N), rng))


def test_q_form_zero_and_flags(rng):
    wp = Q.WeightParam(4.0)
    k = _mat(rng)
    assert F.q_form(F.ZeroSymbol(), k, k, wp).value == 0
    with pytest.raises(F.FlagMismatch):
        F.q_form(F.Separated(lambda u: u.real), K.Constant(1.0), K.Constant(1.0), wp, "Invariant")
    with pytest.raises(ValueError):
        F.q_form(F.ConstantSymbol(1.0), k, k, wp, "Nowhere")


def test_q_form_unit_symbol_is_hs_pairing(rng):
    wp = Q.WeightParam(4.0)
    tr = berg.BergmanTruncation(4.0, 4)
    A, B = berg.random_operator(tr, rng), berg.random_operator(tr, rng)
    got = F.q_form(F.ConstantSymbol(1.0), K.TruncatedMatrix(A), K.TruncatedMatrix(B), wp, "HS", level=6)
    ref = np.trace(A.entries @ B.entries.conj().T)
    assert abs(got.value - ref) <= max(10 * got.err, 1e-10 * abs(ref))


def test_q_form_hermitian_symmetry(rng):
    wp = Q.WeightParam(4.0)
    k, l = _mat(rng), _mat(rng)
    d = F.Separated(lambda u: np.abs(u) ** 2)
    a = F.q_form(d, k, l, wp, "HS", level=5).value
    b = F.q_form(d, l, k, wp, "HS", level=5).value
    c = F.q_form(d.conj_swap(), k, l, wp, "HS", level=5).value
    assert abs(a - np.conj(b)) < 1e-10 * max(1, abs(a))
    assert abs(a + c) < 1e-10 * max(1, abs(a))


def test_leibniz_separated_vs_radial(rng):
    wp = Q.WeightParam(4.0)
    k, l, m = _mat(rng), _mat(rng), _mat(rng)
    sep = F.derivation_defect(F.Separated(lambda u: np.cos(u.real)), k, l, m, wp, "HS", level=4)
    rad = F.derivation_defect(F.InvariantRadial((0.0, 1.0)), k, l, m, wp, "HS", level=4)
    assert abs(sep["defect"].value) < 1e-9
    assert abs(rad["defect"].value) > 1e-3


def test_iqa_series_and_quadrature_agree():
    wp = Q.WeightParam(4.0)
    s = F.iQa_identity_constant(wp, N=4)
    assert s.matches == "+half"
    assert s.residual < 1e-9
    q = F.iQa_identity_constant(wp, N=3, method="quadrature", level=5)
    assert abs(q.constant - s.constant) < 0.05 * abs(s.constant)
    with pytest.raises(ValueError):
        F.iQa_identity_constant(Q.WeightParam(30.0))


def test_k_cocycle_corrected_identity(rng):
    A = berg.random_operator(berg.BergmanTruncation(4.0, 4), rng)
    rep = F.k_cocycle_check(ModularMatrix(1, 1, 1, 2), ModularMatrix(2, 1, 1, 1), A, level=6)
    assert rep["corrected_residual"] < 1e-10
    trivial = F.k_cocycle_check(S, T, A, level=6)
    assert trivial["corrected_residual"] < 1e-10


def test_phi0_flags():
    rep = F.measure_flags(F.phi0_symbol(12.0))
    assert rep.diag_defect < 1e-9
    assert F.measure_flags(F.phi0_symbol(11.0)).diag_defect > 1e-3
    F.verify_flags(F.InvariantRadial((1.0, 2.0)))


def test_gamma_invariance_check():
    const = F.gamma_invariance_check(F.ConstantSymbol(2.0), T, N=4)
    assert const["symbol_defect"] == 0 and const["matrix_defect"] < 1e-12
    rad = F.gamma_invariance_check(F.InvariantRadial((0.0, 1.0)), S, N=4)
    assert rad["symbol_defect"] > 1e-3


def test_alexander_spanier_matches_coboundary(rng):
    wp = Q.WeightParam(4.0)
    k, l = _mat(rng), _mat(rng)
    phi = F.Separated(lambda u: np.abs(u) ** 2) + F.InvariantRadial((0.0, 1.0))
    z, w = _disk(rng, 3), _disk(rng, 3)
    a, ea = F.alexander_spanier_form(F.theta_from_phi(phi), k, l, wp, z, w, level=5)
    b, eb = F.x_phi_coboundary(phi, k, l, wp, z, w, level=5)
    assert np.max(np.abs(a + b)) < 1e-9 or np.max(np.abs(a - b)) < 1e-9
    zero, _ = F.alexander_spanier_form(lambda x, y, s: 0 * x * y * s, k, l, wp, z, w, level=3)
    assert not np.any(zero)


def test_alexander_spanier_budget(rng):
    k = _mat(rng)
    z = np.zeros(F.AS_BUDGET)
    with pytest.raises(F.BudgetExceeded):
        F.alexander_spanier_form(lambda x, y, s: 0 * x, k, k, Q.WeightParam(4.0), z, z, level=4)


def test_obstruction_without_symbol():
    rep = F.obstruction_report(None, L=2, level=2)
    assert rep.identity_residual > 0
    assert rep.bounded_part_norm < 1e-8
    assert [x["L"] for x in rep.growth_trend] == [2]


def test_obstruction_rejects_unflagged():
    with pytest.raises(F.FlagMismatch):
        F.obstruction_report(F.Separated(lambda u: u.real), L=2)


def test_symbol_from_spec():
    d = F.symbol_from_spec({"type": "Sum", "a": {"type": "Phi0"}, "b": {"type": "Zero"}})
    z, w = np.array([0.1 + 1.2j]), np.array([0.3 + 1.0j])
    assert np.allclose(d(z, w), F.phi0_symbol()(z, w))
    with pytest.raises(ValueError):
        F.symbol_from_spec({"type": "Bogus"})
