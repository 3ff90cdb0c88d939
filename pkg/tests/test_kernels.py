import json

import numpy as np
import pytest

from berezinlab import berg, hyp, kernels as K, quant as Q


def _hpoints(rng, n):
    return rng.uniform(-0.5, 0.5, n) + 1j * rng.uniform(0.9, 1.6, n)


def test_adjoint_law(rng):
    tr = berg.BergmanTruncation(4.0, 5)
    k = K.TruncatedMatrix(berg.random_operator(tr, rng))
    z = 0.5 * np.exp(1j * rng.uniform(0, 6, 6))
    w = 0.3 * np.exp(1j * rng.uniform(0, 6, 6))
    assert np.allclose(k.adjoint()(z, w), np.conj(k(w, z)), rtol=0, atol=1e-14)
    assert k.adjoint().adjoint() is k
    A = berg.OperatorMatrix(k.A.entries.conj().T, tr)
    assert np.max(np.abs(K.TruncatedMatrix(A)(z, w) - k.adjoint()(z, w))) < 1e-13


@pytest.mark.parametrize("m", [1, 2])
def test_invariant_power_invariance(m):
    assert Q.spot_check_invariance(K.InvariantPower(m), n=10) < 1e-8


def test_invariant_power_rejects_zero():
    with pytest.raises(ValueError):
        K.InvariantPower(0)


def test_combinators(rng):
    z, w = _hpoints(rng, 5), _hpoints(rng, 5)
    p = K.InvariantPower(1)
    s = 2 * p + 3
    assert np.allclose(s(z, w), 2 * p(z, w) + 3)
    assert np.allclose((p - p)(z, w), 0)
    assert s.invariant
    with pytest.raises(TypeError):
        p * p


def test_sum_rejects_mixed_models(rng):
    tr = berg.BergmanTruncation(4.0, 3)
    with pytest.raises(ValueError):
        K.InvariantPower(1) + K.TruncatedMatrix(berg.random_operator(tr, rng))


def test_model_transport(rng):
    tr = berg.BergmanTruncation(4.0, 4)
    k = K.TruncatedMatrix(berg.random_operator(tr, rng))
    z, w = _hpoints(rng, 4), _hpoints(rng, 4)
    assert np.allclose(k.on("H", z, w), k(hyp.cayley(z), hyp.cayley(w)))


def test_coherent_rank_one(rng):
    tr = berg.BergmanTruncation(4.0, 4)
    v1, v2 = rng.normal(size=4), rng.normal(size=4) + 1j
    k = K.CoherentRankOne(v1, v2, tr)
    assert np.linalg.matrix_rank(k.A.entries) == 1


def test_group_average():
    seed = K.InvariantPower(1)
    g = K.GroupAveraged(seed, 1)
    z, w = np.array([0.1 + 1.2j]), np.array([-0.2 + 1.1j])
    assert np.allclose(g(z, w), len(g.elements) * seed(z, w))
    with pytest.raises(ValueError):
        K.GroupAveraged(K.PoincareSeed(2), 3)


def test_group_average_defect_shrinks():
    d5 = Q.invariance_defect(K.GroupAveraged(K.PoincareSeed(12), 5))
    d10 = Q.invariance_defect(K.GroupAveraged(K.PoincareSeed(12), 10))
    assert d10 < d5


def test_ball_by_entries_unimodular():
    for g in K.ball_by_entries(3):
        assert g.a * g.d - g.b * g.c == 1
        assert max(abs(g.a), abs(g.b), abs(g.c), abs(g.d)) <= 3


def test_spec_round_trip(rng):
    tr = berg.BergmanTruncation(4.0, 3)
    k = K.Scale(2 - 1j, K.Sum(K.TruncatedMatrix(berg.random_operator(tr, rng)), K.Constant(0.5))).adjoint()
    spec = json.loads(json.dumps(k.spec()))
    k2 = K.from_spec(spec)
    z, w = np.array([0.1, 0.3j]), np.array([-0.2j, 0.4])
    assert np.allclose(k(z, w), k2(z, w), atol=1e-14)
    with pytest.raises(ValueError):
        K.from_spec({"type": "Nope"})


def test_multiplier_merge():
    a = K.Multiplier(phi_eps=0.25, phi_t=4.0)
    b = K.Multiplier(phi_eps=0.5, phi_t=4.0)
    assert a.then(b) == K.Multiplier(phi_eps=0.75, phi_t=4.0)
    assert a.then(K.Multiplier(phi_eps=0.5, phi_t=5.0)) is None
    k = K.multiply(K.multiply(K.Constant(1.0), a), b)
    assert isinstance(k, K.MultiplierProduct) and k.mult.phi_eps == 0.75
