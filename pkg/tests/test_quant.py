import math

import numpy as np
import pytest

from berezinlab import berg, kernels as K, quant as Q, series


def _disk(rng, n, r=0.5):
    return r * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))


def test_weight_param():
    wp = Q.WeightParam(4.0)
    assert wp.chi == pytest.approx(3 / math.pi)
    assert wp.chi_prime_over_chi == pytest.approx(1 / 3)
    assert wp.lambda_half == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        Q.WeightParam(1.0)


def test_unit_is_exact(rng):
    wp = Q.WeightParam(4.0)
    k = K.TruncatedMatrix(berg.random_operator(berg.BergmanTruncation(4.0, 4), rng))
    assert Q.star(K.Constant(1.0), k, wp) is k
    assert Q.star(k, K.Constant(1.0), wp) is k
    assert isinstance(Q.cocycle(K.Constant(2.0), k, wp), K.Constant)


def test_unit_by_quadrature(rng):
    k = K.TruncatedMatrix(berg.random_operator(berg.BergmanTruncation(4.0, 5), rng))
    z, w = _disk(rng, 4), _disk(rng, 4)
    v, e = Q.star_values(K.Constant(1.0), k, 4.0, z, w, level=7)
    assert np.max(np.abs(v - k(z, w))) < 1e-8


def test_cocycle_matches_series(rng):
    t = 4.0
    tr = berg.BergmanTruncation(t, 6)
    A, B = berg.random_operator(tr, rng), berg.random_operator(tr, rng)
    alg = series.SeriesAlgebra(t, 80)
    z, w = _disk(rng, 3, 0.4), _disk(rng, 3, 0.4)
    exact = alg.evaluate(alg.cocycle(alg.from_matrix(A), alg.from_matrix(B)), z, w)
    v, e = Q.cocycle_values(K.TruncatedMatrix(A), K.TruncatedMatrix(B), t, z, w, level=8)
    assert np.max(np.abs(v - exact) / np.abs(exact)) < 1e-6


def test_series_star_is_matrix_product(rng):
    t = 5.0
    tr = berg.BergmanTruncation(t, 6)
    A, B = berg.random_operator(tr, rng), berg.random_operator(tr, rng)
    alg = series.SeriesAlgebra(t, 40)
    z, w = _disk(rng, 5), _disk(rng, 5)
    got = alg.evaluate(alg.star(alg.from_matrix(A), alg.from_matrix(B)), z, w)
    assert np.max(np.abs(got - berg.covariant_symbol(A @ B, z, w))) < 1e-12
    assert np.max(np.abs(alg.evaluate(alg.one(), z, w) - 1)) < 1e-12


def test_cocycle_adjoint_symmetry(rng):
    t = 4.0
    tr = berg.BergmanTruncation(t, 5)
    kA = K.TruncatedMatrix(berg.random_operator(tr, rng))
    kB = K.TruncatedMatrix(berg.random_operator(tr, rng))
    z, w = _disk(rng, 3, 0.4), _disk(rng, 3, 0.4)
    lhs = np.conj(Q.cocycle_values(kA, kB, t, w, z, level=7)[0])
    rhs, e = Q.cocycle_values(kB.adjoint(), kA.adjoint(), t, z, w, level=7)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-6


def test_matrix_star_left_right(rng):
    t = 4.0
    tr = berg.BergmanTruncation(t, 5)
    A, B = berg.random_operator(tr, rng), berg.random_operator(tr, rng)
    kB = K.TruncatedMatrix(B)
    z, w = _disk(rng, 4), _disk(rng, 4)
    sample = lambda a, b: (kB(a, b), np.zeros(np.broadcast(a, b).shape))
    left, _ = Q.matrix_star(A, sample, t, z, w, "left")
    assert np.max(np.abs(left - berg.covariant_symbol(A @ B, z, w))) < 1e-10
    sampleA = lambda a, b: (K.TruncatedMatrix(A)(a, b), np.zeros(np.broadcast(a, b).shape))
    right, _ = Q.matrix_star(B, sampleA, t, z, w, "right")
    assert np.max(np.abs(right - berg.covariant_symbol(A @ B, z, w))) < 1e-10


def test_trace_of_one_and_refusal(rng):
    assert abs(Q.trace_invariant(K.Constant(1.0)).value - 1) < 1e-10
    k = K.TruncatedMatrix(berg.random_operator(berg.BergmanTruncation(4.0, 3), rng))
    with pytest.raises(Q.NonInvariantKernel):
        Q.trace_invariant(k)


def test_phi_semigroup_and_beta_chapman_kolmogorov():
    z = np.array([0.1 + 1.1j, -0.3 + 0.9j])
    w = np.array([0.2 + 1.4j, 0.4 + 1.0j])
    one = K.Constant(1.0)
    wp = Q.WeightParam(4.0)
    a = Q.apply_cp_map("Phi", Q.apply_cp_map("Phi", one, wp, eps=0.25), wp, eps=0.5)
    b = Q.apply_cp_map("Phi", one, wp, eps=0.75)
    assert np.array_equal(a(z, w), b(z, w))
    b1 = Q.apply_cp_map("Beta", Q.apply_cp_map("Beta", one, wp, eps=0.25), wp, eps=0.5)
    b2 = Q.apply_cp_map("Beta", one, wp, eps=0.75)
    assert b1.weight == b2.weight == 13.0
    assert np.array_equal(b1(z, w), b2(z, w))
    with pytest.raises(ValueError):
        Q.apply_cp_map("Phi", one, wp, eps=-1)


def test_psi_is_unital():
    wp = Q.WeightParam(4.0)
    k = Q.apply_cp_map("Psi", K.Constant(1.0), wp, s=6.0)
    assert k.weight == 6.0 and np.all(k(np.array([0.1j]), np.array([0.2])) == 1)
    with pytest.raises(ValueError):
        Q.apply_cp_map("Psi", K.Constant(1.0), wp, s=3.0)


def test_theta_gram_psd(rng):
    u = _disk(rng, 8, 0.9)
    z = 1j * (1 + u) / (1 - u)
    for eps in (0.5, 1.0, 2.0):
        G = K.Multiplier(theta_eps=eps)(z[:, None], z[None, :])
        assert np.linalg.eigvalsh((G + G.conj().T) / 2).min() >= -1e-10


def test_generator(rng):
    wp = Q.WeightParam(4.0)
    z = np.array([0.1 + 1.1j, -0.3 + 0.9j])
    w = np.array([0.2 + 1.4j, 0.4 + 1.0j])
    k = K.InvariantPower(1)
    vals = Q.generator_Lt(k, wp, z, w)
    for v in vals:
        assert v.err <= 1e-6 * abs(v.value)
    diag = Q.generator_Lt(K.Constant(1.0), wp, z, z)
    ref = K.log_phi(z, z) - 1 / 3
    assert np.allclose([v.value for v in diag], ref)
    twice = Q.generator_Lt(2 * k, wp, z, w)
    assert np.allclose([v.value for v in twice], [2 * v.value for v in vals])
