import math
from fractions import Fraction

import numpy as np
import pytest

from berezinlab import hyp, modf


def test_delta_examples(rng):
    z = 0.3 + 50j
    q = np.exp(2j * np.pi * z)
    assert abs(modf.delta(z) / q - 1) < 1e-14
    zs = rng.uniform(-1, 1, 20) + 1j * rng.uniform(0.2, 2, 20)
    assert np.max(np.abs(modf.delta(zs + 1) / modf.delta(zs) - 1)) < 1e-12
    assert abs(modf.delta(0.5j) / (4096 * modf.delta(2j)) - 1) < 1e-10


def test_delta_refuses_low_points():
    with pytest.raises(modf.TruncationError):
        modf.delta(0.3 + 0.01j)


def test_log_delta(rng):
    z = 0.2 + 30j
    assert abs(modf.log_delta(z) - 2j * np.pi * z) < 1e-12
    zs = rng.uniform(-1, 1, 100) + 1j * rng.uniform(0.1, 2, 100)
    assert np.max(np.abs(np.exp(modf.log_delta(zs)) / modf.delta(zs) - 1)) < 1e-11


def test_log_delta_path_continuity():
    s = np.linspace(0, 1, 1000)
    path = (1 - s) * 10j + s * (0.3 + 0.8j)
    im = modf.log_delta(path).imag
    assert np.max(np.abs(np.diff(im))) < 1.0


def test_truncation_tail_decreases():
    aq = math.exp(-2 * math.pi * 0.1)
    bounds = [modf.QTruncation.bound(aq, M) for M in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(bounds, bounds[1:]))


def test_truncation_for_point_meets_tolerance():
    tr = modf.QTruncation.for_point(0.2 + 0.3j)
    assert tr.tail_bound < modf.TAIL_TOL


def test_dedekind_sums():
    assert modf.dedekind_sum(0, 1) == 0
    assert modf.dedekind_sum(1, 2) == 0
    assert modf.dedekind_sum(1, 3) == Fraction(1, 18)
    with pytest.raises(ValueError):
        modf.dedekind_sum(2, 4)


def test_rademacher_examples():
    assert modf.rademacher_phi(hyp.IDENTITY) == 0
    assert modf.rademacher_phi(hyp.S) == 0
    vals = [modf.rademacher_phi(hyp.T_power(n)) for n in range(0, 8)]
    assert np.all(np.diff(vals) == vals[1] - vals[0]) and vals[1] != 0


def test_theta_defect_relation(rng):
    assert modf.theta_defect(hyp.IDENTITY).theta == 0
    mats = []
    while len(mats) < 50:
        g = hyp.random_modular(rng, 5)
        if g.c <= 10 and g.act(10j).imag > 1e-3 and g not in mats:
            mats.append(g)
    rounded, _, resid = modf.calibrate_theta_relation(mats)
    assert rounded == modf.THETA_RELATION and resid < 1e-9
    for g in mats[:10]:
        assert modf.theta_defect(g).n == modf.predicted_theta_n(g)


def test_theta_transport_for_T_powers():
    for n in range(1, 51, 7):
        g = hyp.T_power(n)
        assert modf.theta_defect(g).n == modf.predicted_theta_n(g)


def test_arg_delta_transport_is_weight_12():
    g = hyp.ModularMatrix(2, 1, 1, 1)
    r = modf.arg_delta_transport_check(g, 0.1 + 1.3j)
    assert r["weight12_arg_j"] < 1e-9 < r["plain_arg_j"]


def test_euler_small_radius():
    r = modf.euler_report(1)
    assert r.max_defect <= 3 and r.n_pairs == r.ball_size**2
    assert modf.euler_report(20).max_phi > modf.euler_report(10).max_phi


def test_rademacher_batch_matches_scalar(rng):
    mats = [hyp.random_modular(rng, 8) for _ in range(50)]
    arr = np.array([g.as_tuple() for g in mats], dtype=np.int64)
    assert list(modf.rademacher_batch(arr)) == [modf.rademacher_phi(g) for g in mats]


def test_sup_delta_y6_positive():
    v = modf.sup_delta_y6(60)
    assert math.isfinite(v) and v > 0
