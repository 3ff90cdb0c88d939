import numpy as np
import pytest

from berezinlab import _accel, _fallback

core = pytest.importorskip("berezinlab._core")


def test_backend_selected():
    assert _accel.BACKEND in ("cython", "python")


def test_neumaier(rng):
    x = rng.normal(size=1000) * 10.0 ** rng.integers(-8, 8, 1000) + 1j * rng.normal(size=1000)
    assert core.neumaier_sum(x) == pytest.approx(_fallback.neumaier_sum(x), rel=1e-15, abs=1e-15)
    X = x.reshape(10, 100).copy()
    assert np.allclose(core.neumaier_rows(X), _fallback.neumaier_rows(X), rtol=1e-15)


def test_log_delta_series(rng):
    z = rng.uniform(-0.5, 0.5, 50) + 1j * rng.uniform(0.8, 3, 50)
    a, ma = core.log_delta_series(z, 1e-16, 400)
    b, mb = _fallback.log_delta_series(z, 1e-16, 400)
    assert np.array_equal(np.asarray(ma), np.asarray(mb))
    assert np.max(np.abs(np.asarray(a) - b)) < 1e-12


def test_reduce_points(rng):
    z = rng.uniform(-3, 3, 200) + 1j * rng.uniform(1e-3, 0.5, 200)
    wa, ma, oka = core.reduce_points(z, 1000)
    wb, mb, okb = _fallback.reduce_points(z, 1000)
    assert np.array_equal(np.asarray(ma), mb) and np.array_equal(np.asarray(oka), okb)
    assert np.max(np.abs(np.asarray(wa) - wb)) < 1e-12


def test_dedekind_and_rademacher():
    for c in range(1, 30):
        for d in range(1, c):
            if np.gcd(c, d) == 1:
                assert core.dedekind_12c(d, c) == _fallback.dedekind_12c(d, c)
    mats = np.array([[1, 1, 0, 1], [0, -1, 1, 0], [2, 1, 1, 1], [5, 3, 3, 2]], dtype=np.int64)
    assert np.array_equal(np.asarray(core.rademacher_batch(mats)), _fallback.rademacher_batch(mats))
