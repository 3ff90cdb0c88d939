import math

import numpy as np
import pytest
from scipy import integrate as si

from berezinlab import quad


def test_rule_is_deterministic():
    a = quad.build_rule(quad.Disk(), 1)
    b = quad.build_rule(quad.Disk(), 1)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.weights, b.weights)
    assert a.to_json() == b.to_json()


def test_fundamental_domain_membership():
    r = quad.build_rule(quad.FundamentalDomain(y_max=20), 3)
    assert np.all(np.abs(r.nodes.real) <= 0.5 + 1e-15)
    assert np.all(np.abs(r.nodes) >= 1 - 1e-15)
    assert np.all(r.nodes.imag <= 20)


def test_product_node_count():
    F, H = quad.FundamentalDomain(y_max=20), quad.HalfPlane()
    p = quad.build_rule(quad.Product(F, H), 2)
    assert p.size == quad.build_rule(F, 2).size * quad.build_rule(H, 2).size


def test_error_estimate_nonincreasing():
    ests = [quad.build_rule(quad.Disk(), n).error_estimate for n in range(1, 7)]
    assert all(b <= a for a, b in zip(ests, ests[1:]))


def test_bad_level_and_domain():
    with pytest.raises(ValueError):
        quad.build_rule(quad.Disk(), 0)
    with pytest.raises(TypeError):
        quad.build_rule("disk", 2)


def test_zero_and_area():
    r = quad.build_rule(quad.Disk(), 6)
    z = quad.integrate(lambda x: 0 * x, r)
    assert z.value == 0 and z.err == 0
    a = quad.integrate(lambda x: np.ones_like(x), r)
    assert abs(a.value - math.pi) <= max(a.err, 1e-8)


def test_fundamental_domain_area():
    # oracle: 1-D profile integral of int_{sqrt(1-x^2)}^inf y^-2 dy = 1/sqrt(1-x^2)
    ref = si.quad(lambda x: 1 / math.sqrt(1 - x * x), -0.5, 0.5)[0]
    assert abs(ref - math.pi / 3) < 1e-12
    r = quad.build_rule(quad.FundamentalDomain(), 6)
    v = quad.integrate(lambda z: np.ones_like(z), r, measure_weight=0.0)
    assert abs(v.value - math.pi / 3) <= 1e-8


def test_nonfinite_reports_node():
    r = quad.build_rule(quad.Disk(), 2)
    with pytest.raises(quad.IntegrandError) as e:
        quad.integrate(lambda x: np.where(np.abs(x) > 0.5, np.nan, 1.0), r)
    assert e.value.node is not None


def test_separable_product():
    F = quad.build_rule(quad.Disk(), 4)
    H = quad.build_rule(quad.Disk(), 4)
    g = lambda z: 1 + z.real**2  # noqa: E731
    h = lambda z: np.cos(z.imag)  # noqa: E731
    p = quad.integrate_product(lambda a, b: g(a) * h(b), F, H, None, None)
    gi, hi = quad.integrate(g, F), quad.integrate(h, H)
    assert abs(p.value - gi.value * hi.value) <= p.err + gi.err + hi.err + 1e-12


def test_product_zero():
    F = quad.build_rule(quad.Disk(), 2)
    assert quad.integrate_product(lambda a, b: 0 * a * b, F, F).value == 0


def test_weighted_disk_rule_moments():
    # int |z|^2n (1-|z|^2)^(t-2) dA = pi n! Gamma(t-1)/Gamma(n+t)
    t = 4.5
    r = quad.rule_for_weight(t, 4)
    for n in range(6):
        v = np.sum(r.weights * np.abs(r.nodes) ** (2 * n))
        ref = math.pi * math.gamma(n + 1) * math.gamma(t - 1) / math.gamma(n + t)
        assert abs(v - ref) / ref < 1e-12


def test_bit_identical_repeat():
    r = quad.build_rule(quad.Disk(), 5)
    f = lambda z: np.exp(z) * np.conj(z)  # noqa: E731
    a, b = quad.integrate(f, r), quad.integrate(f, r)
    assert a.value == b.value and a.err == b.err


def test_formvalue_invariants():
    with pytest.raises(ValueError):
        quad.FormValue(1.0, -1.0)
    with pytest.raises(quad.IntegrandError):
        quad.FormValue(float("inf"), 0.0)
