"""Coordinate charts and first integrals."""
import math

import numpy as np
import pytest

from sunshadow import core
from sunshadow.core import CartesianState, ParabolicState
from sunshadow.errors import BranchUndefined, DegenerateOrigin


def _random_cartesian(rng):
    x, y = rng.uniform(-5e4, 5e4, 2)
    px, py = rng.uniform(-10, 10, 2)
    return CartesianState(x=x, y=y, px=px, py=py, t=rng.uniform(0, 100))


def test_roundtrip_cartesian_parabolic(p):
    rng = np.random.default_rng(7)
    for _ in range(200):
        c = _random_cartesian(rng)
        if c.r < 1e-6:
            continue
        s = core.to_parabolic(c)
        back = core.to_cartesian(s)
        for a, b in [(c.x, back.x), (c.y, back.y),
                     (c.px, back.px), (c.py, back.py)]:
            assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


def test_double_cover_negation(p):
    c = CartesianState(x=1.0e4, y=2.0e3, px=1.0, py=-2.0, t=0.0)
    s1 = core.to_parabolic(c, branch=+1)
    s2 = core.to_parabolic(c, branch=-1)
    assert s2.u == pytest.approx(-s1.u)
    assert s2.v == pytest.approx(-s1.v)
    assert s2.pu == pytest.approx(-s1.pu)
    assert s2.pv == pytest.approx(-s1.pv)


def test_rho_is_twice_radius(p):
    rng = np.random.default_rng(11)
    for _ in range(50):
        c = _random_cartesian(rng)
        s = core.to_parabolic(c)
        # the chart loses a few digits near the negative-x axis
        assert s.rho == pytest.approx(2.0 * c.r, rel=1e-9)


def test_angular_momentum_matches_cartesian(p):
    rng = np.random.default_rng(3)
    for _ in range(50):
        c = _random_cartesian(rng)
        s = core.to_parabolic(c)
        ck = c.x * c.py - c.y * c.px
        assert core.angular_momentum(s) == pytest.approx(ck, rel=1e-10, abs=1e-8)


def test_hamiltonian_kepler_matches_cartesian(p):
    rng = np.random.default_rng(5)
    for _ in range(50):
        c = _random_cartesian(rng)
        s = core.to_parabolic(c)
        hk = 0.5 * (c.px ** 2 + c.py ** 2) - p.mu / c.r
        assert core.hamiltonian_kepler(s, p) == pytest.approx(hk, rel=1e-11)


def test_stark_hamiltonian_offset(p):
    rng = np.random.default_rng(9)
    for _ in range(50):
        c = _random_cartesian(rng)
        s = core.to_parabolic(c)
        hs = core.hamiltonian_stark(s, p)
        hk = core.hamiltonian_kepler(s, p)
        # H_s = H_k + f x  (potential of the constant force along -x)
        assert hs - hk == pytest.approx(-p.f * c.x, rel=1e-9, abs=1e-12)


def test_laplace_lenz_stark_offset(p):
    rng = np.random.default_rng(13)
    for _ in range(50):
        c = _random_cartesian(rng)
        s = core.to_parabolic(c)
        ls = core.laplace_lenz_stark(s, p)
        lk = core.laplace_lenz_kepler(s, p)
        assert ls - lk == pytest.approx(-0.5 * p.f * c.y ** 2, rel=1e-9,
                                        abs=1e-10)


def test_cartesian_speed(p):
    c = CartesianState(x=9e3, y=1e3, px=3.0, py=-4.0, t=0.0)
    s = core.to_parabolic(c)
    assert core.cartesian_speed(s) == pytest.approx(5.0, rel=1e-12)


def test_time_rate_positive(p):
    s = core.to_parabolic(CartesianState(x=1e4, y=0.0, px=0.0, py=5.0, t=0.0))
    assert core.time_rate(s) == pytest.approx(s.rho)


def test_origin_rejected(p):
    s = ParabolicState(u=0.0, v=0.0, pu=0.0, pv=0.0, tau=0.0, t=0.0)
    with pytest.raises(DegenerateOrigin):
        core.hamiltonian_kepler(s, p)
