"""Stark-problem taxonomy, periods, and the brake family."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from sunshadow import stark
from sunshadow.errors import InvalidRatio, OutOfRange, UnboundedU
from sunshadow.stark import Region


def chi(h_s, p):
    return h_s / math.sqrt(p.f)


def test_classify_interior_regions(p):
    mu = p.mu
    sf = math.sqrt(p.f)
    assert stark.classify(-2 * mu, 1.0, p).label is Region.I
    assert stark.classify(0.0, 1.0, p).label is Region.II
    assert stark.classify(2 * mu, 10.0 * sf * math.sqrt(mu), p).label is Region.III
    assert stark.classify(0.0, -2.0 * sf * math.sqrt(mu), p).label is Region.IV


def test_classify_boundaries(p):
    mu = p.mu
    sf = math.sqrt(p.f)
    assert stark.classify(-mu, 1.0, p).label is Region.B_I_II
    assert stark.classify(-mu, -1.0, p).label is Region.B_I_IV
    assert stark.classify(-mu, 0.0, p).label is Region.P_I_II_IV
    assert stark.classify(mu, 1.0, p).label is Region.B_II_III
    assert stark.classify(mu, 0.0, p).label is Region.P_II_III
    assert stark.classify(mu, -2.0 * sf * math.sqrt(mu), p).label is Region.P_II_IV
    assert stark.classify(mu, -1.0 * sf * math.sqrt(mu), p).label is Region.B_II_edge
    assert stark.classify(mu, -3.0 * sf * math.sqrt(mu), p).label is Region.B_IV_edge
    hs_sep = -math.sqrt(2.0 * p.f * (mu + 0.0))
    assert stark.classify(0.0, hs_sep, p).label is Region.B_II_IV
    hs_edge = math.sqrt(2.0 * p.f * (2 * mu - mu))
    assert stark.classify(2 * mu, hs_edge, p).label is Region.B_III_edge
    assert stark.classify(2 * mu, 0.5 * hs_edge, p).label is Region.Forbidden


def test_quartic_roots_solve_quartics(p):
    rng = np.random.default_rng(2)
    for _ in range(100):
        ell = rng.uniform(-2 * p.mu, 2 * p.mu)
        hs = rng.uniform(-1.0, 1.0)
        q = stark.quartic_structure(ell, hs, p)
        for u in q.u_roots:
            assert abs(stark.quartic_u(u, ell, hs, p)) <= 1e-4 * max(
                1.0, abs(2 * (p.mu + ell)))
        for v in q.v_roots:
            assert abs(stark.quartic_v(v, ell, hs, p)) <= 1e-4 * max(
                1.0, abs(2 * (p.mu - ell)))


def test_zero_velocity_points_counts(p):
    assert len(stark.zero_velocity_points(-2 * p.mu, -1.0, p)) == 2
    hs = -2.0 * math.sqrt(p.f) * math.sqrt(p.mu)
    assert len(stark.zero_velocity_points(0.0, hs, p)) == 4
    assert stark.zero_velocity_points(0.0, 1.0, p) == []


def test_agm_known_value():
    # agm(1, sqrt(2)) is Gauss's lemniscatic constant
    assert stark.agm(1.0, math.sqrt(2.0)) == pytest.approx(
        1.1981402347355922074, rel=1e-14)


def _periods_quadrature(ell, hs, p):
    q = stark.quartic_structure(ell, hs, p)
    xi1, xi2 = q.xi1.real, q.xi2.real
    eta1, eta2 = q.eta1.real, q.eta2.real
    sf = math.sqrt(p.f)
    tu = 4.0 / sf * quad(
        lambda th: 1.0 / math.sqrt(xi1 - xi2 * math.sin(th) ** 2),
        0.0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)[0]
    tv = 4.0 / sf * quad(
        lambda th: 1.0 / math.sqrt(eta1 * math.sin(th) ** 2 - eta2),
        0.0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)[0]
    return tu, tv


def test_periods_match_quadrature(p):
    rng = np.random.default_rng(17)
    for _ in range(20):
        ell = rng.uniform(-0.9, 0.9) * p.mu
        hs_star = stark.brake_family(ell, p).hs_star
        hs = hs_star * rng.uniform(1.05, 4.0)
        tu, tv = stark.periods(ell, hs, p)
        qu, qv = _periods_quadrature(ell, hs, p)
        assert tu == pytest.approx(qu, rel=1e-10)
        assert tv == pytest.approx(qv, rel=1e-10)
        assert tv / tu < 1.0


def test_periods_require_bounded_branch(p):
    with pytest.raises(UnboundedU):
        stark.periods(-2 * p.mu, -1.0, p)


def test_brake_family_identities(p):
    rng = np.random.default_rng(23)
    for _ in range(50):
        ell = rng.uniform(-0.99, 0.99) * p.mu
        bf = stark.brake_family(ell, p)
        assert p.f * bf.xi_star ** 2 == pytest.approx(2 * (p.mu + ell), rel=1e-12)
        assert bf.hs_star == pytest.approx(-p.f * bf.xi_star, rel=1e-12)
        # u* is an equilibrium of the reduced u-dynamics
        assert abs(2 * bf.hs_star * bf.u_star + 2 * p.f * bf.u_star ** 3) \
            <= 1e-9 * abs(bf.hs_star * bf.u_star)
        assert bf.reduced_jacobian_det == pytest.approx(-4 * p.f / bf.xi_star)
        assert bf.reduced_jacobian_det < 0.0
    with pytest.raises(OutOfRange):
        stark.brake_family(2 * p.mu, p)


def test_commensurable_energy(p):
    ell = 348600.0
    hs = stark.commensurable_energy(ell, (1, 2), p)
    tu, tv = stark.periods(ell, hs, p)
    assert tv / tu == pytest.approx(0.5, rel=1e-16, abs=1e-12)
    with pytest.raises(InvalidRatio):
        stark.commensurable_energy(ell, (3, 2), p)
