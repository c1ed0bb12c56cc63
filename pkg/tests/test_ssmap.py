"""The Sun-shadow return map on the section uv = R."""
import dataclasses
import math

import numpy as np
import pytest

from sunshadow import core, ssmap
from sunshadow.errors import ForbiddenPoint, LostOrbit
from sunshadow.ssmap import OutcomeKind, SectionPoint

ELL = 348600.0


def test_lift_lands_on_section(p):
    rng = np.random.default_rng(1)
    n = 0
    while n < 50:
        q = SectionPoint(rng.uniform(1000, 3500), rng.uniform(-3, 3), ELL)
        if ssmap.forbidden_class(q, p) != "admissible":
            continue
        s = ssmap.lift(q, p)
        n += 1
        assert s.u * s.v == pytest.approx(p.R, rel=1e-12)
        assert core.laplace_lenz_stark(s, p) == pytest.approx(ELL, rel=1e-10)
        # outward orientation
        assert s.u * s.pv > max(0.0, -s.pu * s.v)


def test_forbidden_point_raises_on_lift(p):
    q = SectionPoint(100.0, 0.0, ELL)
    assert ssmap.forbidden_class(q, p).startswith("D_F")
    with pytest.raises(ForbiddenPoint):
        ssmap.lift(q, p)


def test_strip_condition(p):
    q = SectionPoint(0.5 * math.sqrt(p.R), 0.0, ELL)
    assert ssmap.forbidden_class(q, p) == "D_F:strip"


def test_apply_inverse_is_left_inverse(p):
    q = SectionPoint(3500.0, -2.3, ELL)
    out = ssmap.apply(q, p)
    assert out.kind is OutcomeKind.Returned
    back = ssmap.apply_inverse(out.point, p)
    assert back.kind is OutcomeKind.Returned
    assert back.point.u == pytest.approx(q.u, rel=1e-9)
    assert back.point.pu == pytest.approx(q.pu, abs=1e-7)


def test_apply_batch_matches_scalar(p):
    pts = np.array([[3500.0, -2.3], [2500.0, 0.5], [100.0, 0.0]])
    labels, images, winding = ssmap.apply_batch(pts, ELL, p)
    for i in range(len(pts)):
        out = ssmap.apply(SectionPoint(pts[i, 0], pts[i, 1], ELL), p)
        if out.kind is OutcomeKind.Returned:
            assert labels[i] == "D"
            assert images[i, 0] == pytest.approx(out.point.u, rel=1e-12)
            assert images[i, 1] == pytest.approx(out.point.pu, rel=1e-9)
            assert winding[i] == out.winding
        elif out.kind is OutcomeKind.Forbidden:
            assert labels[i] == "F"


def test_known_winding_values(p):
    # representative points of four Figure-9-style corridors at ell_s = 0
    for u, expected in [(2500.0, 1), (2900.0, -1), (3057.0, 0), (2837.57, -2)]:
        out = ssmap.apply(SectionPoint(u, 0.0, 0.0), p)
        assert out.kind is OutcomeKind.Returned
        assert out.winding == expected


def test_fixed_point_residual(p, fixed_point):
    out = ssmap.apply(fixed_point, p)
    resid = np.linalg.norm(out.point.as_array() - fixed_point.as_array())
    assert resid <= 1e-10


def test_fixed_point_symmetric_twin(p, fixed_point):
    twin = SectionPoint(-fixed_point.u, -fixed_point.pu, ELL)
    out = ssmap.apply(twin, p)
    resid = np.linalg.norm(out.point.as_array() - twin.as_array())
    assert resid <= 1e-9


def test_jacobian_methods_agree(p, fixed_point):
    Jv = ssmap.jacobian(fixed_point, p, method="variational")
    Jf = ssmap.jacobian(fixed_point, p, method="finite-difference")
    scale = np.abs(Jv) + np.abs(Jf) + 1e-6 * np.linalg.norm(Jv)
    assert np.max(np.abs(Jv - Jf) / scale) <= 1e-5


def test_eigen2_saddle(p, fixed_point):
    lam, V = ssmap.eigen2(ssmap.jacobian(fixed_point, p))
    assert abs(lam[0].imag) == 0.0 and abs(lam[1].imag) == 0.0
    l1, l2 = lam[0].real, lam[1].real
    assert 0.0 < l1 < 1.0 < l2
    J = ssmap.jacobian(fixed_point, p)
    for k in range(2):
        r = J @ V[:, k].real - lam[k].real * V[:, k].real
        assert np.linalg.norm(r) <= 1e-8 * abs(lam[k].real)


def test_newton_failure_is_reported(p):
    bad = SectionPoint(2500.0, 0.5, ELL)
    with pytest.raises(LostOrbit):
        ssmap.find_fixed_point(bad, p, max_iter=3)


def test_spline_loop_area_circle():
    th = np.linspace(0.0, 2 * np.pi, 400, endpoint=False)
    a = ssmap.spline_loop_area(3.0 * np.cos(th), 3.0 * np.sin(th))
    assert a == pytest.approx(9.0 * np.pi, rel=1e-8)


def test_area_experiment_small(p):
    res = ssmap.area_experiment(1250.0, 250.0, 1.0, 400, ELL, p)
    assert res["A0"] == pytest.approx(np.pi * 250.0 ** 2, rel=1e-12)
    assert abs(res["A0_spline"] - res["A0"]) <= 1e-8 * res["A0"]
    assert res["A1"] < res["A0"]


def test_scan_domain_layout(p):
    grid = ssmap.scan_domain((3400.0, 3450.0), (-2.4, -2.3), 3, 2, ELL, p)
    assert len(grid["u"]) == 6
    # row-major over u then pu
    assert grid["u"][0] == grid["u"][1]
    assert grid["pu"][0] != grid["pu"][1]
    assert set(grid["cls"]) <= {"D", "F", "C", "INF", "BUDGET", "SING"}
