"""Invariant-manifold growth, MFLI correction, and the synthetic saddle."""
import math

import numpy as np
import pytest

from sunshadow import manifolds
from sunshadow.errors import LinearRegimeViolated
from sunshadow.manifolds import Primary, PlanarMap

ELL = 348600.0


class LinearSaddleMap(PlanarMap):
    """Exact linear saddle around a fixed point: the oracle map."""

    def __init__(self, fp, l1=0.2, l2=5.0):
        self.fp = np.asarray(fp, float)
        self.A = np.diag([l1, l2])

    def apply_point(self, q):
        return self.fp + self.A @ (np.asarray(q, float) - self.fp)

    def jacobian(self, q):
        return self.A.copy()


class BoundedSaddleMap(LinearSaddleMap):
    """Linear saddle on a bounded domain: orbits leaving it are lost.

    This reproduces the mechanism the MFLI correction exploits in the
    real map: candidates off the invariant axis escape and truncate.
    """

    def __init__(self, fp, l1=0.2, l2=5.0, extent=1.0):
        super().__init__(fp, l1, l2)
        self.extent = extent

    def apply_point(self, q):
        q = np.asarray(q, float)
        if np.max(np.abs(q - self.fp)) > self.extent:
            return None
        return super().apply_point(q)


def test_mfli_closed_form_on_linear_saddle():
    pmap = LinearSaddleMap([0.0, 0.0])
    w0 = np.array([1.0, 1.0]) / math.sqrt(2.0)
    val, trunc = manifolds._mfli_generic(pmap, np.array([0.0, 1e-3]), 6,
                                         w0.copy())
    assert not trunc
    # ||A^6 w0|| is dominated by the expanding component 5^6 / sqrt(2)
    assert val == pytest.approx(6 * math.log(5.0) - 0.5 * math.log(2.0),
                                rel=1e-6)


def test_mfli_truncates_off_axis():
    pmap = BoundedSaddleMap([0.0, 0.0])
    w0 = np.array([1.0, 1.0]) / math.sqrt(2.0)
    # x is contracting, y expanding: off-axis points in y escape
    v_on, t_on = manifolds._mfli_generic(pmap, np.array([0.5, 0.0]), 8,
                                         w0.copy())
    v_off, t_off = manifolds._mfli_generic(pmap, np.array([0.5, 1e-2]), 8,
                                           w0.copy())
    assert not t_on
    assert t_off
    assert v_off < v_on


def test_init_primary_exponential_law():
    pmap = LinearSaddleMap([0.0, 0.0])
    fp = np.zeros(2)
    psi = np.array([0.0, 1.0])
    a = 1e-4
    V = manifolds.init_primary(fp, psi, a, 8, pmap, 5.0)
    pts = V.components[0]
    assert len(pts) == 8
    assert pts[0] == pytest.approx([0.0, a])
    # last point is the image of the first
    assert pts[-1] == pytest.approx(pmap.apply_point(pts[0]))
    # doubling law on the interior offsets
    gaps = np.diff(pts[:-1, 1])
    assert np.allclose(gaps[1:] / gaps[:-1], 2.0)


def test_init_primary_rejects_nonlinear_start():
    class Bent(LinearSaddleMap):
        def apply_point(self, q):
            q = np.asarray(q, float)
            lin = super().apply_point(q)
            return lin + 50.0 * np.array([q[1] ** 2, 0.0])

    with pytest.raises(LinearRegimeViolated):
        manifolds.init_primary(np.zeros(2), np.array([0.0, 1.0]), 1e-2, 8,
                               Bent([0.0, 0.0]), 5.0, linear_tol=1e-3)


def test_correct_primary_recovers_synthetic_axis():
    # perturb points off the invariant axis {y = 0} of a bounded saddle;
    # the MFLI correction must pull them back toward the axis: the
    # longest-lived candidate is the one nearest y = 0.  The offsets are
    # chosen so no two candidates sit within a factor l2 in |y| (equal
    # survival times would make the within-bin choice arbitrary).
    pmap = BoundedSaddleMap([0.0, 0.0], l1=0.5, l2=1.5)
    x = np.linspace(1e-3, 1e-1, 20)
    rng = np.random.default_rng(4)
    halfwidth = 0.02
    samples = 9
    spacing = 2.0 * halfwidth / (samples - 1)
    offsets = rng.choice([-0.35, -0.3, 0.3, 0.35], 20) * spacing
    V = Primary([np.column_stack((x, offsets))], 0)
    corrected = manifolds.correct_primary(V, halfwidth, samples, 24, pmap)
    assert np.max(np.abs(corrected.components[0][:, 1])) <= 0.5 * spacing


def test_grow_branch_synthetic_generations():
    pmap = LinearSaddleMap([0.0, 0.0])
    V = manifolds.init_primary(np.zeros(2), np.array([0.0, 1.0]), 1e-6, 10,
                               pmap, 5.0)
    cur = V
    for gen in range(1, 4):
        cur = manifolds._map_and_split(cur, pmap)
        assert cur.generation == gen
        pts = cur.all_points()
        assert np.allclose(pts[:, 0], 0.0)
        # each generation advances by one factor of lambda2
        assert pts[:, 1].max() == pytest.approx(
            5.0 ** gen * V.all_points()[:, 1].max(), rel=1e-9)


def test_grow_branch_unstable(p, fixed_point):
    br = manifolds.grow_branch(fixed_point, "+unstable", 2, p,
                               samples=3, horizon=2)
    assert len(br.primaries) == 3
    assert br.primaries[0].generation == 0
    assert br.primaries[2].n_points > br.primaries[0].n_points


def test_grow_branch_rejects_unknown_direction(p, fixed_point):
    with pytest.raises(ValueError):
        manifolds.grow_branch(fixed_point, "sideways", 1, p)


def test_planar_adapter_inverse_jacobian(p, fixed_point):
    fwd = manifolds.SunShadowPlanarMap(ELL, p)
    inv = manifolds.SunShadowPlanarMap(ELL, p, inverse=True)
    q = fixed_point.as_array()
    Jf = fwd.jacobian(q)
    Ji = inv.jacobian(q)
    # at a fixed point the inverse Jacobian is the matrix inverse
    assert np.allclose(Ji @ Jf, np.eye(2), atol=1e-4)
