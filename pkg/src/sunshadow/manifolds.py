"""Invariant-manifold growth for the hyperbolic fixed points of the
Sun-shadow map: Hobson-style primary segments, MFLI polyline correction,
pruning of lost trajectories into disconnected components, and
cubic-spline resampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import ssmap
from .errors import (
    AllCandidatesLost,
    BranchExtinct,
    ForbiddenPoint,
    LinearRegimeViolated,
    LostOrbit,
)
from .params import PhysParams
from .ssmap import OutcomeKind, SectionPoint

__all__ = [
    "Primary", "Branch", "PlanarMap", "SunShadowPlanarMap", "mfli",
    "init_primary", "correct_primary", "grow_branch",
]


class PlanarMap:
    """Minimal planar-map interface used by the manifold machinery.

    apply_point returns the image as a 2-vector or None when the orbit
    is lost; jacobian returns the 2x2 derivative.
    """

    def apply_point(self, q: np.ndarray) -> np.ndarray | None:
        raise NotImplementedError

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SunShadowPlanarMap(PlanarMap):
    """Adapter exposing the Sun-shadow map (or its inverse) on raw
    (u, pu) arrays.  The inverse-map Jacobian is obtained from the
    forward one at the preimage: D(S^-1)(q) = [DS(S^-1(q))]^-1."""

    def __init__(self, ell_s: float, p: PhysParams, inverse: bool = False):
        self.ell_s = ell_s
        self.p = p
        self.inverse = inverse

    def _point(self, q: np.ndarray) -> SectionPoint:
        return SectionPoint(float(q[0]), float(q[1]), self.ell_s)

    def apply_point(self, q: np.ndarray) -> np.ndarray | None:
        f = ssmap.apply_inverse if self.inverse else ssmap.apply
        out = f(self._point(q), self.p)
        if out.kind is not OutcomeKind.Returned:
            return None
        return out.point.as_array()

    def apply_many(self, pts: np.ndarray) -> list[np.ndarray | None]:
        labels, images, _ = ssmap.apply_batch(
            pts, self.ell_s, self.p, forward=not self.inverse)
        return [images[i] if labels[i] == "D" else None
                for i in range(len(labels))]

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        if not self.inverse:
            return ssmap.jacobian(self._point(q), self.p)
        img = self.apply_point(q)
        if img is None:
            raise LostOrbit("inverse-map Jacobian: orbit lost")
        return np.linalg.inv(ssmap.jacobian(self._point(img), self.p))


@dataclass
class Primary:
    """One generation V_i of a manifold branch; possibly several
    connected components (polylines in (u, pu))."""
    components: list[np.ndarray]
    generation: int

    @property
    def n_points(self) -> int:
        return sum(len(c) for c in self.components)

    def all_points(self) -> np.ndarray:
        return np.vstack(self.components) if self.components else np.zeros((0, 2))


@dataclass
class Branch:
    primaries: list[Primary]
    fixed_point: SectionPoint
    direction: str
    eigvec: np.ndarray = field(default_factory=lambda: np.zeros(2))


def _mfli_generic(pmap: PlanarMap, q: np.ndarray, horizon: int,
                  w0: np.ndarray) -> tuple[float, bool]:
    """max over n <= horizon of log ||J_n w0||; early-stopped (truncated
    flag) when the orbit leaves the domain."""
    w = w0 / np.linalg.norm(w0)
    val = 0.0
    x = np.asarray(q, dtype=float)
    for _ in range(horizon):
        try:
            J = pmap.jacobian(x)
        except (LostOrbit, ForbiddenPoint):
            return val, True
        w = J @ w
        val = max(val, math.log(np.linalg.norm(w)))
        nxt = pmap.apply_point(x)
        if nxt is None:
            return val, True
        x = nxt
    return val, False


def mfli(q: SectionPoint, horizon: int, p: PhysParams,
         w0: np.ndarray | None = None, inverse: bool = False) -> float:
    """MFLI of a section point under the Sun-shadow map."""
    if ssmap.forbidden_class(q, p) != "admissible":
        raise ForbiddenPoint("MFLI seed is forbidden")
    if w0 is None:
        w0 = np.array([1.0, 0.0])
    pmap = SunShadowPlanarMap(q.ell_s, p, inverse=inverse)
    val, _ = _mfli_generic(pmap, q.as_array(), horizon, np.asarray(w0, float))
    return val


def init_primary(fp: np.ndarray, eigvec: np.ndarray, a: float, n: int,
                 pmap: PlanarMap, lam: float,
                 linear_tol: float = 0.05) -> Primary:
    """Initial primary V_0: n points along the eigenvector psi with the
    exponential law v_i = v_{i-1} + a 2^i psi; the last point is the map
    image of the first."""
    psi = np.asarray(eigvec, float)
    psi = psi / np.linalg.norm(psi)
    fp = np.asarray(fp, float)
    v0 = fp + a * psi
    img = pmap.apply_point(v0)
    if img is None:
        raise LinearRegimeViolated("image of the first primary point is lost")
    lin = fp + lam * (v0 - fp)
    if np.linalg.norm(img - lin) > linear_tol * np.linalg.norm(v0 - fp):
        raise LinearRegimeViolated(
            "initial offset leaves the linear regime of the fixed point")
    pts = [v0]
    for i in range(1, n - 1):
        pts.append(pts[-1] + a * 2.0 ** i * psi)
    pts.append(img)
    return Primary(components=[np.array(pts)], generation=0)


def _tangents(poly: np.ndarray) -> np.ndarray:
    t = np.gradient(poly, axis=0)
    norms = np.linalg.norm(t, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return t / norms


def correct_primary(V: Primary, transverse_halfwidth: float, samples: int,
                    horizon: int, pmap: PlanarMap) -> Primary:
    """Replace each polyline point by the max-MFLI candidate on the
    transverse segment through it."""
    offsets = np.linspace(-transverse_halfwidth, transverse_halfwidth, samples)
    new_components = []
    for comp in V.components:
        tang = _tangents(comp)
        out = np.empty_like(comp)
        for i, q in enumerate(comp):
            normal = np.array([-tang[i, 1], tang[i, 0]])
            # prefer candidates whose orbit survives the full horizon;
            # among those (or, failing that, among the truncated ones)
            # take the largest MFLI
            best_full = (-math.inf, None)
            best_trunc = (-math.inf, None)
            for off in offsets:
                cand = q + off * normal
                try:
                    val, truncated = _mfli_generic(
                        pmap, cand, horizon, normal)
                except (LostOrbit, ForbiddenPoint):
                    continue
                if truncated:
                    if val > best_trunc[0]:
                        best_trunc = (val, cand)
                elif val > best_full[0]:
                    best_full = (val, cand)
            best_q = best_full[1] if best_full[1] is not None else best_trunc[1]
            if best_q is None:
                raise AllCandidatesLost(f"point {i}: no admissible candidate")
            out[i] = best_q
        new_components.append(out)
    return Primary(components=new_components, generation=V.generation)


def _resample(poly: np.ndarray, spacing: float) -> np.ndarray:
    """Cubic-spline resampling of a polyline to bounded chord spacing."""
    if len(poly) < 4:
        return poly
    theta = np.concatenate(
        ([0.0], np.cumsum(np.linalg.norm(np.diff(poly, axis=0), axis=1))))
    keep = np.concatenate(([True], np.diff(theta) > 0))
    theta, poly = theta[keep], poly[keep]
    if len(poly) < 4 or theta[-1] <= 0:
        return poly
    n_new = max(len(poly), int(math.ceil(theta[-1] / spacing)) + 1)
    grid = np.linspace(0.0, theta[-1], n_new)
    su = CubicSpline(theta, poly[:, 0])
    sp = CubicSpline(theta, poly[:, 1])
    return np.column_stack((su(grid), sp(grid)))


def _map_and_split(V: Primary, pmap: PlanarMap) -> Primary:
    """Apply the map pointwise; drop lost points and split the polyline
    at the drops into connected components."""
    new_components = []
    for comp in V.components:
        if isinstance(pmap, SunShadowPlanarMap):
            images = pmap.apply_many(comp)
        else:
            images = [pmap.apply_point(q) for q in comp]
        run = []
        for img in images:
            if img is None or not np.all(np.isfinite(img)):
                if len(run) >= 2:
                    new_components.append(np.array(run))
                run = []
            else:
                run.append(img)
        if len(run) >= 2:
            new_components.append(np.array(run))
    return Primary(components=new_components, generation=V.generation + 1)


def grow_branch(fp: SectionPoint, direction: str, iterations: int,
                p: PhysParams,
                offset_rel: float = 2e-10,
                linear_tol: float = 0.05,
                n_points: int = 12,
                transverse_halfwidth: float | None = None,
                samples: int = 7,
                horizon: int = 4,
                chord_rel: float = 1e-3,
                correct: bool = True) -> Branch:
    """Grow one branch of the stable/unstable manifold of fp.

    direction is one of "+unstable", "-unstable", "+stable", "-stable";
    stable branches are grown with the inverse map.
    """
    sign = -1.0 if direction.startswith("-") else 1.0
    which = direction.lstrip("+-")
    if which not in ("stable", "unstable"):
        raise ValueError(f"unknown branch direction: {direction!r}")
    J = ssmap.jacobian(fp, p)
    lam, V = ssmap.eigen2(J)
    if not (np.isreal(lam).all() and 0 < abs(lam[0]) < 1 < abs(lam[1])):
        raise LostOrbit("fixed point is not a saddle")
    if which == "unstable":
        psi, mult = V[:, 1].real, float(lam[1].real)
        pmap = SunShadowPlanarMap(fp.ell_s, p, inverse=False)
    else:
        psi, mult = V[:, 0].real, 1.0 / float(lam[0].real)
        pmap = SunShadowPlanarMap(fp.ell_s, p, inverse=True)
    fp_arr = fp.as_array()
    a = offset_rel * np.linalg.norm(fp_arr)
    V0 = init_primary(fp_arr, sign * psi, a, n_points, pmap, mult,
                      linear_tol=linear_tol)
    span = np.linalg.norm(V0.components[0][-1] - V0.components[0][0])
    hw = transverse_halfwidth if transverse_halfwidth is not None \
        else span / (4.0 * n_points)
    if correct:
        V0 = correct_primary(V0, hw, samples, horizon, pmap)
    primaries = [V0]
    current = V0
    for _ in range(iterations):
        nxt = _map_and_split(current, pmap)
        if not nxt.components:
            raise BranchExtinct(f"all points lost at generation {nxt.generation}")
        pts = nxt.all_points()
        diag = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))
        spacing = max(chord_rel * diag, 1e-12)
        nxt = Primary([_resample(c, spacing) for c in nxt.components],
                      nxt.generation)
        if correct and nxt.generation <= 1:
            try:
                nxt = correct_primary(nxt, spacing / 2.0, samples, horizon, pmap)
            except AllCandidatesLost:
                pass
        primaries.append(nxt)
        current = nxt
    return Branch(primaries=primaries, fixed_point=fp, direction=direction,
                  eigvec=psi)
