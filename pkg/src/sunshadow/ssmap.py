"""The Sun-shadow map on the section Sigma = {uv = R, |u| >= sqrt(R),
u pv > max(0, -pu v), L_s = ell_s}.

A section point is (u, pu) with the context value ell_s; the lift
reconstructs (v, pv) in closed form.  Forward application launches in
the Stark regime (outward, p_y > 0) and stops at the first admissible
return; the inverse map runs the same machinery backward starting in
the Kepler regime.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels as K
from .core import ParabolicState
from .errors import ForbiddenPoint, LostOrbit, NoConvergence, SampleLost, SingularSection
from .params import PhysParams
from .propagate import (
    CrossingEvent,
    FlowStatus,
    RegimeKind,
    flow_with_stm,
    section_project,
    sunshadow_flow,
)

__all__ = [
    "SectionPoint", "OutcomeKind", "MapOutcome", "forbidden_class", "lift",
    "apply", "apply_inverse", "apply_batch", "jacobian", "find_fixed_point",
    "eigen2", "area_experiment", "spline_loop_area", "scan_domain",
]


@dataclass(frozen=True)
class SectionPoint:
    u: float
    pu: float
    ell_s: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.pu])


class OutcomeKind(enum.Enum):
    Returned = "Returned"
    Forbidden = "Forbidden"
    Collision = "Collision"
    Escape = "Escape"
    Budget = "Budget"
    Singular = "Singular"


@dataclass(frozen=True)
class MapOutcome:
    kind: OutcomeKind
    point: SectionPoint | None
    winding: int | None
    elapsed_t: float
    events: list[CrossingEvent]
    reason: str = ""


# class labels used by the scanner / CSV output
_CSV_CLASS = {
    OutcomeKind.Returned: "D",
    OutcomeKind.Forbidden: "F",
    OutcomeKind.Collision: "C",
    OutcomeKind.Escape: "INF",
    OutcomeKind.Budget: "BUDGET",
    OutcomeKind.Singular: "SING",
}

_STATUS_KIND = {
    K.ST_SECTION: OutcomeKind.Returned,
    K.ST_COLLISION: OutcomeKind.Collision,
    K.ST_ESCAPE: OutcomeKind.Escape,
    K.ST_BUDGET: OutcomeKind.Budget,
    K.ST_SINGULAR: OutcomeKind.Singular,
    K.ST_NOCONV: OutcomeKind.Singular,
    K.ST_TAU_END: OutcomeKind.Budget,
}


def _pv_squared(u: float, pu: float, ell_s: float, p: PhysParams) -> float:
    """p_v^2 on the lift, from L_s = ell_s with uv = R."""
    R2 = p.R * p.R
    u4 = u ** 4
    return (R2 / u4) * (pu * pu - 2.0 * (p.mu + ell_s)) - p.f * R2 \
        + 2.0 * (p.mu - ell_s) - p.f * R2 * R2 / u4


def forbidden_class(q: SectionPoint, p: PhysParams) -> str:
    """Closed-form admissibility test; no propagation.

    Returns "admissible" or a D_F reason:
      - "D_F:strip"     |u| < sqrt(R), not on the outer section;
      - "D_F:launch"    pv^2 <= 0 (the launch would be tangential or
                        impossible);
      - "D_F:quadrant"  u pu < 0 and the outward condition
                        u pv > -pu v fails.
    """
    u, pu, ell = q.u, q.pu, q.ell_s
    if abs(u) < math.sqrt(p.R):
        return "D_F:strip"
    R2 = p.R * p.R
    bound = 2.0 * (p.mu + ell) + p.f * R2 \
        + (p.f - 2.0 * (p.mu - ell) / R2) * u ** 4
    if pu * pu <= bound:
        return "D_F:launch"
    if u * pu < 0.0:
        # need u^4 pv^2 > R^2 pu^2, i.e. the second Prop-5 inequality
        denom = 2.0 * (p.mu - ell) - p.f * R2
        if denom <= 0.0:
            return "D_F:quadrant"
        if u ** 4 <= (2.0 * (p.mu + ell) + p.f * R2) * R2 / denom:
            return "D_F:quadrant"
    return "admissible"


def lift(q: SectionPoint, p: PhysParams) -> ParabolicState:
    """Reconstruct the full state on Sigma from (u, pu, ell_s)."""
    cls = forbidden_class(q, p)
    if cls != "admissible":
        raise ForbiddenPoint(cls)
    pv2 = _pv_squared(q.u, q.pu, q.ell_s, p)
    if pv2 <= 0.0:
        raise ForbiddenPoint("D_F:launch")
    pv = math.copysign(math.sqrt(pv2), q.u)
    return ParabolicState(u=q.u, v=p.R / q.u, pu=q.pu, pv=pv, tau=0.0, t=0.0)


def _lift_tangent(q: SectionPoint, p: PhysParams) -> np.ndarray:
    """d(pu, pv, u, v, h)/d(u, pu) of the lift, h the Stark energy."""
    s = lift(q, p)
    u, pu, pv = s.u, s.pu, s.pv
    R2 = p.R * p.R
    dpv2_du = (-4.0 * R2 * (pu * pu - 2.0 * (p.mu + q.ell_s))
               + 4.0 * p.f * R2 * R2) / u ** 5
    M0 = np.zeros((5, 2))
    # column 0: d/du
    M0[1, 0] = dpv2_du / (2.0 * pv)
    M0[2, 0] = 1.0
    M0[3, 0] = -p.R / (u * u)
    # column 1: d/dpu
    M0[0, 1] = 1.0
    M0[1, 1] = R2 * pu / (u ** 4 * pv)
    g = np.empty(4)
    K._grad_hamiltonian(np.array([s.pu, s.pv, s.u, s.v, s.t]),
                        K.STARK, p.mu, p.f, g)
    M0[4, 0] = g @ M0[:4, 0]
    M0[4, 1] = g @ M0[:4, 1]
    return M0


def _chord_turn(x0: float, y0: float, x1: float, y1: float) -> float:
    """Signed turning of the position vector along the straight segment
    from (x1, y1) back to (x0, y0)."""
    return math.atan2(x1 * y0 - y1 * x0, x1 * x0 + y1 * y0)


def _winding(s0: ParabolicState, s1: ParabolicState, theta_uv: float) -> int:
    # arg(x + iy) = 2 arg(u + iv), so the (x, y) turning along the
    # trajectory is twice the accumulated (u, v) turning
    x0, y0 = 0.5 * (s0.u ** 2 - s0.v ** 2), s0.u * s0.v
    x1, y1 = 0.5 * (s1.u ** 2 - s1.v ** 2), s1.u * s1.v
    total = 2.0 * theta_uv + _chord_turn(x0, y0, x1, y1)
    return round(total / (2.0 * math.pi))


def _apply_dir(q: SectionPoint, p: PhysParams, forward: bool,
               record: int = 0) -> MapOutcome:
    cls = forbidden_class(q, p)
    if cls != "admissible":
        return MapOutcome(OutcomeKind.Forbidden, None, None, 0.0, [], cls)
    s0 = lift(q, p)
    kind = RegimeKind.Stark if forward else RegimeKind.Kepler
    direction = 1.0 if forward else -1.0
    try:
        res = sunshadow_flow(s0, kind, p, ell_context=q.ell_s,
                             stop_at_section=True, direction=direction,
                             record=record)
    except SingularSection as e:
        return MapOutcome(OutcomeKind.Singular, None, None, 0.0, [], str(e))
    except NoConvergence as e:
        return MapOutcome(OutcomeKind.Singular, None, None, 0.0, [], str(e))
    okind = _STATUS_KIND.get(
        {FlowStatus.ReachedSection: K.ST_SECTION,
         FlowStatus.Collision: K.ST_COLLISION,
         FlowStatus.Escape: K.ST_ESCAPE,
         FlowStatus.BudgetExceeded: K.ST_BUDGET,
         FlowStatus.Singular: K.ST_SINGULAR,
         FlowStatus.ReachedTau: K.ST_TAU_END,
         FlowStatus.ReachedEvent: K.ST_EVENT}[res.status],
        OutcomeKind.Budget)
    if okind is not OutcomeKind.Returned:
        return MapOutcome(okind, None, None, res.final.t, res.events,
                          res.status.value)
    point = SectionPoint(u=res.final.u, pu=res.final.pu, ell_s=q.ell_s)
    w = _winding(s0, res.final, res.theta_uv)
    return MapOutcome(OutcomeKind.Returned, point, w, res.final.t, res.events)


def apply(q: SectionPoint, p: PhysParams, record: int = 0) -> MapOutcome:
    """One forward application of the Sun-shadow map."""
    return _apply_dir(q, p, forward=True, record=record)


def apply_inverse(q: SectionPoint, p: PhysParams, record: int = 0) -> MapOutcome:
    """One application of the inverse map (backward flow from Sigma)."""
    return _apply_dir(q, p, forward=False, record=record)


def apply_batch(pts: np.ndarray, ell_s: float, p: PhysParams,
                forward: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized map application over an (n, 2) array of (u, pu).

    Returns (labels, images, winding): labels are the scanner class
    strings, images an (n, 2) array of (u', pu') (NaN when not
    Returned), winding an int array (0 when not Returned).
    """
    n = pts.shape[0]
    labels = np.empty(n, dtype=object)
    images = np.full((n, 2), np.nan)
    winding = np.zeros(n, dtype=np.int64)
    lifted = np.zeros((n, 5))
    run = np.zeros(n, dtype=bool)
    for i in range(n):
        q = SectionPoint(pts[i, 0], pts[i, 1], ell_s)
        cls = forbidden_class(q, p)
        if cls != "admissible":
            labels[i] = "F"
            continue
        s = lift(q, p)
        lifted[i] = (s.pu, s.pv, s.u, s.v, s.t)
        run[i] = True
    idx = np.nonzero(run)[0]
    if idx.size:
        out = np.empty((idx.size, 8))
        kind = K.STARK if forward else K.KEPLER
        direction = 1.0 if forward else -1.0
        K._map_batch(lifted[idx], kind, p.mu, p.f, p.R,
                     p.escape_radius(ell_s), p.tau_budget, p.switch_budget,
                     float(p.steps_per_period), p.tol_abs, direction,
                     p.event_tol_factor * p.R, out)
        for j, i in enumerate(idx):
            okind = _STATUS_KIND.get(int(out[j, 0]), OutcomeKind.Budget)
            labels[i] = _CSV_CLASS[okind]
            if okind is OutcomeKind.Returned:
                s0 = ParabolicState(u=lifted[i, 2], v=lifted[i, 3],
                                    pu=lifted[i, 0], pv=lifted[i, 1],
                                    tau=0.0, t=0.0)
                s1 = ParabolicState(u=out[j, 3], v=out[j, 4],
                                    pu=out[j, 1], pv=out[j, 2],
                                    tau=out[j, 7], t=out[j, 5])
                images[i, 0] = s1.u
                images[i, 1] = s1.pu
                winding[i] = _winding(s0, s1, out[j, 6])
    return labels, images, winding


def jacobian(q: SectionPoint, p: PhysParams,
             method: str = "variational") -> np.ndarray:
    """2x2 derivative of the forward map at q, in (u, pu) coordinates."""
    if method == "variational":
        s0 = lift(q, p)
        M0 = _lift_tangent(q, p)
        res, M = flow_with_stm(s0, RegimeKind.Stark, p, M0,
                               ell_context=q.ell_s, stop_at_section=True)
        if res.status is not FlowStatus.ReachedSection:
            raise LostOrbit(f"map did not return: {res.status.value}")
        E = section_project(M, res.final, res.regime_final, p)
        return np.array([[E[2, 0], E[2, 1]],
                         [E[0, 0], E[0, 1]]])
    if method == "finite-difference":
        base = apply(q, p)
        if base.kind is not OutcomeKind.Returned:
            raise LostOrbit(f"map did not return: {base.kind.value}")

        def central(col: int, h: float) -> np.ndarray:
            du, dpu = (1.0, 0.0) if col == 0 else (0.0, 1.0)
            hi = apply(SectionPoint(q.u + h * du, q.pu + h * dpu, q.ell_s), p)
            lo = apply(SectionPoint(q.u - h * du, q.pu - h * dpu, q.ell_s), p)
            if hi.kind is not OutcomeKind.Returned or lo.kind is not OutcomeKind.Returned:
                raise LostOrbit("finite-difference stencil left the domain")
            return np.array([hi.point.u - lo.point.u,
                             hi.point.pu - lo.point.pu]) / (2.0 * h)

        # Ridders extrapolation: a Neville tableau over a shrinking step
        # ladder, stopping at the minimum estimated error.  This adapts the
        # effective step to the local curvature, which varies by orders of
        # magnitude between near-identity corridors and the saddle region.
        J = np.empty((2, 2))
        con, con2, ntab = 1.4, 1.4 ** 2, 12
        for col in range(2):
            scale = max(abs(q.u) if col == 0 else abs(q.pu), 1.0)
            h = 1e-3 * scale
            a = np.empty((ntab, ntab, 2))
            for _ in range(20):
                try:
                    a[0, 0] = central(col, h)
                    break
                except LostOrbit:
                    h /= 4.0
            else:
                raise LostOrbit("no admissible finite-difference step found")
            err = math.inf
            best = a[0, 0]
            for i in range(1, ntab):
                h /= con
                try:
                    a[0, i] = central(col, h)
                except LostOrbit:
                    break
                fac = con2
                for j in range(1, i + 1):
                    a[j, i] = (a[j - 1, i] * fac - a[j - 1, i - 1]) / (fac - 1.0)
                    fac *= con2
                    e = max(np.max(np.abs(a[j, i] - a[j - 1, i])),
                            np.max(np.abs(a[j, i] - a[j - 1, i - 1])))
                    if e <= err:
                        err, best = e, a[j, i]
                if np.max(np.abs(a[i, i] - a[i - 1, i - 1])) >= 2.0 * err:
                    break
            J[:, col] = best
        return J
    raise ValueError(f"unknown jacobian method: {method!r}")


def eigen2(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a real 2x2 matrix.

    The discriminant is computed as (a-d)^2 + 4bc to avoid the
    cancellation in tr^2 - 4 det.  Returns (eigvals ascending by
    modulus, eigvecs as columns); complex pairs are returned as-is.
    """
    a, b, c, d = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    disc = (a - d) ** 2 + 4.0 * b * c
    tr = a + d
    if disc >= 0.0:
        s = math.sqrt(disc)
        lam = np.array([0.5 * (tr - s), 0.5 * (tr + s)])
    else:
        s = 1j * math.sqrt(-disc)
        lam = np.array([0.5 * (tr - s), 0.5 * (tr + s)])
    order = np.argsort(np.abs(lam))
    lam = lam[order]
    vecs = []
    for l in lam:
        if abs(b) >= abs(c):
            v = np.array([b, l - a]) if (abs(b) > 0 or abs(l - a) > 0) \
                else np.array([1.0, 0.0])
        else:
            v = np.array([l - d, c])
        nv = np.linalg.norm(v)
        vecs.append(v / nv if nv > 0 else np.array([1.0, 0.0]))
    return lam, np.column_stack(vecs)


def _residual(q: SectionPoint, p: PhysParams) -> np.ndarray:
    out = apply(q, p)
    if out.kind is not OutcomeKind.Returned:
        raise LostOrbit(f"iterate left the domain: {out.kind.value}")
    return out.point.as_array() - q.as_array()


def find_fixed_point(seed: SectionPoint, p: PhysParams,
                     tol: float = 1e-10, max_iter: int = 50) -> SectionPoint:
    """Newton refinement of a fixed point of the forward map.

    Full 2-D Newton bottoms out at eps*|u|*lambda_2 (the u-coordinate
    quantization amplified along the unstable direction), which can sit
    above `tol`.  A final 1-D polish in pu alone — whose quantization is
    eps*|pu|, orders of magnitude finer — cancels the residual unstable
    component below the tolerance.
    """
    q = seed
    n2 = max(6, max_iter - 12)
    best, best_F = q, math.inf
    for _ in range(n2):
        F = _residual(q, p)
        nF = float(np.max(np.abs(F)))
        if nF < best_F:
            best, best_F = q, nF
        if nF <= tol:
            return q
        J = jacobian(q, p)
        delta = np.linalg.solve(J - np.eye(2), -F)
        q = SectionPoint(q.u + delta[0], q.pu + delta[1], q.ell_s)
    q = best
    J = jacobian(q, p)
    lam, V = eigen2(J)
    lu = np.linalg.inv(V)[1]          # left eigenvector of the unstable mode
    dg_dpu = lu @ ((J - np.eye(2)) @ np.array([0.0, 1.0]))
    for _ in range(max_iter - n2):
        F = _residual(q, p)
        nF = float(np.max(np.abs(F)))
        if nF < best_F:
            best, best_F = q, nF
        if nF <= tol:
            return q
        q = SectionPoint(q.u, q.pu - (lu @ F) / dg_dpu, q.ell_s)
    if best_F <= tol:
        return best
    raise NoConvergence(
        f"fixed-point Newton stalled at |F| = {best_F:.3e} (tol {tol:.1e})")


def spline_loop_area(u: np.ndarray, pu: np.ndarray) -> float:
    """Area enclosed by a closed loop of (u, pu) samples.

    Chord-length parameter theta, periodic cubic splines of (theta, u)
    and (theta, pu), then the Gauss-Green integral
    0.5 |oint (u pu' - pu u') dtheta| with 4-point Gauss quadrature per
    spline interval (exact for the piecewise degree-6 integrand).
    """
    uu = np.append(u, u[0])
    pp = np.append(pu, pu[0])
    theta = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(uu), np.diff(pp)))))
    if theta[-1] <= 0.0:
        raise ValueError("degenerate loop")
    su = CubicSpline(theta, uu, bc_type="periodic")
    sp = CubicSpline(theta, pp, bc_type="periodic")
    dsu, dsp = su.derivative(), sp.derivative()
    xg, wg = np.polynomial.legendre.leggauss(4)
    a, b = theta[:-1], theta[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    integ = su(nodes) * dsp(nodes) - sp(nodes) * dsu(nodes)
    return abs(0.5 * np.sum(half[:, None] * wg[None, :] * integ))


def area_experiment(u_C: float, r_C: float, c: float, m: int,
                    ell_s: float, p: PhysParams) -> dict:
    """Prop-7 style area-preservation test on the ellipse
    c pu^2 + (u - u_C)^2 = r_C^2, mapped pointwise through the map."""
    phi = 2.0 * math.pi * np.arange(m) / m
    pts = np.column_stack((u_C + r_C * np.cos(phi),
                           (r_C / math.sqrt(c)) * np.sin(phi)))
    labels, images, _ = apply_batch(pts, ell_s, p, forward=True)
    bad = np.nonzero(labels != "D")[0]
    if bad.size:
        i = int(bad[0])
        raise SampleLost(f"sample {i} at (u={pts[i, 0]:.6g}, pu={pts[i, 1]:.6g})"
                         f" did not return (class {labels[i]})")
    A0 = math.pi * r_C * r_C / c
    A1 = spline_loop_area(images[:, 0], images[:, 1])
    A0_spline = spline_loop_area(pts[:, 0], pts[:, 1])
    return {"A0": A0, "A0_spline": A0_spline, "A1": A1, "m": m,
            "u_C": u_C, "r_C": r_C, "c": c, "ell_s": ell_s}


def scan_domain(u_range: tuple[float, float], pu_range: tuple[float, float],
                nx: int, ny: int, ell_s: float, p: PhysParams) -> dict:
    """Classify a rectangular (u, pu) grid.

    Returns a dict of flat arrays u, pu, cls, winding (row-major over
    the pu-then-u grid), matching the CSV layout u,pu,class,winding.
    """
    us = np.linspace(u_range[0], u_range[1], nx)
    pus = np.linspace(pu_range[0], pu_range[1], ny)
    U, P = np.meshgrid(us, pus, indexing="ij")
    pts = np.column_stack((U.ravel(), P.ravel()))
    labels, images, winding = apply_batch(pts, ell_s, p, forward=True)
    return {"u": pts[:, 0], "pu": pts[:, 1], "cls": labels,
            "winding": winding, "images": images}
