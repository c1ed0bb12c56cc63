"""Numerical flow of both regimes, regime switching, transition matrices,
and the analytic Kepler shadow-transit solver.

The heavy lifting happens in the compiled kernels of `_kernels`; this
module owns the value types and the contracts.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import ParabolicState, to_cartesian
from .errors import NoConvergence, NoExitRoot, SingularSection
from .params import PhysParams


class RegimeKind(enum.IntEnum):
    Kepler = K.KEPLER
    Stark = K.STARK


@dataclass(frozen=True)
class Regime:
    """Active dynamics plus the energy frozen at regime entry."""
    kind: RegimeKind
    h: float


class FlowStatus(enum.Enum):
    ReachedSection = "ReachedSection"
    Collision = "Collision"
    Escape = "Escape"
    BudgetExceeded = "BudgetExceeded"
    Singular = "Singular"
    ReachedTau = "ReachedTau"
    ReachedEvent = "ReachedEvent"


_STATUS = {
    K.ST_SECTION: FlowStatus.ReachedSection,
    K.ST_COLLISION: FlowStatus.Collision,
    K.ST_ESCAPE: FlowStatus.Escape,
    K.ST_BUDGET: FlowStatus.BudgetExceeded,
    K.ST_SINGULAR: FlowStatus.Singular,
    K.ST_TAU_END: FlowStatus.ReachedTau,
    K.ST_EVENT: FlowStatus.ReachedEvent,
}


@dataclass(frozen=True)
class CrossingEvent:
    tau: float
    state: ParabolicState
    surface: int          # +1 for uv = R, -1 for uv = -R
    direction: str        # "entering-shadow" or "leaving-shadow"
    delta_h: float
    delta_ell: float
    regime_before: RegimeKind
    regime_after: RegimeKind


@dataclass(frozen=True)
class FlowResult:
    final: ParabolicState
    events: list[CrossingEvent]
    status: FlowStatus
    regime_log: list[Regime]
    regime_final: Regime
    tau_elapsed: float
    theta_uv: float                 # accumulated rotation of (u, v)
    trajectory: np.ndarray | None = None


def field(regime: Regime, s: ParabolicState, p: PhysParams) -> np.ndarray:
    """Derivative of (pu, pv, u, v, t) with respect to tau."""
    out = np.empty(5)
    K._field(_to_y(s), int(regime.kind), regime.h, p.f, out)
    return out


def _to_y(s: ParabolicState) -> np.ndarray:
    return np.array([s.pu, s.pv, s.u, s.v, s.t])


def _from_y(y: np.ndarray, tau: float) -> ParabolicState:
    return ParabolicState(u=y[2], v=y[3], pu=y[0], pv=y[1], tau=tau, t=y[4])


def freeze_regime(kind: RegimeKind, s: ParabolicState, p: PhysParams) -> Regime:
    h = K._hamiltonian(_to_y(s), int(kind), p.mu, p.f)
    return Regime(kind=kind, h=h)


def step_gauss(regime: Regime, s: ParabolicState, dtau: float, p: PhysParams) -> ParabolicState:
    """One 3-stage Gauss collocation step (order 6), forward or backward."""
    y = _to_y(s)
    y_out = np.empty(5)
    dummy = np.empty((1, 1))
    ok = K._gauss_step(y, dummy, 0, int(regime.kind), regime.h, p.f, dtau, p.tol_abs, y_out, dummy)
    if not ok:
        raise NoConvergence("Gauss stage iteration did not converge")
    return _from_y(y_out, s.tau + dtau)


def _run(s, kind, p, ell_context, stop_mode, tau_end=0.0, direction=1.0,
         record=0, nvar=0, M0=None):
    y = _to_y(s)
    M = np.zeros((5, max(nvar, 1)))
    if nvar > 0:
        M[:, :] = M0
    ev = np.zeros((p.switch_budget + 2, 11))
    traj = np.zeros((record, 9)) if record else np.zeros((0, 9))
    r_esc = p.escape_radius(ell_context)
    status, regime_f, h_f, tau, n_ev, n_traj, theta = K._flow_core(
        y, M, nvar, int(kind), p.mu, p.f, p.R, r_esc, p.tau_budget,
        p.switch_budget, float(p.steps_per_period), p.tol_abs,
        stop_mode, tau_end, direction, ev, traj, p.event_tol_factor * p.R,
    )
    events = []
    regime_log = [Regime(RegimeKind(int(kind)), K._hamiltonian(_to_y(s), int(kind), p.mu, p.f))]
    for i in range(n_ev):
        row = ev[i]
        st = ParabolicState(u=row[4], v=row[5], pu=row[2], pv=row[3],
                            tau=s.tau + row[0], t=row[1])
        after = RegimeKind(int(row[8]))
        events.append(CrossingEvent(
            tau=s.tau + row[0], state=st, surface=int(row[6]),
            direction="entering-shadow" if after == RegimeKind.Kepler else "leaving-shadow",
            delta_h=row[9], delta_ell=row[10],
            regime_before=RegimeKind(int(row[7])), regime_after=after,
        ))
        regime_log.append(Regime(after, K._hamiltonian(_to_y(st), int(after), p.mu, p.f)))
    if status == K.ST_SINGULAR:
        raise SingularSection("tangential shadow-boundary contact")
    if status == K.ST_NOCONV:
        raise NoConvergence("collocation stage iteration stalled")
    result = FlowResult(
        final=_from_y(y, s.tau + tau), events=events, status=_STATUS[status],
        regime_log=regime_log, regime_final=Regime(RegimeKind(int(regime_f)), h_f),
        tau_elapsed=tau, theta_uv=theta,
        trajectory=traj[:n_traj].copy() if record else None,
    )
    return result, (M if nvar > 0 else None), (regime_f, h_f)


def propagate_to_event(s: ParabolicState, kind: RegimeKind, p: PhysParams,
                       ell_context: float | None = None,
                       direction: float = 1.0) -> FlowResult:
    """Integrate one leg until the first guarded boundary crossing,
    collision, escape, or budget exhaustion."""
    if ell_context is None:
        ell_context = K._laplace_lenz(_to_y(s), K.STARK, p.mu, p.f)
    res, _, _ = _run(s, kind, p, ell_context, K.STOP_EVENT, direction=direction)
    return res


def sunshadow_flow(s: ParabolicState, kind: RegimeKind, p: PhysParams,
                   ell_context: float | None = None,
                   stop_at_section: bool = False,
                   tau_end: float | None = None,
                   direction: float = 1.0,
                   record: int = 0) -> FlowResult:
    """Chain regime legs, toggling dynamics at each guarded crossing.

    Energy leaps at the crossings emerge from re-freezing h; the measured
    delta_h, delta_ell are logged on each CrossingEvent.
    """
    if ell_context is None:
        ell_context = K._laplace_lenz(_to_y(s), K.STARK, p.mu, p.f)
    if stop_at_section:
        mode, te = K.STOP_SECTION, 0.0
    elif tau_end is not None:
        mode, te = K.STOP_TAU, tau_end - s.tau
    else:
        mode, te = K.STOP_TAU, math.copysign(p.tau_budget * 2, direction)
    res, _, _ = _run(s, kind, p, ell_context, mode, tau_end=te,
                     direction=direction, record=record)
    return res


def flow_with_stm(s: ParabolicState, kind: RegimeKind, p: PhysParams,
                  M0: np.ndarray,
                  ell_context: float | None = None,
                  stop_at_section: bool = False,
                  tau_end: float | None = None,
                  direction: float = 1.0) -> tuple[FlowResult, np.ndarray]:
    """Flow with the 5 x k variational matrix (rows pu, pv, u, v, h).

    Saltation corrections (field change plus h re-freeze) are applied at
    every regime switch.  The returned matrix is NOT section-projected;
    use `section_project` for map Jacobians.
    """
    if ell_context is None:
        ell_context = K._laplace_lenz(_to_y(s), K.STARK, p.mu, p.f)
    nvar = M0.shape[1]
    if stop_at_section:
        mode, te = K.STOP_SECTION, 0.0
    else:
        mode, te = K.STOP_TAU, (tau_end - s.tau if tau_end is not None else p.tau_budget)
    res, M, _ = _run(s, kind, p, ell_context, mode, tau_end=te,
                     direction=direction, nvar=nvar, M0=M0)
    return res, M


def leg_stm(s: ParabolicState, kind: RegimeKind, p: PhysParams,
            tau_end: float, ell_context: float | None = None) -> tuple[FlowResult, np.ndarray]:
    """Frozen-h 4x4 transition matrix of a single leg over fixed tau.

    The h-row of the seed is zero, so the h-coupling column never
    activates and det of the 4x4 block stays 1 (divergence-free field).
    """
    M0 = np.zeros((5, 4))
    M0[:4, :4] = np.eye(4)
    res, M = flow_with_stm(s, kind, p, M0, ell_context=ell_context, tau_end=tau_end)
    return res, M[:4, :4]


def full_stm(s: ParabolicState, kind: RegimeKind, p: PhysParams,
             tau_end: float, ell_context: float | None = None) -> tuple[FlowResult, np.ndarray]:
    """4x4 derivative of the fixed-tau hybrid flow w.r.t. the initial
    state, including the dependence of every frozen h on that state."""
    y0 = _to_y(s)
    g = np.empty(4)
    K._grad_hamiltonian(y0, int(kind), p.mu, p.f, g)
    M0 = np.zeros((5, 4))
    M0[:4, :4] = np.eye(4)
    M0[4, :] = g
    res, M = flow_with_stm(s, kind, p, M0, ell_context=ell_context, tau_end=tau_end)
    return res, M[:4, :4]


def section_project(M: np.ndarray, final: ParabolicState, regime: Regime,
                    p: PhysParams) -> np.ndarray:
    """Project a post-saltation variational matrix onto the section
    tangent at the final crossing: E = (I - X n^T / (n . X)) M."""
    y = _to_y(final)
    X = np.empty(5)
    K._field(y, int(regime.kind), regime.h, p.f, X)
    X5 = np.array([X[0], X[1], X[2], X[3], 0.0])
    n = np.array([0.0, 0.0, final.v, final.u, 0.0])
    denom = n @ X5
    if abs(denom) < 1e-13 * (1.0 + abs(final.pu * final.v) + abs(final.pv * final.u)):
        raise SingularSection("tangential section crossing")
    return M - np.outer(X5, n @ M) / denom


def kepler_transit_analytic(entry: ParabolicState, p: PhysParams) -> ParabolicState:
    """Exit state of a Kepler shadow transit entering on uv = -R and
    leaving through uv = R, from the degree-8 polynomial in u.

    The returned state carries the entry tau and t unchanged (the
    algebra does not produce elapsed time).
    """
    u_i, v_i = entry.u, entry.v
    if abs(u_i * v_i + p.R) > 1e-6 * p.R:
        raise NoExitRoot("entry state not on uv = -R")
    if u_i <= math.sqrt(p.R):
        raise NoExitRoot("entry requires u > sqrt(R)")
    if entry.pv * u_i + entry.pu * v_i <= 0.0:
        raise NoExitRoot("entry velocity not pointing into the shadow")

    y = _to_y(entry)
    h_k = K._hamiltonian(y, K.KEPLER, p.mu, p.f)
    ell_k = K._laplace_lenz(y, K.KEPLER, p.mu, p.f)
    c_k = 0.5 * (entry.pv * u_i - entry.pu * v_i)
    mu, R = p.mu, p.R

    # quartic in xi = u^2
    coeffs = np.array([
        (mu - ell_k) ** 2,
        -4.0 * (mu - ell_k) * c_k ** 2,
        2.0 * (R * R * (ell_k ** 2 - mu ** 2 - 4.0 * c_k ** 2 * h_k) + 2.0 * c_k ** 4),
        -4.0 * (mu + ell_k) * R * R * c_k ** 2,
        (mu + ell_k) ** 2 * R ** 4,
    ])
    roots = np.roots(coeffs)

    cart_i = to_cartesian(entry)
    aky_i = cart_i.px * (cart_i.px * cart_i.y - cart_i.py * cart_i.x) - mu * cart_i.y / cart_i.r

    best = None
    best_resid = math.inf
    for xi in roots:
        if abs(xi.imag) > 1e-9 * max(1.0, abs(xi.real)):
            continue
        xi = xi.real
        if xi < R:
            continue
        u_o = math.copysign(math.sqrt(xi), u_i)
        v_o = R / u_o
        pu2 = 2.0 * h_k * xi + 2.0 * (mu + ell_k)
        pv2 = 2.0 * h_k * v_o * v_o + 2.0 * (mu - ell_k)
        if pu2 < 0.0 or pv2 < 0.0:
            continue
        for su in (1.0, -1.0):
            for sv in (1.0, -1.0):
                pu_o = su * math.sqrt(pu2)
                pv_o = sv * math.sqrt(pv2)
                cscale = max(1.0, abs(c_k))
                if abs(0.5 * (pv_o * u_o - pu_o * v_o) - c_k) > 1e-6 * cscale:
                    continue
                if u_o * pv_o + v_o * pu_o <= 0.0:  # must exit with p_y > 0
                    continue
                cand = ParabolicState(u=u_o, v=v_o, pu=pu_o, pv=pv_o,
                                      tau=entry.tau, t=entry.t)
                cc = to_cartesian(cand)
                aky = cc.px * (cc.px * cc.y - cc.py * cc.x) - mu * cc.y / cc.r
                resid = abs(aky - aky_i) / max(mu, abs(aky_i))
                if resid < best_resid:
                    best_resid = resid
                    best = cand
    if best is None or best_resid > 1e-5:
        raise NoExitRoot("no admissible exit root on uv = R")

    # Squaring the angular-momentum constraint can make the selected xi a
    # double root of the quartic, halving its accuracy.  Polish on the
    # unsquared constraint, where the root stays simple.
    su = math.copysign(1.0, best.pu) if best.pu != 0.0 else 1.0
    sv = math.copysign(1.0, best.pv) if best.pv != 0.0 else 1.0
    s_u = math.copysign(1.0, u_i)

    def g(xi: float) -> float:
        pu2 = 2.0 * h_k * xi + 2.0 * (mu + ell_k)
        pv2 = 2.0 * h_k * R * R / xi + 2.0 * (mu - ell_k)
        if pu2 < 0.0 or pv2 < 0.0:
            return math.nan
        uo = s_u * math.sqrt(xi)
        return 0.5 * (sv * math.sqrt(pv2) * uo - su * math.sqrt(pu2) * R / uo) - c_k

    xi0 = best.u ** 2
    xi1 = xi0 * (1.0 + 1e-7)
    g0, g1 = g(xi0), g(xi1)
    for _ in range(60):
        if not (math.isfinite(g0) and math.isfinite(g1)) or g1 == g0:
            break
        xi2 = xi1 - g1 * (xi1 - xi0) / (g1 - g0)
        if not math.isfinite(xi2) or xi2 <= R:
            break
        xi0, g0, xi1, g1 = xi1, g1, xi2, g(xi2)
        if abs(xi1 - xi0) <= 1e-15 * abs(xi1):
            break
    if math.isfinite(g1) and abs(g1) <= abs(g(best.u ** 2)):
        xi = xi1
        u_o = s_u * math.sqrt(xi)
        v_o = R / u_o
        pu_o = su * math.sqrt(max(2.0 * h_k * xi + 2.0 * (mu + ell_k), 0.0))
        pv_o = sv * math.sqrt(max(2.0 * h_k * v_o * v_o + 2.0 * (mu - ell_k), 0.0))
        best = ParabolicState(u=u_o, v=v_o, pu=pu_o, pv=pv_o,
                              tau=entry.tau, t=entry.t)
    return best


def polynomial_residual(exit_state: ParabolicState, entry: ParabolicState, p: PhysParams) -> float:
    """Scaled residual of the transit polynomial at the exit u root."""
    y = _to_y(entry)
    h_k = K._hamiltonian(y, K.KEPLER, p.mu, p.f)
    ell_k = K._laplace_lenz(y, K.KEPLER, p.mu, p.f)
    c_k = 0.5 * (entry.pv * entry.u - entry.pu * entry.v)
    mu, R = p.mu, p.R
    coeffs = np.array([
        (mu - ell_k) ** 2,
        -4.0 * (mu - ell_k) * c_k ** 2,
        2.0 * (R * R * (ell_k ** 2 - mu ** 2 - 4.0 * c_k ** 2 * h_k) + 2.0 * c_k ** 4),
        -4.0 * (mu + ell_k) * R * R * c_k ** 2,
        (mu + ell_k) ** 2 * R ** 4,
    ])
    xi = exit_state.u ** 2
    val = np.polyval(coeffs, xi)
    scale = max(abs(c * xi ** (4 - i)) for i, c in enumerate(coeffs))
    return abs(val) / scale
