"""Existence machinery for Sun-shadow brake orbits.

Closed-form exit geometry of the Kepler leg started on the x-axis, the
tau_u = tau_v matching equation in incomplete elliptic integral form,
the closed-form lower bracket endpoint hbar_s, and the bisection solver
that produces brake orbits (and map fixed-point seeds).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from scipy.special import ellipkinc

from .core import ParabolicState, to_cartesian, cartesian_speed
from .errors import ComplexXT, NoBracket, NoConvergence, OutOfRange, OutOfRegion
from .params import PhysParams
from .propagate import RegimeKind, propagate_to_event, sunshadow_flow
from .stark import brake_family, quartic_structure


def ell_window(p: PhysParams) -> tuple[float, float]:
    """Interval of ell_s on which the brake-orbit bracket is guaranteed."""
    disc = p.mu ** 2 + (9.0 / 16.0) * (p.f * p.R ** 2) ** 2 - 2.5 * p.f * p.R ** 2 * p.mu
    if disc < 0.0:
        raise OutOfRange("no admissible ell_s window for these parameters")
    root = math.sqrt(disc)
    base = -1.25 * p.f * p.R ** 2
    return base - root, base + root


@dataclass(frozen=True)
class ExitGeometry:
    """Shadow-exit data of the Kepler arc from (x0, 0) with p_x = 0."""
    ell_s: float
    ell_k: float
    a_k: float
    x0: float
    x_T: float
    xiE: float
    x_E: float
    hs: float


def exit_geometry(ell_s: float, x0: float, p: PhysParams) -> ExitGeometry:
    ell_k = ell_s + 0.5 * p.f * p.R ** 2
    a_k = (p.mu + ell_k) / (p.mu - ell_k)
    rad = x0 * x0 - a_k * p.R ** 2
    if rad < 0.0:
        raise ComplexXT("x0^2 < a_k R^2: Kepler arc never reaches y = R")
    x_T = math.sqrt(rad)
    xiE = x0 + x_T
    x_E = 0.5 * xiE - 0.5 * p.R ** 2 / xiE
    hs = -(p.mu + ell_k) / (2.0 * x0) - 0.5 * p.f * xiE + 0.5 * p.f * p.R ** 2 / xiE
    return ExitGeometry(ell_s=ell_s, ell_k=ell_k, a_k=a_k, x0=x0,
                        x_T=x_T, xiE=xiE, x_E=x_E, hs=hs)


def hs_of_x0(ell_s: float, x0: float, p: PhysParams) -> float:
    return exit_geometry(ell_s, x0, p).hs


def x0_bounds(ell_s: float, p: PhysParams) -> tuple[float, float]:
    """Window (x0_minus, x0_plus) that contains the root of hs(x0) = hs*."""
    bf = brake_family(ell_s, p)
    ell_k = ell_s + 0.5 * p.f * p.R ** 2
    a_k = (p.mu + ell_k) / (p.mu - ell_k)
    xi_star = bf.xi_star
    C = math.sqrt(1.0 - 4.0 * a_k * p.R ** 2 / xi_star ** 2)
    C1 = 0.5 * p.R * math.sqrt(a_k)
    C2 = p.R * math.sqrt((1.0 - C + 2.0 * a_k) / (1.0 + C))
    return 0.5 * xi_star + C1, 0.5 * (xi_star + C2)


def x0_from_hs(ell_s: float, hs: float, p: PhysParams) -> float:
    """Invert the strictly decreasing hs(x0) on [xi*/2, infinity)."""
    bf = brake_family(ell_s, p)
    lo = 0.5 * bf.xi_star
    if hs_of_x0(ell_s, lo, p) < hs:
        raise OutOfRange("hs above hs(xi*/2): no x0 on the admissible ray")
    hi = 2.0 * lo
    for _ in range(200):
        if hs_of_x0(ell_s, hi, p) < hs:
            break
        hi *= 2.0
    else:
        raise NoConvergence("hs(x0) never drops below the target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hs_of_x0(ell_s, mid, p) >= hs:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def _xiE_at(ell_s: float, hs: float, p: PhysParams) -> float:
    return exit_geometry(ell_s, x0_from_hs(ell_s, hs, p), p).xiE


def _roots_u_delta(hs_star: float, delta: float, f: float) -> tuple[float, float]:
    """xi_1, xi_2 at hs = hs* - delta, organized so the near-double-root
    discriminant h^2 - f^2 xi*^2 = delta*(delta - 2 hs*) is exact in delta."""
    s = math.sqrt(delta * (delta - 2.0 * hs_star))
    return (delta - hs_star + s) / f, (delta - hs_star - s) / f


def _tau_u_delta(ell_s: float, delta: float, xiE: float, p: PhysParams,
                 hs_star: float) -> float:
    if delta <= 0.0:
        raise OutOfRegion("tau_u requires hs < hs*")
    xi1, xi2 = _roots_u_delta(hs_star, delta, p.f)
    if xiE <= xi1:
        raise OutOfRegion("exit point not on the unbounded u-component")
    r_xi = math.sqrt((xiE - xi1) / (xiE - xi2))
    return ellipkinc(math.asin(r_xi), xi2 / xi1) / math.sqrt(p.f * xi1)


def _tau_v_delta(ell_s: float, delta: float, xiE: float, p: PhysParams,
                 hs_star: float) -> float:
    if delta <= 0.0:
        raise OutOfRegion("tau_v requires hs < hs*")
    hs = hs_star - delta
    rad = (hs / p.f) ** 2 + 2.0 * (p.mu - ell_s) / p.f
    s = math.sqrt(rad)
    eta1 = hs / p.f + s
    d_eta = 2.0 * s
    s2 = 1.0 - p.R ** 2 / (xiE * eta1)
    if s2 < 0.0:
        raise OutOfRegion("exit point outside the v oscillation range")
    return ellipkinc(math.asin(math.sqrt(s2)), eta1 / d_eta) / math.sqrt(p.f * d_eta)


def tau_u(ell_s: float, hs: float, p: PhysParams, xiE: float | None = None) -> float:
    """Fictitious time from the shadow exit u = sqrt(xiE) to the turning
    point u_1 = sqrt(xi_1) of the Stark leg."""
    bf = brake_family(ell_s, p)
    if hs >= bf.hs_star:
        raise OutOfRegion("tau_u requires hs < hs*")
    if xiE is None:
        xiE = _xiE_at(ell_s, hs, p)
    return _tau_u_delta(ell_s, bf.hs_star - hs, xiE, p, bf.hs_star)


def tau_v(ell_s: float, hs: float, p: PhysParams, xiE: float | None = None) -> float:
    """Fictitious time from the shadow exit v = R/sqrt(xiE) to the
    turning point v_1 = sqrt(eta_1) of the Stark leg."""
    bf = brake_family(ell_s, p)
    if hs >= bf.hs_star:
        raise OutOfRegion("tau_v requires hs < hs*")
    if xiE is None:
        xiE = _xiE_at(ell_s, hs, p)
    return _tau_v_delta(ell_s, bf.hs_star - hs, xiE, p, bf.hs_star)


def hs_bar(ell_s: float, p: PhysParams) -> float:
    """Closed-form energy with tau_u < tau_v, the lower bracket endpoint."""
    bf = brake_family(ell_s, p)
    xi_star = bf.xi_star
    ell_k = ell_s + 0.5 * p.f * p.R ** 2
    a_k = (p.mu + ell_k) / (p.mu - ell_k)
    C = math.sqrt(1.0 - 4.0 * a_k * p.R ** 2 / xi_star ** 2)
    C2 = p.R * math.sqrt((1.0 - C + 2.0 * a_k) / (1.0 + C))
    w = math.sqrt(2.0 * (p.mu - ell_s) / p.f)
    K1 = math.sqrt(2.0) * math.sqrt(1.0 + w / xi_star)
    K2 = math.asin(math.sqrt(1.0 - p.R ** 2 / (xi_star * bf.eta1_star)))
    half_dxi = 0.5 * C2 * (K1 / K2) * (2.0 + K1 / K2)
    return -p.f * math.hypot(xi_star, half_dxi)


@dataclass(frozen=True)
class BrakeSolution:
    """One Sun-shadow brake orbit, parametrised by ell_s."""
    ell_s: float
    x0_star: float
    hs_hat: float
    xiE: float
    puE: float
    brake_point: tuple[float, float]
    residual_tau: float
    tau_u: float
    tau_v: float
    brake_speed: float
    brackets: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ell_s": self.ell_s,
            "x0_star": self.x0_star,
            "hs_hat": self.hs_hat,
            "xiE": self.xiE,
            "puE": self.puE,
            "brake_point": list(self.brake_point),
            "residual_tau": self.residual_tau,
            "tau_u": self.tau_u,
            "tau_v": self.tau_v,
            "brake_speed": self.brake_speed,
            "brackets": [list(b) for b in self.brackets],
        }

    def to_json(self, p: PhysParams) -> str:
        payload = {"solution": self.to_dict(), "parameters": p.to_dict()}
        return json.dumps(payload, indent=2, sort_keys=True)


def initial_state(ell_s: float, x0: float, p: PhysParams) -> ParabolicState:
    """Axis start of the brake orbit: (x0, 0) with p_x = 0, p_y > 0."""
    ell_k = ell_s + 0.5 * p.f * p.R ** 2
    return ParabolicState(u=math.sqrt(2.0 * x0), v=0.0, pu=0.0,
                          pv=math.sqrt(2.0 * (p.mu - ell_k)), tau=0.0, t=0.0)


def brake_state(sol: "BrakeSolution", p: PhysParams) -> ParabolicState:
    """Propagate the solution to its zero-velocity point."""
    s0 = initial_state(sol.ell_s, sol.x0_star, p)
    leg = propagate_to_event(s0, RegimeKind.Kepler, p, ell_context=sol.ell_s)
    exit_state = leg.final
    res = sunshadow_flow(exit_state, RegimeKind.Stark, p, ell_context=sol.ell_s,
                         tau_end=exit_state.tau + sol.tau_u)
    return res.final


def g_tau(ell_s: float, delta: float, p: PhysParams) -> float:
    """tau_u - tau_v at hs = hs* - delta, evaluated cancellation-free."""
    bf = brake_family(ell_s, p)
    xiE = _xiE_at(ell_s, bf.hs_star - delta, p)
    return (_tau_u_delta(ell_s, delta, xiE, p, bf.hs_star)
            - _tau_v_delta(ell_s, delta, xiE, p, bf.hs_star))


def solve_brake(ell_s: float, p: PhysParams, n_scan: int = 64,
                delta_guard_rel: float = 1e-12) -> BrakeSolution:
    """Bisect g = tau_u - tau_v in log(delta), delta = hs* - hs, over
    [delta_guard, hs* - hbar_s].

    tau_u diverges logarithmically as delta -> 0, so the root sits at
    delta orders of magnitude below the bracket width; bisecting in hs
    itself cannot resolve |tau_u - tau_v| below ~1e-9 at double
    precision.  The delta parametrisation keeps the quartic discriminant
    delta*(delta - 2 hs*) exact and the residual at ~1e-11.

    Every sign-change bracket found on the log-spaced scan grid is
    reported; the returned solution is the one with smallest hs_hat.
    """
    lo_w, hi_w = ell_window(p)
    if not lo_w < ell_s < hi_w:
        raise OutOfRange("ell_s outside the brake-orbit window")
    bf = brake_family(ell_s, p)
    d_hi = bf.hs_star - hs_bar(ell_s, p)       # delta at hbar_s, g < 0 there
    d_lo = delta_guard_rel * abs(bf.hs_star)   # g > 0 here (tau_u divergence)

    def g(ld: float) -> float:
        return g_tau(ell_s, math.exp(ld), p)

    la, lb = math.log(d_lo), math.log(d_hi)
    grid = [la + (lb - la) * i / n_scan for i in range(n_scan + 1)]
    vals = [g(x) for x in grid]
    brackets = [(grid[i], grid[i + 1]) for i in range(n_scan)
                if (vals[i] < 0.0) != (vals[i + 1] < 0.0)]
    if not brackets:
        raise NoBracket("tau_u - tau_v does not change sign on [hbar_s, hs*)")

    lo, hi = brackets[-1]      # largest delta bracket = smallest hs_hat
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm < 0.0) == (glo < 0.0):
            lo, glo = mid, gm
        else:
            hi = mid
        if hi - lo <= 1e-13:
            break
    ld_hat = 0.5 * (lo + hi)
    # one Newton polish with a numerical derivative in log(delta)
    dl = 1e-6
    dg = (g(ld_hat + dl) - g(ld_hat - dl)) / (2.0 * dl)
    if dg != 0.0:
        step = -g(ld_hat) / dg
        if abs(step) < (hi - lo) + dl:
            ld_hat += step
    delta_hat = math.exp(ld_hat)
    hs_hat = bf.hs_star - delta_hat

    x0_star = x0_from_hs(ell_s, hs_hat, p)
    geo = exit_geometry(ell_s, x0_star, p)
    tu = _tau_u_delta(ell_s, delta_hat, geo.xiE, p, bf.hs_star)
    tv = _tau_v_delta(ell_s, delta_hat, geo.xiE, p, bf.hs_star)
    puE2 = 2.0 * hs_hat * geo.xiE + 2.0 * (p.mu + ell_s) + p.f * geo.xiE ** 2
    puE = math.sqrt(max(puE2, 0.0))

    hs_brackets = [(bf.hs_star - math.exp(b_hi), bf.hs_star - math.exp(b_lo))
                   for b_lo, b_hi in brackets]
    sol = BrakeSolution(ell_s=ell_s, x0_star=x0_star, hs_hat=hs_hat,
                        xiE=geo.xiE, puE=puE, brake_point=(0.0, 0.0),
                        residual_tau=abs(tu - tv), tau_u=tu, tau_v=tv,
                        brake_speed=0.0, brackets=hs_brackets)
    bs = brake_state(sol, p)
    cs = to_cartesian(bs)
    return BrakeSolution(ell_s=ell_s, x0_star=x0_star, hs_hat=hs_hat,
                         xiE=geo.xiE, puE=puE, brake_point=(cs.x, cs.y),
                         residual_tau=abs(tu - tv), tau_u=tu, tau_v=tv,
                         brake_speed=cartesian_speed(bs), brackets=hs_brackets)
