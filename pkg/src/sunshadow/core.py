"""Coordinate systems, canonical transform, fictitious time, first integrals.

Cartesian phase space is (x, y, px, py); the parabolic chart is
(pu, pv, u, v) with x = (u^2 - v^2)/2, y = u*v, and the fictitious time
tau defined by dt/dtau = u^2 + v^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import BranchUndefined, DegenerateOrigin
from .params import PhysParams


@dataclass(frozen=True)
class CartesianState:
    x: float
    y: float
    px: float
    py: float
    t: float = 0.0

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class ParabolicState:
    u: float
    v: float
    pu: float
    pv: float
    tau: float = 0.0
    t: float = 0.0

    @property
    def rho(self) -> float:
        """u^2 + v^2 = 2r, the time-rate factor."""
        return self.u * self.u + self.v * self.v


@dataclass(frozen=True)
class IntegralSet:
    h_k: float
    c_k: float
    A_k: tuple[float, float]
    ell_k: float
    h_s: float
    ell_s: float


def to_parabolic(s: CartesianState, branch: int = +1, tau: float = 0.0) -> ParabolicState:
    """Canonical transform (x, y, px, py) -> (pu, pv, u, v).

    branch selects the sign of u; the two branches cover the double-valued
    parabolic chart.
    """
    r = math.hypot(s.x, s.y)
    if r == 0.0:
        raise DegenerateOrigin("transform undefined at the origin")
    usq = s.x + r
    if usq <= 0.0:
        if s.y != 0.0:
            raise BranchUndefined("u = 0 with y != 0")
        # negative x axis: u = 0, v = sqrt(-2x)
        u = 0.0
        v = math.copysign(math.sqrt(-2.0 * s.x), branch)
    else:
        u = math.copysign(math.sqrt(usq), branch)
        v = s.y / u
    pu = u * s.px + v * s.py
    pv = -v * s.px + u * s.py
    return ParabolicState(u=u, v=v, pu=pu, pv=pv, tau=tau, t=s.t)


def to_cartesian(s: ParabolicState) -> CartesianState:
    """Inverse transform; the momentum map is linear for fixed (u, v)."""
    rho = s.rho
    if rho == 0.0:
        raise DegenerateOrigin("transform undefined at u = v = 0")
    x = 0.5 * (s.u * s.u - s.v * s.v)
    y = s.u * s.v
    px = (s.u * s.pu - s.v * s.pv) / rho
    py = (s.v * s.pu + s.u * s.pv) / rho
    return CartesianState(x=x, y=y, px=px, py=py, t=s.t)


def time_rate(s: ParabolicState) -> float:
    """dt/dtau = u^2 + v^2 (equals 2r)."""
    return s.rho


def hamiltonian_kepler(s: ParabolicState, p: PhysParams) -> float:
    rho = s.rho
    if rho == 0.0:
        raise DegenerateOrigin("Hamiltonian undefined at u = v = 0")
    return (s.pu * s.pu + s.pv * s.pv - 4.0 * p.mu) / (2.0 * rho)


def hamiltonian_stark(s: ParabolicState, p: PhysParams) -> float:
    return hamiltonian_kepler(s, p) - 0.5 * p.f * (s.u * s.u - s.v * s.v)


def angular_momentum(s: ParabolicState) -> float:
    """C_k = (pv*u - pu*v)/2, identical to the Cartesian angular momentum."""
    return 0.5 * (s.pv * s.u - s.pu * s.v)


def laplace_lenz_kepler(s: ParabolicState, p: PhysParams) -> float:
    """L_k, the opposite of the x-component of the Laplace-Lenz vector."""
    rho = s.rho
    if rho == 0.0:
        raise DegenerateOrigin("integral undefined at u = v = 0")
    u2, v2 = s.u * s.u, s.v * s.v
    return (s.pu * s.pu * v2 - s.pv * s.pv * u2) / (2.0 * rho) + p.mu * (u2 - v2) / rho


def laplace_lenz_stark(s: ParabolicState, p: PhysParams) -> float:
    """L_s = L_k - f u^2 v^2 / 2, conserved by the Stark flow."""
    return laplace_lenz_kepler(s, p) - 0.5 * p.f * (s.u * s.u) * (s.v * s.v)


def integrals(s: ParabolicState, p: PhysParams) -> IntegralSet:
    """All first integrals of both regimes evaluated on one state."""
    c = to_cartesian(s)
    r = c.r
    cross = c.px * c.y - c.py * c.x  # = -C_k
    A_k = (-c.py * cross - p.mu * c.x / r, c.px * cross - p.mu * c.y / r)
    return IntegralSet(
        h_k=hamiltonian_kepler(s, p),
        c_k=angular_momentum(s),
        A_k=A_k,
        ell_k=laplace_lenz_kepler(s, p),
        h_s=hamiltonian_stark(s, p),
        ell_s=laplace_lenz_stark(s, p),
    )


def cartesian_speed(s: ParabolicState) -> float:
    c = to_cartesian(s)
    return math.hypot(c.px, c.py)


def with_tau(s: ParabolicState, tau: float) -> ParabolicState:
    return replace(s, tau=tau)
