"""Closed-form analysis of the pure Stark problem.

Everything here follows from the two quartics

    U(u) = f u^4 + 2 h_s u^2 + 2 (mu + ell_s),
    V(v) = -f v^4 + 2 h_s v^2 + 2 (mu - ell_s),

whose sign patterns split the (ell_s, h_s/sqrt(f)) plane into four
regions of qualitatively different motion, plus their boundaries.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import InvalidRatio, NotFound, OutOfRange, UnboundedU
from .params import PhysParams

#: relative tolerance for "on a boundary", in (ell_s/mu, h_s/sqrt(f mu)) units
BOUNDARY_RTOL = 1e-9


class Region(enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    B_I_II = "B_I_II"          # ell_s = -mu, h_s > 0
    B_I_IV = "B_I_IV"          # ell_s = -mu, h_s < 0
    B_II_IV = "B_II_IV"        # h_s/sqrt(f) = -sqrt(2(mu+ell_s)), brake family
    B_II_III = "B_II_III"      # ell_s = mu, h_s > 0
    B_II_edge = "B_II_edge"    # ell_s = mu, -2 sqrt(mu) < h_s/sqrt(f) < 0
    B_IV_edge = "B_IV_edge"    # ell_s = mu, h_s/sqrt(f) < -2 sqrt(mu)
    B_III_edge = "B_III_edge"  # ell_s > mu, h_s/sqrt(f) = sqrt(2(ell_s-mu))
    P_I_II_IV = "P_I_II_IV"    # (-mu, 0)
    P_II_III = "P_II_III"      # (mu, 0)
    P_II_IV = "P_II_IV"        # (mu, -2 sqrt(mu)): fixed points of the flow
    Forbidden = "Forbidden"


@dataclass(frozen=True)
class RegionClass:
    label: Region
    bounded_u_branch_exists: bool


@dataclass(frozen=True)
class QuarticStructure:
    """Roots of U in xi = u^2 and of V in eta = v^2, kept complex-safe."""

    xi1: complex
    xi2: complex
    eta1: complex
    eta2: complex
    xi_real: bool
    eta_real: bool

    @property
    def u_roots(self) -> list[float]:
        out = []
        for xi in (self.xi1, self.xi2):
            if abs(xi.imag) == 0.0 and xi.real >= 0.0:
                r = math.sqrt(xi.real)
                out.extend([r, -r])
        return out

    @property
    def v_roots(self) -> list[float]:
        out = []
        for eta in (self.eta1, self.eta2):
            if abs(eta.imag) == 0.0 and eta.real >= 0.0:
                r = math.sqrt(eta.real)
                out.extend([r, -r])
        return out


def quartic_u(u: float, ell_s: float, h_s: float, p: PhysParams) -> float:
    return p.f * u**4 + 2.0 * h_s * u * u + 2.0 * (p.mu + ell_s)


def quartic_v(v: float, ell_s: float, h_s: float, p: PhysParams) -> float:
    return -p.f * v**4 + 2.0 * h_s * v * v + 2.0 * (p.mu - ell_s)


def quartic_structure(ell_s: float, h_s: float, p: PhysParams) -> QuarticStructure:
    """Closed-form roots xi_{1,2}, eta_{1,2} of the two quartics."""
    f = p.f
    ru = (h_s / f) ** 2 - 2.0 * (p.mu + ell_s) / f
    rv = (h_s / f) ** 2 + 2.0 * (p.mu - ell_s) / f
    su = cmath.sqrt(ru)
    sv = cmath.sqrt(rv)
    xi1 = -h_s / f + su
    xi2 = -h_s / f - su
    eta1 = h_s / f + sv
    eta2 = h_s / f - sv
    return QuarticStructure(
        xi1=xi1, xi2=xi2, eta1=eta1, eta2=eta2,
        xi_real=(ru >= 0.0), eta_real=(rv >= 0.0),
    )


def classify(ell_s: float, h_s: float, p: PhysParams) -> RegionClass:
    """Taxonomy label of (ell_s, h_s) with boundary detection.

    Boundary equalities are tested at relative tolerance BOUNDARY_RTOL
    in the scaled coordinates (ell_s/mu, h_s/sqrt(f mu)).
    """
    lam = ell_s / p.mu
    chi = h_s / math.sqrt(p.f * p.mu)
    scale = max(1.0, abs(lam), abs(chi))
    tol = BOUNDARY_RTOL * scale

    on_lo = abs(lam + 1.0) <= tol   # ell_s = -mu
    on_hi = abs(lam - 1.0) <= tol   # ell_s = +mu

    def bounded(label: Region) -> RegionClass:
        return RegionClass(label, True)

    def unbounded(label: Region) -> RegionClass:
        return RegionClass(label, False)

    if on_lo:
        if abs(chi) <= tol:
            return unbounded(Region.P_I_II_IV)
        return unbounded(Region.B_I_II if chi > 0 else Region.B_I_IV)

    if on_hi:
        if abs(chi) <= tol:
            return unbounded(Region.P_II_III)
        if abs(chi + 2.0) <= tol:
            return bounded(Region.P_II_IV)
        if chi > 0:
            return unbounded(Region.B_II_III)
        if chi > -2.0:
            return unbounded(Region.B_II_edge)
        return bounded(Region.B_IV_edge)

    if lam < -1.0:
        return unbounded(Region.I)

    if lam > 1.0:
        # region III above the parabola-like edge, forbidden below
        chi_edge = math.sqrt(2.0 * (ell_s - p.mu)) / math.sqrt(p.mu)
        if abs(chi - chi_edge) <= tol:
            return unbounded(Region.B_III_edge)
        return unbounded(Region.III) if chi > chi_edge else unbounded(Region.Forbidden)

    # interior ell_s in (-mu, mu): split by h_s/sqrt(f) = -sqrt(2(mu+ell_s))
    chi_sep = -math.sqrt(2.0 * (p.mu + ell_s)) / math.sqrt(p.mu)
    if abs(chi - chi_sep) <= tol:
        return bounded(Region.B_II_IV)
    return bounded(Region.IV) if chi < chi_sep else unbounded(Region.II)


def zero_velocity_points(ell_s: float, h_s: float, p: PhysParams) -> list[tuple[float, float]]:
    """Zero-velocity points in (x, y); empty outside regions I and IV."""
    label = classify(ell_s, h_s, p).label
    if label not in (Region.I, Region.IV):
        return []
    q = quartic_structure(ell_s, h_s, p)
    xi1, eta1 = q.xi1.real, q.eta1.real
    pts = [(xi1 / 2 - eta1 / 2, math.sqrt(xi1 * eta1)),
           (xi1 / 2 - eta1 / 2, -math.sqrt(xi1 * eta1))]
    if label is Region.IV:
        xi2 = q.xi2.real
        pts += [(xi2 / 2 - eta1 / 2, math.sqrt(xi2 * eta1)),
                (xi2 / 2 - eta1 / 2, -math.sqrt(xi2 * eta1))]
    for x, y in pts:
        r = math.hypot(x, y)
        resid = h_s + p.mu / r + p.f * x
        if abs(resid) > 1e-8 * max(1.0, abs(h_s)):
            raise AssertionError(f"zero-velocity residual {resid} at ({x}, {y})")
    return pts


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean, iterated to machine convergence."""
    if a <= 0.0 or b <= 0.0:
        raise OutOfRange("AGM requires positive arguments")
    for _ in range(60):
        if abs(a - b) <= 1e-16 * (a + b):
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def period_v(ell_s: float, h_s: float, p: PhysParams) -> float:
    """Fictitious-time period of the v-oscillation (defined in all regions)."""
    q = quartic_structure(ell_s, h_s, p)
    if not q.eta_real or q.eta1.real <= 0.0:
        raise OutOfRange("no real v-oscillation for these integrals")
    eta1, eta2 = q.eta1.real, q.eta2.real
    if eta2 <= 0.0:
        # v sweeps [-v1, v1] through zero
        a = math.sqrt(eta1 - eta2)
        b = math.sqrt(-eta2) if eta2 < 0.0 else 0.0
        if b == 0.0:
            raise OutOfRange("v-motion degenerates through the origin")
        return 2.0 * math.pi / (math.sqrt(p.f) * agm(a, b))
    # region III band: v oscillates in [v2, v1] without crossing zero
    return math.pi / (math.sqrt(p.f) * agm(math.sqrt(eta1), math.sqrt(eta2)))


def period_u(ell_s: float, h_s: float, p: PhysParams) -> float:
    """Fictitious-time period of the bounded u-branch (region IV only)."""
    q = quartic_structure(ell_s, h_s, p)
    if not q.xi_real or q.xi2.real <= 0.0 or q.xi1.real <= q.xi2.real:
        raise UnboundedU("bounded u-branch requires region IV with xi1 > xi2 > 0")
    xi1, xi2 = q.xi1.real, q.xi2.real
    a = math.sqrt(xi1)
    b = math.sqrt(xi1 - xi2)
    return 2.0 * math.pi / (math.sqrt(p.f) * agm(a, b))


def periods(ell_s: float, h_s: float, p: PhysParams) -> tuple[float, float]:
    """(T_u, T_v) in fictitious time; raises UnboundedU outside region IV."""
    return period_u(ell_s, h_s, p), period_v(ell_s, h_s, p)


@dataclass(frozen=True)
class BrakeFamily:
    """Closed forms of the unstable brake orbit at fixed ell_s."""

    ell_s: float
    u_star: float
    xi_star: float
    hs_star: float
    eta1_star: float
    v1_star: float
    reduced_jacobian_det: float  # det D of the reduced (u, p_u) field at (0, +-u*)


def brake_family(ell_s: float, p: PhysParams) -> BrakeFamily:
    """Brake-orbit family member: u*, xi*, h_s*, eta_1*, v_1*."""
    if not (-p.mu < ell_s < p.mu):
        raise OutOfRange("brake family requires ell_s in (-mu, mu)")
    u_star = (2.0 * (p.mu + ell_s) / p.f) ** 0.25
    xi_star = u_star * u_star
    hs_star = -math.sqrt(2.0 * p.f * (p.mu + ell_s))
    eta1_star = -xi_star + 2.0 * math.sqrt(p.mu / p.f)
    return BrakeFamily(
        ell_s=ell_s, u_star=u_star, xi_star=xi_star, hs_star=hs_star,
        eta1_star=eta1_star, v1_star=math.sqrt(eta1_star),
        reduced_jacobian_det=-4.0 * p.f / xi_star,
    )


def commensurable_energy(
    ell_s: float,
    ratio: tuple[int, int],
    p: PhysParams,
    bracket: tuple[float, float] | None = None,
) -> float:
    """Energy h_s in region IV where T_v/T_u equals the rational ratio p/q.

    The ratio tends to 0 as h_s approaches the region boundary from below
    and to 1 as h_s -> -inf, so any target in (0, 1) is reachable.
    """
    num, den = ratio
    if num * den <= 0 or num >= den:
        raise InvalidRatio(f"T_v/T_u = {num}/{den} must lie in (0, 1)")
    target = num / den
    hs_star = brake_family(ell_s, p).hs_star

    def g(h: float) -> float:
        tu, tv = periods(ell_s, h, p)
        return tv / tu - target

    if bracket is None:
        lo = 1.000001 * hs_star  # just inside region IV
        hi = 64.0 * hs_star
        for _ in range(40):
            if g(lo) * g(hi) < 0.0:
                break
            hi *= 2.0
        else:
            raise NotFound("no sign change for the commensurability equation")
        bracket = (hi, lo)
    a, b = min(bracket), max(bracket)
    if g(a) * g(b) > 0.0:
        raise NotFound("no sign change on the supplied bracket")
    return brentq(g, a, b, xtol=1e-14, rtol=8.9e-16)
