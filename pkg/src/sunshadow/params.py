"""Physical parameters and numeric budgets.

Units are fixed: km, s, and the derived parabolic units (u, v in km^1/2,
p_u, p_v in km^3/2/s, fictitious time in s/km).
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .errors import ConfigInvalid

MU_EARTH = 398600.4418   # km^3/s^2
R_EARTH = 6378.1363      # km
F_SRP_DEFAULT = 9.12e-9  # km/s^2


@dataclass(frozen=True)
class PhysParams:
    """System constants plus integrator tolerances and run budgets.

    mu : gravitational parameter, km^3/s^2
    f : radiation acceleration, km/s^2
    R : shadow half-width = Earth radius, km
    r_escape : escape radius, km (0 means "auto": 10*xi_star of the
        active ell_s context, resolved by the caller)
    tau_budget : max fictitious time per map application, s/km
    switch_budget : max regime switches per map application
    tol_abs, tol_rel : integrator stage tolerances
    """

    mu: float = MU_EARTH
    f: float = F_SRP_DEFAULT
    R: float = R_EARTH
    r_escape: float = 0.0
    tau_budget: float = 4000.0
    switch_budget: int = 64
    tol_abs: float = 1e-14
    tol_rel: float = 1e-13
    steps_per_period: int = 400
    event_tol_factor: float = 1e-10  # event located to |uv -+ R| <= factor*R

    def __post_init__(self):
        if not (self.mu > 0 and self.f > 0 and self.R > 0):
            raise ConfigInvalid("mu, f, R must all be positive")
        if self.r_escape and self.r_escape <= self.R:
            raise ConfigInvalid("r_escape must exceed R")
        if self.f * self.R**2 / 2 >= self.mu:
            raise ConfigInvalid("f*R^2/2 must be smaller than mu")
        if self.tau_budget <= 0 or self.switch_budget <= 0:
            raise ConfigInvalid("budgets must be positive")

    def escape_radius(self, ell_s: float) -> float:
        """Resolved escape radius: explicit value, or 10*xi_star(ell_s)."""
        if self.r_escape:
            return self.r_escape
        xi_star = (2.0 * (self.mu + ell_s) / self.f) ** 0.5
        return 10.0 * xi_star

    def to_dict(self) -> dict:
        return asdict(self)
