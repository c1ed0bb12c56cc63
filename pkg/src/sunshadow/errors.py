"""Exception hierarchy shared by all sunshadow modules."""


class SunShadowError(Exception):
    """Base class for all library errors."""


class DegenerateOrigin(SunShadowError):
    """Coordinate transform evaluated at the origin."""


class BranchUndefined(SunShadowError):
    """Requested sign branch of u is inconsistent with the state."""


class UnboundedU(SunShadowError):
    """u-period requested where the u-motion is unbounded."""


class OutOfRange(SunShadowError):
    """Parameter outside the validity interval of a closed form."""


class InvalidRatio(SunShadowError):
    """Commensurability ratio violates T_v/T_u < 1."""


class NotFound(SunShadowError):
    """Bracketing search found no sign change."""


class NoConvergence(SunShadowError):
    """Iterative solve failed to converge within its cap."""


class SingularSection(SunShadowError):
    """Tangential section crossing: transversality denominator vanished."""


class NoExitRoot(SunShadowError):
    """Shadow-transit polynomial has no admissible exit root."""


class ComplexXT(SunShadowError):
    """Negative radicand in the transit-geometry closed form."""


class OutOfRegion(SunShadowError):
    """Energy outside the region where the closed form is defined."""


class NoBracket(SunShadowError):
    """Matching function does not change sign on the search interval."""


class ForbiddenPoint(SunShadowError):
    """Section point lies in the forbidden set; carries the failed test."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class LostOrbit(SunShadowError):
    """Newton iterate left the admissible set of the map."""


class SampleLost(SunShadowError):
    """A curve sample failed to return to the section."""


class LinearRegimeViolated(SunShadowError):
    """Initial manifold segment extends beyond the linear regime."""


class AllCandidatesLost(SunShadowError):
    """Every transverse correction candidate left the map domain."""

    def __init__(self, index: int):
        super().__init__(f"all transverse candidates lost at point {index}")
        self.index = index


class BranchExtinct(SunShadowError):
    """All points of a manifold generation were lost."""


class ConfigInvalid(SunShadowError):
    """Run configuration violates a parameter invariant."""
