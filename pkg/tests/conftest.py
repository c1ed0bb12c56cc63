"""Shared fixtures: default parameters and the (expensive) reference
fixed point / brake solution at ell_s = 348600, computed once per session."""
from __future__ import annotations

import numpy as np
import pytest

from sunshadow import brake, ssmap
from sunshadow.params import PhysParams
from sunshadow.ssmap import SectionPoint

ELL_REF = 348600.0


@pytest.fixture(scope="session")
def p() -> PhysParams:
    return PhysParams()


@pytest.fixture(scope="session")
def brake_sol(p):
    return brake.solve_brake(ELL_REF, p)


@pytest.fixture(scope="session")
def fixed_point(p, brake_sol) -> SectionPoint:
    seed = SectionPoint(np.sqrt(brake_sol.xiE), -brake_sol.puE, ELL_REF)
    return ssmap.find_fixed_point(seed, p)
