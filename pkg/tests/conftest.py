import math

import numpy as np
import pytest

from polsqueeze.meanfield import threshold_interval
from polsqueeze.models import Chi3Params

_ACCEPTANCE = []


def admissible_chi3_points(n, seed=0, delta_range=(2.0, 5.0)):
    """Random χ(3) parameter sets strictly inside the bright-branch window."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        gs = rng.uniform(0.5, 2.0)
        g = -rng.uniform(0.2, 2.0) * gs
        delta = rng.uniform(*delta_range) * gs
        iv = threshold_interval(Chi3Params(delta=delta, g=g, rho2=1.0, gamma_s=gs))
        if not iv.exists:
            continue
        t = rng.uniform(0.05, 0.95)
        out.append(Chi3Params(delta=delta, g=g, rho2=iv.branch_lower + t * (iv.upper - iv.branch_lower), gamma_s=gs))
    return out


def boundary_chi3_points(deltas=(2.0, 3.0, 4.5), g=-1.0, rel=1e-3):
    """Points just inside the lower and the upper edge of the window."""
    out = []
    for d in deltas:
        iv = threshold_interval(Chi3Params(delta=d, g=g, rho2=1.0))
        out.append(Chi3Params(delta=d, g=g, rho2=iv.branch_lower * (1 + rel)))
        out.append(Chi3Params(delta=d, g=g, rho2=iv.upper * (1 - rel)))
    return out


@pytest.fixture
def acceptance_report():
    def record(number, passed, detail):
        _ACCEPTANCE.append((number, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
