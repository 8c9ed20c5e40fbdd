import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from dispstab.operators import Grid, Nonlinearity, make_symbol  # noqa: E402
from dispstab.profile import solve_profile  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

QUAD = make_symbol("quadratic")
CLASSICAL = Nonlinearity.classical()

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_LINES: dict = {}


@pytest.fixture(scope="session")
def quad():
    return QUAD


@pytest.fixture(scope="session")
def classical():
    return CLASSICAL


@pytest.fixture(scope="session")
def grid80():
    return Grid(80.0, 512)


@pytest.fixture(scope="session")
def kdv_profile(grid80):
    return solve_profile("KDV", QUAD, CLASSICAL, 1.0, grid80)


@pytest.fixture(scope="session")
def bbm_profile(grid80):
    return solve_profile("BBM", QUAD, CLASSICAL, 3.0, grid80)


@pytest.fixture(scope="session")
def rbou_profile(grid80):
    return solve_profile("RBOU", QUAD, CLASSICAL, 1.5, grid80)


@pytest.fixture(scope="session")
def gkdv6():
    nl = Nonlinearity.power(6)
    return nl, solve_profile("KDV", QUAD, nl, 1.0, Grid(20.0, 512))


@pytest.fixture(scope="session")
def gkdv6_mode(gkdv6):
    from dispstab.growing import find_growing_mode

    nl, prof = gkdv6
    return find_growing_mode("KDV", QUAD, nl, prof)


@pytest.fixture(scope="session")
def stable_modes(kdv_profile, bbm_profile, rbou_profile):
    """find_growing_mode on the three classical solitons, with the empirical bound used."""
    from dispstab.growing import empirical_lambda_bound, find_growing_mode

    out = {}
    for model, prof in [("KDV", kdv_profile), ("BBM", bbm_profile), ("RBOU", rbou_profile)]:
        lam_max = empirical_lambda_bound(model, QUAD, CLASSICAL, prof)
        out[model] = (lam_max, find_growing_mode(model, QUAD, CLASSICAL, prof, lam_max))
    return out


@pytest.fixture(scope="session")
def kernel_traces(kdv_profile, bbm_profile, rbou_profile):
    """k_lambda over the fit window for the three classical solitons."""
    import numpy as np

    from dispstab.growing import track_k_lambda

    lams = np.geomspace(1e-3, 1e-2, 12)
    return {
        model: (prof, track_k_lambda(model, QUAD, CLASSICAL, prof, lams))
        for model, prof in [("KDV", kdv_profile), ("BBM", bbm_profile), ("RBOU", rbou_profile)]
    }


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
