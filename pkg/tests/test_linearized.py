import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dispstab.errors import (
    DomainError,
    IndeterminateError,
    InsufficientDataError,
    KernelAssumptionError,
)
from dispstab.linearized import (
    Verdict,
    assemble_L0,
    criterion_verdict,
    dc_identity_residual,
    essential_bottom,
    kernel_check,
    linearize,
    momentum,
    momentum_branch,
    momentum_derivative,
    momentum_parseval,
    negative_count,
)
from dispstab.operators import Grid, ModelKind, Nonlinearity
from dispstab.profile import WaveProfile, continue_branch


def test_L0_is_symmetric(kdv_profile, quad, classical):
    m = assemble_L0("KDV", quad, classical, kdv_profile)
    assert np.allclose(m, m.T, atol=1e-12)


def test_kdv_L0_low_spectrum_matches_poschl_teller(kdv_profile, quad, classical):
    rep = linearize("KDV", quad, classical, kdv_profile)
    assert np.allclose(rep.eigenvalues[:3], oracles.kdv_L0_low_eigenvalues(1.0), atol=1e-8)


def test_kdv_negative_count_agrees_with_finite_differences(kdv_profile, quad, classical):
    n_fd, _ = oracles.fd_negative_count(40.0, 4001, 1.0)
    rep = linearize("KDV", quad, classical, kdv_profile)
    assert rep.n_minus == n_fd == 1
    assert rep.kernel_multiplicity_estimate == 1
    assert rep.kernel_residual < 1e-6


@pytest.mark.parametrize("fixture, model", [("bbm_profile", "BBM"), ("rbou_profile", "RBOU")])
def test_classical_families_have_one_negative_eigenvalue(request, fixture, model, quad, classical):
    prof = request.getfixturevalue(fixture)
    rep = linearize(model, quad, classical, prof)
    assert (rep.n_minus, rep.kernel_multiplicity_estimate) == (1, 1)
    assert rep.kernel_residual < 1e-6


def test_supercritical_gkdv_indices(gkdv6, quad):
    nl, prof = gkdv6
    rep = linearize("KDV", quad, nl, prof)
    assert rep.n_minus == 1 and rep.kernel_multiplicity_estimate == 1


def test_linearize_rejects_wrong_model(kdv_profile, quad, classical):
    with pytest.raises(DomainError):
        linearize("BBM", quad, classical, kdv_profile)


def test_kernel_check_on_zero_profile(grid80, quad, classical):
    zero = WaveProfile(ModelKind.KDV, 1.0, np.zeros(512), 0.0, grid80)
    m = assemble_L0("KDV", quad, classical, zero)
    resid, mult = kernel_check(m, zero)
    assert np.isnan(resid) and mult == 0


def test_negative_count_on_diagonal():
    assert negative_count(np.diag([-2.0, -1e-12, 0.0, 3.0]), kernel_tol=1e-9) == 1


@pytest.mark.parametrize(
    "model, fixture, c", [("KDV", "kdv_profile", 1.0), ("BBM", "bbm_profile", 3.0), ("RBOU", "rbou_profile", 1.5)]
)
def test_momentum_matches_closed_form(request, model, fixture, c, quad):
    prof = request.getfixturevalue(fixture)
    p = momentum(model, quad, prof)
    assert np.isclose(p, oracles.momentum(model, c), rtol=1e-9)
    assert np.isclose(momentum_parseval(model, quad, prof), p, rtol=1e-10)


@pytest.mark.parametrize("model, c", [("KDV", 1.0), ("KDV", 2.0), ("BBM", 3.0), ("RBOU", 1.5)])
def test_momentum_derivative_matches_closed_form(model, c, quad, classical, grid80):
    est, err = momentum_derivative(model, quad, classical, c, grid80)
    assert abs(est - oracles.dmomentum(model, c)) < 1e-5 * abs(est)
    assert err < 1e-4 * abs(est)


def test_momentum_derivative_inadmissible_step(quad, classical, grid80):
    with pytest.raises(DomainError):
        momentum_derivative("BBM", quad, classical, 1.005, grid80, rel_step=1e-2)


def test_branch_needs_three_speeds(quad, classical, grid80):
    profs = continue_branch("KDV", quad, classical, [1.0, 1.1], grid80)
    with pytest.raises(InsufficientDataError):
        momentum_branch("KDV", quad, classical, profs)


def test_kdv_branch_derivative(quad, classical, grid80):
    cs = np.linspace(0.6, 1.4, 9)
    profs = continue_branch("KDV", quad, classical, cs, grid80)
    br = momentum_branch("KDV", quad, classical, profs)
    # 3-point stencils next to the ends are O(h^2) accurate
    assert np.allclose(br.dP_dc, 18 * np.sqrt(cs), rtol=1e-3)
    assert np.allclose(br.dP_dc[2:-2], 18 * np.sqrt(cs[2:-2]), rtol=1e-5)
    assert br.transition_candidates.size == 0
    assert not br.lower_accuracy.any()
    raw = momentum_branch("KDV", quad, classical, profs, refine_endpoints=False)
    assert raw.lower_accuracy[0] and raw.lower_accuracy[-1]
    assert set(br.to_dict()) >= {"speeds", "dP_dc", "transition_candidates"}


def test_critical_gkdv_branch_is_flat(quad):
    nl = Nonlinearity.power(5)
    g = Grid(40.0, 512)
    cs = np.linspace(0.5, 1.5, 7)
    br = momentum_branch("KDV", quad, nl, continue_branch("KDV", quad, nl, cs, g))
    assert np.all(np.abs(br.dP_dc) < 1e-3 * br.momenta / cs)
    assert br.transition_candidates.size == len(cs)


def test_rbou_branch_positive_near_sonic_speed(quad, classical, grid80):
    cs = np.linspace(1.05, 3.0, 9)
    br = momentum_branch("RBOU", quad, classical, continue_branch("RBOU", quad, classical, cs, grid80))
    assert np.all(br.dP_dc > 0)
    assert np.isclose(br.dP_dc[0], oracles.dmomentum("RBOU", 1.05), rtol=1e-3)


@pytest.mark.parametrize(
    "n, d, expected",
    [
        (1, 18.0, Verdict.SILENT),
        (1, -0.12, Verdict.PURELY_GROWING),
        (0, 2.0, Verdict.PURELY_GROWING),
        (0, -2.0, Verdict.SILENT),
        (2, 1.0, Verdict.PURELY_GROWING),
    ],
)
def test_criterion_table(n, d, expected):
    assert criterion_verdict(n, d) is expected


@given(st.integers(0, 20), st.floats(1e-6, 1e6), st.sampled_from([1.0, -1.0]))
def test_criterion_parity_rule(n, mag, sign):
    v = criterion_verdict(n, sign * mag)
    growing = (n % 2 == 0) == (sign > 0)
    assert (v is Verdict.PURELY_GROWING) == growing


def test_criterion_errors():
    with pytest.raises(IndeterminateError) as info:
        criterion_verdict(1, 1e-9, noise_floor=1e-6)
    assert info.value.noise_floor == 1e-6
    with pytest.raises(KernelAssumptionError):
        criterion_verdict(1, 1.0, kernel_multiplicity=2)
    with pytest.raises(DomainError):
        criterion_verdict(-1, 1.0)


@pytest.mark.parametrize("model, c", [("KDV", 1.0), ("BBM", 3.0), ("RBOU", 1.5)])
def test_dc_identity(model, c, quad, classical, grid80):
    h = 1e-3 * c
    profs = continue_branch(model, quad, classical, [c - h, c, c + h], grid80)
    assert dc_identity_residual(model, quad, classical, profs) < 1e-5


def test_essential_bottom():
    assert essential_bottom("KDV", 2.0) == 2.0
    assert np.isclose(essential_bottom("BBM", 2.0), 0.5)
    assert np.isclose(essential_bottom("RBOU", 2.0, 0.25), 0.5)


def test_report_dict(kdv_profile, quad, classical):
    d = linearize("KDV", quad, classical, kdv_profile).to_dict()
    assert d["n_minus"] == 1
    assert d["provenance"]["n_points"] == 512
