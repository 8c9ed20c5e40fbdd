import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from dispstab.errors import ConvergenceError, DomainError, InputShapeError
from dispstab.operators import Grid, Nonlinearity, make_symbol
from dispstab.profile import (
    bbm_soliton,
    benjamin_ono_soliton,
    continue_branch,
    kdv_soliton,
    load_profile,
    power_soliton,
    profile_residual,
    rbou_soliton,
    recenter,
    save_profile,
    solitary_residual,
    solve_profile,
)


def test_closed_forms_match_oracles():
    x = np.linspace(-20, 20, 101)
    assert np.allclose(kdv_soliton(x, 1.7), oracles.kdv_soliton(x, 1.7))
    assert np.allclose(benjamin_ono_soliton(x, 0.6), oracles.bo_soliton(x, 0.6))
    a, b = oracles.sech2_params("BBM", 3.0)
    assert np.allclose(bbm_soliton(x, 3.0), a * oracles.sech2(b * x))
    a, b = oracles.sech2_params("RBOU", 1.5)
    assert np.allclose(rbou_soliton(x, 1.5), a * oracles.sech2(b * x))
    assert np.allclose(power_soliton(x, 1.0, 6), oracles.gkdv_soliton(x, 1.0, 6))


def test_kdv_profile_recovers_soliton(kdv_profile, grid80):
    err = np.max(np.abs(kdv_profile.samples - oracles.kdv_soliton(grid80.x, 1.0)))
    assert err < 1e-8
    assert kdv_profile.decayed
    assert kdv_profile.evenness_defect() < 1e-10


def test_bbm_and_rbou_profiles(bbm_profile, rbou_profile, grid80):
    for prof, model, c in [(bbm_profile, "BBM", 3.0), (rbou_profile, "RBOU", 1.5)]:
        a, b = oracles.sech2_params(model, c)
        assert np.max(np.abs(prof.samples - a * oracles.sech2(b * grid80.x))) < 1e-8 * a


@pytest.mark.parametrize("p", [3, 4, 6])
def test_gkdv_profiles(p):
    g = Grid(20.0, 512)
    prof = solve_profile("KDV", make_symbol("quadratic"), Nonlinearity.power(p), 1.0, g)
    assert np.max(np.abs(prof.samples - oracles.gkdv_soliton(g.x, 1.0, p))) < 1e-8


def test_nonhomogeneous_nonlinearity_converges(quad):
    g = Grid(40.0, 512)
    nl = Nonlinearity.polynomial({2: 0.5, 3: 0.1})
    prof = solve_profile("KDV", quad, nl, 1.0, g)
    assert prof.relative_residual < 1e-9
    assert np.max(np.abs(profile_residual("KDV", quad, nl, 1.0, g, prof.samples))) < 1e-8


def test_smith_profile_residual():
    g = Grid(80.0, 1024)
    spec = make_symbol("smith")
    prof = solve_profile("KDV", spec, Nonlinearity.classical(), 0.5, g)
    assert prof.relative_residual < 1e-9
    assert np.linalg.norm(solitary_residual(prof, spec, Nonlinearity.classical())) * np.sqrt(g.dx) < 1e-8


def test_profile_summary(kdv_profile):
    s = kdv_profile.summary()
    assert s["model"] == "KDV" and s["n_points"] == 512
    assert np.isclose(s["amplitude"], 3.0)


def test_inadmissible_speed(quad, classical, grid80):
    with pytest.raises(DomainError):
        solve_profile("BBM", quad, classical, 0.5, grid80)


def test_nonconvergence_reports_residual(quad, grid80):
    nl = Nonlinearity.polynomial({2: 0.5, 3: 0.1})
    with pytest.raises(ConvergenceError) as info:
        solve_profile("KDV", quad, nl, 1.0, grid80, max_iters=2)
    assert info.value.residual > 0
    assert info.value.speed == 1.0


def test_zero_seed_rejected(quad, classical, grid80):
    with pytest.raises(DomainError):
        solve_profile("KDV", quad, classical, 1.0, grid80, np.zeros(512))


def test_continue_branch_warm_start(quad, classical, grid80):
    cs = [0.8, 1.0, 1.2]
    profs = continue_branch("KDV", quad, classical, cs, grid80)
    assert [p.speed_c for p in profs] == cs
    for p in profs:
        assert np.max(np.abs(p.samples - oracles.kdv_soliton(grid80.x, p.speed_c))) < 1e-7
    with pytest.raises(DomainError):
        continue_branch("KDV", quad, classical, [1.0, 0.5], grid80)


@settings(max_examples=20)
@given(st.floats(-3.0, 3.0))
def test_recenter_undoes_translation(shift):
    g = Grid(40.0, 512)
    u = oracles.kdv_soliton(g.x - shift, 1.0)
    out, found = recenter(g, u)
    assert abs(found - shift) < 1e-9
    assert np.max(np.abs(out - oracles.kdv_soliton(g.x, 1.0))) < 1e-8


def test_save_load_roundtrip(tmp_path, kdv_profile):
    path = tmp_path / "p.txt"
    save_profile(path, kdv_profile)
    back = load_profile(path)
    assert np.array_equal(back.samples, kdv_profile.samples)
    assert back.speed_c == kdv_profile.speed_c and back.grid == kdv_profile.grid
    lines = path.read_text().splitlines()
    assert lines[1] == "x,u_c"
    path.write_text("x,u_c\n1,2\n")
    with pytest.raises(InputShapeError):
        load_profile(path)
