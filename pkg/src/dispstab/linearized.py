"""The self-adjoint linearization L0, its negative index, kernel and momentum."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DomainError,
    IndeterminateError,
    InsufficientDataError,
    KernelAssumptionError,
    NumericalError,
)
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, derivative, multiplier_matrix
from .profile import WaveProfile, solve_profile

KERNEL_TOL_REL = 1e-6
DP_NOISE_REL = 1e-4


class Verdict(str, enum.Enum):
    PURELY_GROWING = "PurelyGrowingModeExists"
    SILENT = "CriterionSilent"


@dataclass
class LinearizedReport:
    eigenvalues: np.ndarray
    n_minus: int
    kernel_residual: float
    kernel_multiplicity_estimate: int
    momentum: float
    kernel_tol: float
    essential_bottom: float
    grid: Grid
    speed_c: float
    model: ModelKind

    def to_dict(self, n_eigs: int = 8) -> dict:
        return {
            "model": self.model.value,
            "speed_c": self.speed_c,
            "lowest_eigenvalues": [float(v) for v in self.eigenvalues[:n_eigs]],
            "n_minus": int(self.n_minus),
            "kernel_residual": float(self.kernel_residual),
            "kernel_multiplicity_estimate": int(self.kernel_multiplicity_estimate),
            "momentum": float(self.momentum),
            "essential_bottom": float(self.essential_bottom),
            "provenance": {
                "kernel_tol": float(self.kernel_tol),
                "half_length": self.grid.half_length,
                "n_points": self.grid.n_points,
            },
        }


@dataclass
class MomentumBranch:
    speeds: np.ndarray
    momenta: np.ndarray
    dP_dc: np.ndarray
    lower_accuracy: np.ndarray
    transition_candidates: np.ndarray
    noise_floor: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        return {
            "speeds": self.speeds.tolist(),
            "momenta": self.momenta.tolist(),
            "dP_dc": self.dP_dc.tolist(),
            "lower_accuracy": self.lower_accuracy.tolist(),
            "transition_candidates": self.transition_candidates.tolist(),
            "noise_floor": self.noise_floor.tolist(),
        }


def _check_profile(model, profile):
    model = ModelKind.parse(model)
    if profile.model is not model:
        raise DomainError(f"profile is a {profile.model.value} wave, not {model.value}")
    return model


def assemble_L0(model, spec: DispersionSpec, nl: Nonlinearity, profile: WaveProfile) -> np.ndarray:
    """``M + s - kappa f'(u_c)`` in collocation form (real symmetric)."""
    model = _check_profile(model, profile)
    c = profile.speed_c
    mat = multiplier_matrix(profile.grid, spec)
    mat[np.diag_indices_from(mat)] += model.shift(c) - model.coupling(c) * nl.f_prime(profile.samples)
    return mat


def _eigvalsh(matrix):
    try:
        return scipy.linalg.eigvalsh(matrix)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigensolve failed: {exc}") from exc


def default_kernel_tol(eigenvalues) -> float:
    return KERNEL_TOL_REL * float(np.max(np.abs(eigenvalues)))


def negative_count(matrix, kernel_tol: float | None = None, eigenvalues=None) -> int:
    """Number of eigenvalues below ``-kernel_tol``."""
    ev = _eigvalsh(matrix) if eigenvalues is None else eigenvalues
    tol = default_kernel_tol(ev) if kernel_tol is None else kernel_tol
    return int(np.count_nonzero(ev < -tol))


def kernel_check(matrix, profile: WaveProfile, kernel_tol: float | None = None, eigenvalues=None):
    """``(||L0 u_cx|| / ||u_cx||, number of eigenvalues with |mu| < kernel_tol)``.

    For a zero profile the translation mode vanishes and the residual is NaN.
    """
    ev = _eigvalsh(matrix) if eigenvalues is None else eigenvalues
    tol = default_kernel_tol(ev) if kernel_tol is None else kernel_tol
    ucx = derivative(profile.grid, profile.samples)
    nrm = np.linalg.norm(ucx)
    resid = float(np.linalg.norm(matrix @ ucx) / nrm) if nrm > 0 else float("nan")
    return resid, int(np.count_nonzero(np.abs(ev) < tol))


def momentum(model, spec: DispersionSpec, profile: WaveProfile) -> float:
    """P(c): ``(u,u)/2`` for KDV, ``((M+1)u,u)/2`` for BBM, ``c((M+1)u,u)`` for RBOU."""
    model = _check_profile(model, profile)
    g, u = profile.grid, profile.samples
    if model is ModelKind.KDV:
        return 0.5 * g.inner(u, u)
    mu = np.fft.ifft((1.0 + spec.on(g)) * np.fft.fft(u)).real
    q = g.inner(mu, u)
    return 0.5 * q if model is ModelKind.BBM else profile.speed_c * q


def momentum_parseval(model, spec: DispersionSpec, profile: WaveProfile) -> float:
    """Same quantity as :func:`momentum`, summed on the Fourier side."""
    model = _check_profile(model, profile)
    g = profile.grid
    power = np.abs(np.fft.fft(profile.samples)) ** 2 * g.dx / g.n_points
    if model is ModelKind.KDV:
        return 0.5 * float(np.sum(power))
    q = float(np.sum((1.0 + spec.on(g)) * power))
    return 0.5 * q if model is ModelKind.BBM else profile.speed_c * q


def essential_bottom(model, c: float, gamma: float = 0.0) -> float:
    """Bottom of the essential spectrum of L0 (from the formula, not computed)."""
    return ModelKind.parse(model).shift(c) - gamma


def linearize(model, spec, nl, profile, kernel_tol: float | None = None) -> LinearizedReport:
    model = _check_profile(model, profile)
    mat = assemble_L0(model, spec, nl, profile)
    ev = _eigvalsh(mat)
    tol = default_kernel_tol(ev) if kernel_tol is None else kernel_tol
    resid, mult = kernel_check(mat, profile, tol, ev)
    return LinearizedReport(
        eigenvalues=ev,
        n_minus=negative_count(mat, tol, ev),
        kernel_residual=resid,
        kernel_multiplicity_estimate=mult,
        momentum=momentum(model, spec, profile),
        kernel_tol=tol,
        essential_bottom=essential_bottom(model, profile.speed_c, spec.shift_gamma),
        grid=profile.grid,
        speed_c=profile.speed_c,
        model=model,
    )


# ---------------------------------------------------------------------------
# dP/dc
# ---------------------------------------------------------------------------


def momentum_derivative(model, spec, nl, c, grid, rel_step: float = 1e-2, seed=None, **solver_kw):
    """dP/dc at c by Richardson extrapolation of centred differences (steps h, h/2).

    Returns ``(estimate, error_estimate)``.
    """
    model = ModelKind.parse(model)
    h = rel_step * abs(c)
    for cc in (c - h, c + h):
        model.require(cc, spec.shift_gamma)
    vals = {}
    for off in (-h, -h / 2, h / 2, h):
        prof = solve_profile(model, spec, nl, c + off, grid, seed, **solver_kw)
        vals[off] = momentum(model, spec, prof)
    d_h = (vals[h] - vals[-h]) / (2 * h)
    d_h2 = (vals[h / 2] - vals[-h / 2]) / h
    est = (4 * d_h2 - d_h) / 3
    return float(est), float(abs(est - d_h2))


def _fd_weights(x0, xs):
    """First-derivative finite-difference weights at x0 for nodes xs."""
    xs = np.asarray(xs, float) - x0
    n = len(xs)
    vander = np.vander(xs, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(vander, rhs)


def momentum_branch(
    model, spec, nl, profiles, noise_rel: float = DP_NOISE_REL, refine_endpoints: bool = True, rel_step: float = 1e-2
) -> MomentumBranch:
    """P(c_i) along a solved branch and dP/dc by finite differences.

    Interior points with two uniform neighbours on each side use the
    Richardson combination of the h and 2h centred differences; other
    interior points use the 3-point formula. Endpoints use one-sided
    3-point formulas and are flagged ``lower_accuracy``, unless
    ``refine_endpoints`` is set: then they are recomputed with
    :func:`momentum_derivative` from local solves at steps ``rel_step*c``.
    A one-sided stencil is unreliable next to a singular point such as
    ``c -> 1`` for RBOU, where ``P ~ (c^2 - 1)^(3/2)``.
    """
    model = ModelKind.parse(model)
    if len(profiles) < 3:
        raise InsufficientDataError("momentum_branch needs at least 3 speeds")
    cs = np.array([p.speed_c for p in profiles], dtype=float)
    if len(np.unique(cs)) != len(cs):
        raise InsufficientDataError("speeds must be distinct")
    order = np.argsort(cs)
    cs = cs[order]
    ps = np.array([momentum(model, spec, profiles[i]) for i in order])
    n = len(cs)
    d = np.empty(n)
    low = np.zeros(n, dtype=bool)
    for i in range(n):
        if 2 <= i <= n - 3:
            h = cs[i + 1] - cs[i]
            steps = np.diff(cs[i - 2 : i + 3])
            if np.allclose(steps, h, rtol=1e-9, atol=0):
                d1 = (ps[i + 1] - ps[i - 1]) / (2 * h)
                d2 = (ps[i + 2] - ps[i - 2]) / (4 * h)
                d[i] = (4 * d1 - d2) / 3
                continue
        if 0 < i < n - 1:
            idx = [i - 1, i, i + 1]
        else:
            idx = [0, 1, 2] if i == 0 else [n - 3, n - 2, n - 1]
            low[i] = True
        d[i] = _fd_weights(cs[i], cs[idx]) @ ps[idx]
        if low[i] and refine_endpoints:
            prof = profiles[order[i]]
            try:
                d[i] = momentum_derivative(model, spec, nl, cs[i], prof.grid, rel_step, prof.samples, tol=prof.tolerance)[0]
                low[i] = False
            except DomainError:
                pass  # c - h is not admissible; keep the one-sided value
    floor = noise_rel * np.abs(ps) / np.abs(cs)
    cands = list(cs[np.abs(d) <= floor])
    for i in range(n - 1):
        if abs(d[i]) > floor[i] and abs(d[i + 1]) > floor[i + 1] and np.sign(d[i]) != np.sign(d[i + 1]):
            # linear interpolation of the zero
            cands.append(cs[i] - d[i] * (cs[i + 1] - cs[i]) / (d[i + 1] - d[i]))
    return MomentumBranch(cs, ps, d, low, np.array(sorted(cands)), floor)


def criterion_verdict(n_minus: int, dP_dc: float, noise_floor: float = 0.0, kernel_multiplicity: int = 1):
    """Purely growing mode iff (n- even and dP/dc > 0) or (n- odd and dP/dc < 0)."""
    if kernel_multiplicity != 1:
        raise KernelAssumptionError(
            f"kernel multiplicity estimate is {kernel_multiplicity}, the criterion needs 1"
        )
    if n_minus < 0:
        raise DomainError("n_minus must be nonnegative")
    if not np.isfinite(dP_dc) or abs(dP_dc) <= noise_floor:
        raise IndeterminateError(
            f"dP/dc = {dP_dc:.3g} is within the noise floor {noise_floor:.3g} (transition candidate)",
            dP_dc=dP_dc,
            noise_floor=noise_floor,
        )
    even = n_minus % 2 == 0
    if (even and dP_dc > 0) or (not even and dP_dc < 0):
        return Verdict.PURELY_GROWING
    return Verdict.SILENT


def dc_identity_residual(model, spec, nl, profiles) -> float:
    """Relative residual of ``L0 d_c u_c = rhs`` using a centred difference in c.

    ``profiles`` are three profiles at ``c-h, c, c+h``. ``rhs`` is
    ``-u_c`` (KDV), ``-(M+1)u_c/c`` (BBM) or ``-2(M+1)u_c/c`` (RBOU).
    """
    model = ModelKind.parse(model)
    lo, mid, hi = profiles
    h = 0.5 * (hi.speed_c - lo.speed_c)
    if not np.isclose(mid.speed_c - lo.speed_c, h) or h <= 0:
        raise DomainError("need three equally spaced profiles")
    du = (hi.samples - lo.samples) / (2 * h)
    lhs = assemble_L0(model, spec, nl, mid) @ du
    u, c, g = mid.samples, mid.speed_c, mid.grid
    if model is ModelKind.KDV:
        rhs = -u
    else:
        m1u = np.fft.ifft((1.0 + spec.on(g)) * np.fft.fft(u)).real
        rhs = -(1.0 if model is ModelKind.BBM else 2.0) * m1u / c
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
