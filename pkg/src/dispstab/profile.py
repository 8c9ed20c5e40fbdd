"""Solitary-wave profiles: spectral fixed-point solver and closed forms.

All three families share the profile equation ``(M + s) u = kappa f(u)`` with
``(s, kappa)`` from :class:`~dispstab.operators.ModelKind`, so one solver
covers KDV, BBM and RBOU.
"""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, InputShapeError
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, apply_multiplier

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 2000
DEFAULT_DAMPING = 0.5
DECAY_TOL = 1e-8


@dataclass
class WaveProfile:
    model: ModelKind
    speed_c: float
    samples: np.ndarray
    residual_norm: float
    grid: Grid
    iterations: int = 0
    tolerance: float = DEFAULT_TOL
    meta: dict = field(default_factory=dict)

    @property
    def relative_residual(self) -> float:
        n = self.grid.norm(self.samples)
        return self.residual_norm / n if n > 0 else self.residual_norm

    @property
    def tail_ratio(self) -> float:
        """``|u(+-L)| / max|u|``; the decay check compares it with 1e-8."""
        u = self.samples
        peak = np.max(np.abs(u))
        if peak == 0:
            return 0.0
        edge = max(abs(u[0]), abs(u[-1]))
        return float(edge / peak)

    @property
    def decayed(self) -> bool:
        return self.tail_ratio <= DECAY_TOL

    @property
    def amplitude(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def evenness_defect(self) -> float:
        """Max of ``|u(x) - u(-x)|`` relative to ``max|u|``."""
        u = self.samples
        mirrored = np.roll(u[::-1], 1)  # index N-j about the centre index N/2
        peak = np.max(np.abs(u))
        return float(np.max(np.abs(u - mirrored)) / peak) if peak else 0.0

    def summary(self) -> dict:
        return {
            "model": self.model.value,
            "speed_c": self.speed_c,
            "amplitude": self.amplitude,
            "residual_norm": self.residual_norm,
            "relative_residual": self.relative_residual,
            "tolerance": self.tolerance,
            "iterations": self.iterations,
            "tail_ratio": self.tail_ratio,
            "half_length": self.grid.half_length,
            "n_points": self.grid.n_points,
        }


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def kdv_soliton(x, c):
    """``3c sech^2(sqrt(c) x/2)``; solves the KDV profile equation for alpha=k^2, f=u^2/2."""
    return 3.0 * c / np.cosh(np.sqrt(c) * np.asarray(x) / 2.0) ** 2


def benjamin_ono_soliton(x, c):
    """``4c/(1 + c^2 x^2)``; KDV family with alpha=|k|, f=u^2/2."""
    x = np.asarray(x)
    return 4.0 * c / (1.0 + c**2 * x**2)


def bbm_soliton(x, c):
    """``3(c-1) sech^2(sqrt((c-1)/c) x/2)``; BBM family with alpha=k^2, f=u^2/2."""
    return 3.0 * (c - 1.0) / np.cosh(0.5 * np.sqrt((c - 1.0) / c) * np.asarray(x)) ** 2


def rbou_soliton(x, c):
    """``3(c^2-1) sech^2(sqrt(1-1/c^2) x/2)``; RBOU family with alpha=k^2, f=u^2/2."""
    s = 1.0 - 1.0 / c**2
    return 3.0 * (c**2 - 1.0) / np.cosh(0.5 * np.sqrt(s) * np.asarray(x)) ** 2


def power_soliton(x, shift, p, coupling=1.0):
    """Solution of ``-u'' + shift*u = coupling*u^p`` decaying at infinity."""
    amp = (shift * (p + 1) / (2.0 * coupling)) ** (1.0 / (p - 1))
    return amp / np.cosh((p - 1) * np.sqrt(shift) * np.asarray(x) / 2.0) ** (2.0 / (p - 1))


def default_seed(model: ModelKind, nl: Nonlinearity, c: float, grid: Grid) -> np.ndarray:
    """sech-type ansatz: exact for alpha=k^2 with a power f, a decent guess otherwise."""
    s, kappa = model.shift(c), model.coupling(c)
    p = nl.degree if nl.degree else 2.0
    a = abs(nl.coefficients.get(int(p), 1.0)) if nl.coefficients else 1.0
    # keep the bump well inside the box
    s_eff = max(s, (8.0 * (p - 1) / grid.half_length) ** 2 / 4.0)
    return power_soliton(grid.x, s_eff, p, kappa * a)


# ---------------------------------------------------------------------------
# residual and solver
# ---------------------------------------------------------------------------


def _denominator(model, spec, c, grid):
    den = spec.on(grid) + model.shift(c)
    if den.min() <= 0:
        raise DomainError(
            f"alpha(k) + s vanishes on the grid for {model.value} at c={c}; need s > gamma"
        )
    return den


def profile_residual(model, spec, nl, c, grid, u) -> np.ndarray:
    """Pointwise ``M u + s u - kappa f(u)`` for raw samples."""
    model = ModelKind.parse(model)
    model.require(c, spec.shift_gamma)
    u = grid.check(u)
    return apply_multiplier(grid, spec, u) + model.shift(c) * u - model.coupling(c) * nl.f(u)


def solitary_residual(profile: WaveProfile, spec: DispersionSpec, nl: Nonlinearity) -> np.ndarray:
    """Left-hand side of the solitary-wave equation evaluated on ``profile``."""
    return profile_residual(profile.model, spec, nl, profile.speed_c, profile.grid, profile.samples)


def _spectral_eval(uh, k, x0, xs):
    """Evaluate the trigonometric interpolant (and its derivatives) at points xs."""
    phase = np.exp(1j * np.outer(xs - x0, k))
    n = len(uh)
    d1 = (phase @ (1j * k * uh)).real / n
    d2 = (phase @ (-(k**2) * uh)).real / n
    return d1, d2


def recenter(grid: Grid, u) -> tuple[np.ndarray, float]:
    """Translate u so that its extremum of largest magnitude sits at x = 0.

    The peak is located by Newton iteration on the spectral interpolant's
    derivative, then moved with an exact Fourier shift.
    """
    u = grid.check(u)
    i = int(np.argmax(np.abs(u)))
    x = grid.x
    k = grid.wavenumbers.copy()
    k[grid.n_points // 2] = 0.0
    uh = np.fft.fft(u)
    xp = x[i]
    for _ in range(20):
        d1, d2 = _spectral_eval(uh, k, x[0], np.array([xp]))
        if d2[0] == 0:
            break
        step = d1[0] / d2[0]
        step = np.clip(step, -grid.dx, grid.dx)
        xp -= step
        if abs(step) < 1e-15 * max(1.0, grid.half_length):
            break
    shift = xp  # move the point xp to 0
    if abs(shift) < 1e-15:
        return u.copy(), 0.0
    out = np.fft.ifft(uh * np.exp(1j * k * shift)).real
    return out, float(shift)


def solve_profile(
    model,
    spec: DispersionSpec,
    nl: Nonlinearity,
    c: float,
    grid: Grid,
    seed=None,
    *,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    damping: float = DEFAULT_DAMPING,
) -> WaveProfile:
    """Solve ``(M + s) u = kappa f(u)`` by Petviashvili iteration.

    For homogeneous ``f`` of degree p the stabilizing exponent is ``p/(p-1)``.
    Otherwise the exponent is taken from the local degree
    ``<f'(u)u,u>/<f(u),u>`` and the update is damped, halving the step
    whenever the residual grows.
    """
    model = ModelKind.parse(model)
    model.require(c, spec.shift_gamma)
    den = _denominator(model, spec, c, grid)
    kappa = model.coupling(c)
    u = default_seed(model, nl, c, grid) if seed is None else np.array(grid.check(seed), dtype=float)
    if not np.any(u):
        raise DomainError("seed must be nonzero")

    def residual(v):
        r = np.fft.ifft(den * np.fft.fft(v)).real - kappa * nl.f(v)
        nv = grid.norm(v)
        return r, (grid.norm(r) / nv if nv > 0 else np.inf)

    homogeneous = nl.degree is not None and nl.degree > 1
    theta = 1.0 if homogeneous else damping
    _, rel = residual(u)
    it = 0
    for it in range(1, max_iters + 1):
        uh = np.fft.fft(u)
        nh = kappa * np.fft.fft(nl.f(u))
        denom = float(np.real(np.vdot(uh, nh)))
        if denom <= 0 or not np.isfinite(denom):
            raise ConvergenceError(
                f"Petviashvili stabilizer undefined at iteration {it} (iterate collapsed)",
                residual=rel,
                speed=c,
            )
        stab = float(np.sum(den * np.abs(uh) ** 2)) / denom
        if homogeneous:
            p = nl.degree
        else:
            num = float(np.real(np.vdot(u, nl.f_prime(u) * u)))
            p = num / float(np.real(np.vdot(u, nl.f(u))))
            p = max(p, 1.1)
        target = np.fft.ifft(stab ** (p / (p - 1.0)) * nh / den).real
        while True:
            trial = u + theta * (target - u)
            _, trial_rel = residual(trial)
            if homogeneous or trial_rel <= rel or theta < 1e-3:
                break
            theta *= 0.5
        u, rel = trial, trial_rel
        if not homogeneous:
            theta = min(1.0, 2.0 * theta)
        if not np.all(np.isfinite(u)):
            raise ConvergenceError("iterate became non-finite", residual=rel, speed=c)
        if rel <= tol:
            break
    else:
        raise ConvergenceError(
            f"profile iteration did not reach {tol:g} in {max_iters} iterations (last {rel:.3g})",
            residual=rel,
            speed=c,
        )
    u, shift = recenter(grid, u)
    r, rel = residual(u)
    prof = WaveProfile(
        model, float(c), u, grid.norm(r), grid, iterations=it, tolerance=tol, meta={"shift": shift}
    )
    if not prof.decayed:
        log.info(
            "profile at c=%g has tail ratio %.2e (> %.0e); box may be too small",
            c,
            prof.tail_ratio,
            DECAY_TOL,
        )
    return prof


def continue_branch(model, spec, nl, c_values, grid, seed=None, **solver_kw) -> list[WaveProfile]:
    """Solve profiles along ascending speeds, warm-starting each from the last."""
    cs = np.asarray(c_values, dtype=float).ravel()
    if cs.size == 0:
        raise DomainError("need at least one speed")
    if np.any(np.diff(cs) <= 0):
        raise DomainError("speeds must be strictly ascending")
    model = ModelKind.parse(model)
    for c in cs:
        model.require(c, spec.shift_gamma)
    out = []
    current = seed
    for c in cs:
        try:
            prof = solve_profile(model, spec, nl, c, grid, current, **solver_kw)
        except ConvergenceError as exc:
            raise ConvergenceError(f"branch failed at c={c}: {exc}", exc.residual, speed=c) from exc
        out.append(prof)
        current = prof.samples
    return out


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------


def save_profile(path, profile: WaveProfile) -> None:
    """Write ``x,u_c`` columns with a ``#`` header carrying model, c, L, N, residual."""
    g = profile.grid
    header = (
        f"# model={profile.model.value} c={float(profile.speed_c)!r} L={g.half_length!r} "
        f"N={g.n_points} residual_norm={float(profile.residual_norm)!r}\n"
    )
    buf = io.StringIO()
    buf.write(header)
    buf.write("x,u_c\n")
    for xv, uv in zip(g.x, profile.samples):
        buf.write(f"{float(xv)!r},{float(uv)!r}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_profile(path) -> WaveProfile:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise InputShapeError("missing profile header line")
        meta = dict(item.split("=", 1) for item in first[1:].split())
        cols = fh.readline().strip()
        if cols != "x,u_c":
            raise InputShapeError(f"unexpected column header {cols!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = Grid(float(meta["L"]), int(meta["N"]))
    if data.shape != (grid.n_points, 2):
        raise InputShapeError("profile file has the wrong number of rows")
    return WaveProfile(
        ModelKind.parse(meta["model"]),
        float(meta["c"]),
        data[:, 1].copy(),
        float(meta["residual_norm"]),
        grid,
    )
