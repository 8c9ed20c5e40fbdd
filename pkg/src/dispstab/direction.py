"""Zero-integral corrections of energy-decreasing directions.

Given a direction ``y`` with ``<y, r> = 0`` (``r`` the momentum gradient),
subtract ``y_n = phi(x/n)/n - a_n psi'`` where the dilated bump carries the
integral of ``y`` and ``a_n`` restores orthogonality to ``r``. The result
has zero integral, so its antiderivative is periodic on the box, and
``y_n -> 0`` in ``H^{m/2}`` like ``n^{-1/2}``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateError, DomainError
from .linearized import assemble_L0
from .operators import Grid, ModelKind, Nonlinearity, apply_multiplier, derivative, make_symbol
from .profile import WaveProfile, solve_profile

DEGENERATE_TOL = 1e-10


@dataclass(frozen=True)
class Bump:
    """``height * exp(1 - 1/(1 - s^2))`` with ``s = (x - center)/radius``, zero for ``|s| >= 1``."""

    radius: float = 1.0
    center: float = 0.0
    height: float = 1.0

    def __call__(self, x) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        out[inside] = self.height * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    def derivative(self, x) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.radius
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        si = s[inside]
        out[inside] = self.height * np.exp(1.0 - 1.0 / (1.0 - si**2)) * (-2.0 * si / (1.0 - si**2) ** 2) / self.radius
        return out

    def reach(self) -> float:
        """Largest ``|x|`` in the support."""
        return abs(self.center) + self.radius


@dataclass
class DirectionSpec:
    """Inputs of the correction.

    ``phi`` is dilated about the origin and rescaled so that the discrete
    integral of each dilate equals ``mass``; ``psi`` supplies ``psi'``.
    """

    r: np.ndarray
    n: int = 1
    mass: float = 1.0
    phi: Bump = Bump()
    psi: Bump = Bump(radius=4.0, center=3.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("dilation index n must be a positive integer")


def max_dilation(spec: DirectionSpec, grid: Grid) -> int:
    """Largest n with ``n * reach(phi) < L``."""
    return int(np.ceil(grid.half_length / spec.phi.reach())) - 1


def _dilated_bump(spec: DirectionSpec, grid: Grid, n: int) -> np.ndarray:
    if n * spec.phi.reach() >= grid.half_length:
        raise DomainError(f"dilated support n={n} exceeds the box (max n is {max_dilation(spec, grid)})")
    raw = spec.phi(grid.x / n) / n
    total = grid.integrate(raw)
    if total == 0:
        raise DomainError("bump has no samples on the grid")
    # discrete normalization so that the quadrature of the dilate is exact
    return raw * (spec.mass / total)


def _psi_x(spec: DirectionSpec, grid: Grid) -> np.ndarray:
    if spec.psi.reach() >= grid.half_length:
        raise DomainError("psi does not fit in the box")
    # spectral derivative: its discrete integral vanishes to rounding
    return derivative(grid, spec.psi(grid.x))


def correction_coefficient(spec: DirectionSpec, grid: Grid, n: int | None = None) -> float:
    """``a_n = <phi_n, r> / <psi', r>``."""
    n = spec.n if n is None else n
    r = grid.check(spec.r)
    psix = _psi_x(spec, grid)
    den = grid.inner(psix, r)
    if abs(den) < DEGENERATE_TOL * max(grid.norm(psix) * grid.norm(r), np.finfo(float).tiny):
        raise DegenerateError("<psi', r> vanishes; move psi off the symmetry centre of r")
    return grid.inner(_dilated_bump(spec, grid, n), r) / den


def build_correction(spec: DirectionSpec, grid: Grid, n: int | None = None) -> np.ndarray:
    """``y_n = phi(x/n)/n - a_n psi'`` with ``int y_n = mass`` and ``<y_n, r> = 0``."""
    n = spec.n if n is None else n
    a = correction_coefficient(spec, grid, n)
    return _dilated_bump(spec, grid, n) - a * _psi_x(spec, grid)


def corrected_direction(y, spec: DirectionSpec, grid: Grid, require_orthogonal: bool = True) -> np.ndarray:
    """``y - y_n`` with ``mass = int y``; zero integral and the pairing of ``y`` with ``r`` kept.

    With ``require_orthogonal`` the input must satisfy ``<y, r> = 0``, and
    then so does the output.
    """
    y = grid.check(y)
    r = grid.check(spec.r)
    if require_orthogonal:
        pair = grid.inner(y, r)
        if abs(pair) > 1e-10 * grid.norm(y) * grid.norm(r):
            raise DomainError(f"<y, r> = {pair:.3g} is not zero")
    spec = DirectionSpec(r, spec.n, grid.integrate(y), spec.phi, spec.psi)
    return y - build_correction(spec, grid)


def antiderivative(grid: Grid, v) -> np.ndarray:
    """``Y(x_j) = int_{-L}^{x_j} v`` by the trapezoid rule; periodic iff ``int v = 0``."""
    v = grid.check(v)
    return np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]))]) * grid.dx


def sobolev_norm(grid: Grid, v, m: float) -> float:
    """Discrete ``H^{m/2}`` norm with Fourier weights ``(1 + k^2)^{m/2}``."""
    vh = np.fft.fft(grid.check(v))
    w = (1.0 + grid.wavenumbers**2) ** (m / 2.0)
    return float(np.sqrt(grid.dx / grid.n_points * np.sum(w * np.abs(vh) ** 2)))


def norm_decay_curve(spec: DirectionSpec, grid: Grid, n_values, m: float = 2.0) -> np.ndarray:
    """Rows ``(n, ||y_n||_{H^{m/2}})``."""
    ns = [int(n) for n in n_values]
    limit = max_dilation(spec, grid)
    if max(ns) * spec.phi.reach() >= grid.half_length:
        raise DomainError(f"n={max(ns)} violates the support condition; the largest admissible n is {limit}")
    return np.array([(n, sobolev_norm(grid, build_correction(spec, grid, n), m)) for n in ns])


def decay_slope(curve) -> float:
    """Least-squares slope of ``log norm`` against ``log n``."""
    curve = np.asarray(curve)
    return float(np.polyfit(np.log(curve[:, 0]), np.log(curve[:, 1]), 1)[0])


def save_curve(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "norm"])
        for n, v in curve:
            w.writerow([int(n), repr(float(v))])


# ---------------------------------------------------------------------------
# demonstrations
# ---------------------------------------------------------------------------


def _l0_apply(model, spec, nl, profile: WaveProfile, v) -> np.ndarray:
    model = ModelKind.parse(model)
    c = profile.speed_c
    return (
        apply_multiplier(profile.grid, spec, v)
        + model.shift(c) * v
        - model.coupling(c) * nl.f_prime(profile.samples) * v
    )


def quadratic_form(model, spec, nl, profile, v) -> float:
    """``<L0 v, v>`` applied matrix-free."""
    return profile.grid.inner(_l0_apply(model, spec, nl, profile, v), v)


def negative_direction(model, spec, nl, profile: WaveProfile) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of L0, eigenvector normalized in L2 and positive at the peak."""
    mat = assemble_L0(model, spec, nl, profile)
    w, v = scipy.linalg.eigh(mat, subset_by_index=[0, 0])
    chi = v[:, 0] / profile.grid.norm(v[:, 0])
    if chi[profile.grid.center] < 0:
        chi = -chi
    return float(w[0]), chi


def momentum_gradient(model, spec, profile: WaveProfile) -> np.ndarray:
    """``r = Q'(u_c)``: ``u_c`` for KDV, ``(1+M)u_c`` for BBM."""
    model = ModelKind.parse(model)
    if model is ModelKind.KDV:
        return profile.samples.copy()
    if model is ModelKind.BBM:
        return profile.samples + apply_multiplier(profile.grid, spec, profile.samples)
    raise DomainError("the direction construction is implemented for KDV and BBM")


@dataclass
class DirectionDemo:
    label: str
    n_values: np.ndarray
    quadratic_forms: np.ndarray
    integrals: np.ndarray
    pairings: np.ndarray
    first_negative_n: int | None
    orthogonal_input: bool
    eigenvalue: float

    def summary(self) -> dict:
        return {
            "label": self.label,
            "n_values": self.n_values.tolist(),
            "quadratic_forms": self.quadratic_forms.tolist(),
            "max_abs_integral": float(np.max(np.abs(self.integrals))),
            "max_abs_pairing": float(np.max(np.abs(self.pairings))),
            "first_negative_n": self.first_negative_n,
            "orthogonal_input": self.orthogonal_input,
            "lowest_eigenvalue": self.eigenvalue,
        }


def _run_demo(label, model, spec, nl, profile, r, y, n_values, orthogonal, eigenvalue, phi, psi) -> DirectionDemo:
    g = profile.grid
    forms, ints, pairs = [], [], []
    for n in n_values:
        ds = DirectionSpec(r, int(n), 0.0, phi, psi)
        yt = corrected_direction(y, ds, g, require_orthogonal=orthogonal)
        forms.append(quadratic_form(model, spec, nl, profile, yt))
        ints.append(g.integrate(yt) / max(g.dx * np.sum(np.abs(yt)), np.finfo(float).tiny))
        pairs.append(g.inner(yt, r) / (g.norm(yt) * g.norm(r)))
    forms = np.array(forms)
    neg = np.flatnonzero(forms < 0)
    first = int(n_values[neg[0]]) if neg.size else None
    return DirectionDemo(label, np.asarray(n_values), forms, np.array(ints), np.array(pairs), first, orthogonal, eigenvalue)


def direction_demo(
    model,
    spec,
    nl,
    profile: WaveProfile,
    n_values=(1, 2, 4, 8, 16, 32, 64),
    phi: Bump = Bump(),
    psi: Bump = Bump(radius=4.0, center=3.0),
    dc_step: float = 1e-3,
) -> dict:
    """Corrected directions built from the negative eigenfunction ``chi`` of L0.

    * ``unconstrained``: ``y = chi``. The integral vanishes and
      ``<L0 y~, y~> -> mu < 0``, but ``<y~, r> = <chi, r> != 0``.
    * ``constrained``: ``y = chi + t d_c u_c`` with ``<y, r> = 0``. Since
      ``L0 d_c u_c`` is a negative multiple of ``r``, ``<L0 y, y>`` equals
      ``mu + w <chi, r>^2 / P'(c)`` with ``w > 0``; it is negative only
      when ``dP/dc < 0``.

    Integrals are reported relative to the L1 norm and pairings relative to
    ``||y~|| ||r||``.
    """
    model = ModelKind.parse(model)
    g, c = profile.grid, profile.speed_c
    r = momentum_gradient(model, spec, profile)
    mu, chi = negative_direction(model, spec, nl, profile)
    h = dc_step * c
    lo, hi = (solve_profile(model, spec, nl, cc, g, profile.samples) for cc in (c - h, c + h))
    duc = (hi.samples - lo.samples) / (2 * h)
    t = -g.inner(chi, r) / g.inner(duc, r)
    y = chi + t * duc
    return {
        "unconstrained": _run_demo("y = chi", model, spec, nl, profile, r, chi, n_values, False, mu, phi, psi),
        "constrained": _run_demo("y = chi + t d_c u_c", model, spec, nl, profile, r, y, n_values, True, mu, phi, psi),
    }


def classical_kdv_demo(n_values=(1, 2, 4, 8, 16, 32, 64), grid: Grid | None = None, **kw) -> dict:
    """:func:`direction_demo` for the classical KDV soliton at c=1 (``dP/dc > 0``)."""
    grid = grid or Grid(80.0, 2048)
    spec, nl = make_symbol("quadratic"), Nonlinearity.classical()
    prof = solve_profile(ModelKind.KDV, spec, nl, 1.0, grid)
    return direction_demo(ModelKind.KDV, spec, nl, prof, n_values, **kw)


def supercritical_demo(p: int = 6, n_values=(1, 2, 4, 8, 16, 32, 64), grid: Grid | None = None, **kw) -> dict:
    """:func:`direction_demo` for gKdV ``f = u^p`` at c=1; for p > 5, ``dP/dc < 0``."""
    grid = grid or Grid(80.0, 2048)
    spec, nl = make_symbol("quadratic"), Nonlinearity.power(p)
    prof = solve_profile(ModelKind.KDV, spec, nl, 1.0, grid)
    return direction_demo(ModelKind.KDV, spec, nl, prof, n_values, **kw)
