"""The operator family A^lambda and the real eigenvalue branch k_lambda.

A purely growing mode ``e^{lambda t} u`` exists exactly when ``A^lambda``
has a kernel. At ``lambda -> 0+`` the operator reduces to ``L0`` (away from
the k=0 mode) and its zero eigenvalue moves to ``k_lambda``; a sign change
of ``k_lambda`` at some ``lambda* > 0`` is a growing mode.

All three families are written with ``R = d/dx / (lambda - c d/dx)``:

* BBM:  ``A = M + 1 + R (1 + f'(u_c))``
* RBOU: ``A = M + 1 - R^2 (1 + f'(u_c))``
* KDV:  ``A = c + c R (f'(u_c) - M)``

``A`` is real in physical space, so its spectrum is closed under conjugation.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DomainError, KernelAssumptionError, NumericalError, TrackingError
from .linearized import assemble_L0, default_kernel_tol, kernel_check
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, derivative, fourier_matrix, multiplier_matrix
from .profile import WaveProfile

log = logging.getLogger(__name__)

MIN_OVERLAP = 0.8
IMAG_TOL = 1e-6
MAX_SUBDIVISIONS = 6
LAMBDA_CAP = 1e6
FIT_WINDOW = (1e-3, 1e-2)


@dataclass
class ALambdaOperator:
    model: ModelKind
    lam: float
    matrix: np.ndarray
    essential_threshold: float
    threshold_is_heuristic: bool = False


@dataclass
class KLambdaTrace:
    lambdas: np.ndarray
    k_values: np.ndarray
    overlaps: np.ndarray
    quadratic_coefficient: float = float("nan")
    left_real_axis_at: float | None = None
    essential_threshold: float = float("nan")
    eigenvectors: list = field(default_factory=list, repr=False)

    def sign_changes(self) -> list[tuple[int, int]]:
        re = self.k_values.real
        return [(i, i + 1) for i in range(len(re) - 1) if re[i] * re[i + 1] < 0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "re_k", "im_k", "overlap"])
            for lam, k, ov in zip(self.lambdas, self.k_values, self.overlaps):
                w.writerow([repr(float(lam)), repr(float(k.real)), repr(float(k.imag)), repr(float(ov))])

    def summary(self) -> dict:
        return {
            "n_lambdas": int(len(self.lambdas)),
            "lambda_range": [float(self.lambdas[0]), float(self.lambdas[-1])] if len(self.lambdas) else [],
            "k_range": [float(self.k_values.real.min()), float(self.k_values.real.max())]
            if len(self.lambdas)
            else [],
            "min_overlap": float(self.overlaps.min()) if len(self.overlaps) else float("nan"),
            "left_real_axis_at": self.left_real_axis_at,
            "sign_changes": len(self.sign_changes()),
            "quadratic_coefficient": _finite_or_none(self.quadratic_coefficient),
            "essential_threshold": float(self.essential_threshold),
        }


@dataclass
class GrowingModeResult:
    lambda_star: float
    eigenfunction: np.ndarray
    defect: float
    bracket: tuple[float, float]
    spectral_residual: float
    other_min_abs_re: float
    trace: KLambdaTrace | None = None

    found = True

    def summary(self) -> dict:
        return {
            "found": True,
            "lambda_star": self.lambda_star,
            "defect": self.defect,
            "bracket": list(self.bracket),
            "spectral_residual": self.spectral_residual,
            "other_min_abs_re": self.other_min_abs_re,
        }

    def save_eigenfunction(self, path, grid: Grid) -> None:
        u = self.eigenfunction
        np.savetxt(
            path,
            np.column_stack([grid.x, u.real, u.imag]),
            delimiter=",",
            header="x,re_u,im_u",
            comments="",
        )


@dataclass
class NotFound:
    trace: KLambdaTrace
    reason: str
    det_signs: np.ndarray | None = None
    det_lambdas: np.ndarray | None = None

    found = False

    def summary(self) -> dict:
        out = {"found": False, "reason": self.reason, "trace": self.trace.summary()}
        if self.det_signs is not None:
            out["det_sign_changes"] = int(np.count_nonzero(np.diff(self.det_signs) != 0))
        return out


def _finite_or_none(v):
    return float(v) if np.isfinite(v) else None


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def essential_threshold(model, c: float, gamma: float = 0.0, kernel_tol: float = 1e-6) -> float:
    """Real-part bound for the essential spectrum of A^lambda.

    ``(1-1/c)/2`` (BBM), ``c/2`` (KDV), ``(1-1/c^2)/2`` (RBOU, a heuristic
    by analogy). For shifted symbols the linear shift is reduced by gamma.
    Warns when the bound is too close to 0 for tracking to be meaningful.
    """
    model = ModelKind.parse(model)
    model.require(c, gamma)
    thr = 0.5 * (model.shift(c) - gamma)
    if thr < 10 * kernel_tol:
        warnings.warn(f"essential threshold {thr:.3g} is below 10*kernel_tol; tracking is unreliable", RuntimeWarning)
    return thr


def _r_symbol(grid: Grid, lam: float, c: float) -> np.ndarray:
    k = grid.wavenumbers
    return 1j * k / (lam - 1j * c * k)


def assemble_A_lambda(model, spec: DispersionSpec, nl: Nonlinearity, profile: WaveProfile, lam: float) -> ALambdaOperator:
    model = ModelKind.parse(model)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if profile.model is not model:
        raise DomainError(f"profile is a {profile.model.value} wave, not {model.value}")
    c, g = profile.speed_c, profile.grid
    thr = essential_threshold(model, c, spec.shift_gamma)
    fp = nl.f_prime(profile.samples)
    mmat = multiplier_matrix(g, spec)
    r = _r_symbol(g, lam, c)
    n = g.n_points
    if model is ModelKind.KDV:
        rmat = fourier_matrix(g, c * r)
        mat = c * np.eye(n) + rmat * fp[None, :] - rmat @ mmat
    elif model is ModelKind.BBM:
        rmat = fourier_matrix(g, r)
        mat = mmat + np.eye(n) + rmat * (1.0 + fp)[None, :]
    else:
        rmat = fourier_matrix(g, r * r)
        mat = mmat + np.eye(n) - rmat * (1.0 + fp)[None, :]
    return ALambdaOperator(model, float(lam), mat, thr, model is ModelKind.RBOU)


def spectral_equation_residual(model, spec, nl, profile: WaveProfile, lam: float, u) -> float:
    """Relative residual of the growing-mode equation, applied directly.

    * BBM:  ``(lam - c d)(u + Mu) + d(u + f'u)``
    * RBOU: ``(lam - c d)^2 (u + Mu) - d^2(u + f'u)``
    * KDV:  ``(lam - c d) u + d(f'u - Mu)``

    Evaluated with spectral derivatives, without the resolvent factor. The
    norm is relative to the largest individual term.
    """
    model = ModelKind.parse(model)
    g, c = profile.grid, profile.speed_c
    u = np.asarray(u, dtype=complex)
    fp = nl.f_prime(profile.samples)
    k = g.wavenumbers
    alpha = spec.on(g)
    d = lambda v: np.fft.ifft(1j * k * np.fft.fft(v))  # noqa: E731
    mv = lambda v: np.fft.ifft(alpha * np.fft.fft(v))  # noqa: E731
    if model is ModelKind.KDV:
        terms = [lam * u, -c * d(u), d(fp * u - mv(u))]
    elif model is ModelKind.BBM:
        w = u + mv(u)
        terms = [lam * w, -c * d(w), d(u + fp * u)]
    else:
        w = u + mv(u)
        terms = [lam**2 * w, -2 * lam * c * d(w), c**2 * d(d(w)), -d(d(u + fp * u))]
    total = np.linalg.norm(sum(terms))
    scale = max(np.linalg.norm(t) for t in terms)
    return float(total / scale) if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# eigen-branch tracking
# ---------------------------------------------------------------------------


def _eig(matrix):
    try:
        return scipy.linalg.eig(matrix, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc


def _overlaps(vecs, ref):
    ref = ref / np.linalg.norm(ref)
    return np.abs(ref.conj() @ vecs) / np.linalg.norm(vecs, axis=0)


def _select(w, vecs, ref, threshold):
    eligible = np.flatnonzero(w.real < threshold)
    if eligible.size == 0:
        return None, 0.0
    ov = _overlaps(vecs[:, eligible], ref)
    best = ov.max()
    # ties (to rounding) go to the smallest |k|
    tied = eligible[ov >= best - 1e-12]
    i = tied[np.argmin(np.abs(w[tied]))]
    return int(i), float(best)


def _is_real(k) -> bool:
    return abs(k.imag) < IMAG_TOL * max(1.0, abs(k.real))


def track_k_lambda(model, spec, nl, profile: WaveProfile, lambda_grid, *, check_kernel: bool = True) -> KLambdaTrace:
    """Follow the eigenvalue of A^lambda that starts at the translation kernel.

    The first eigenvalue is the eligible one (``Re k < threshold``) whose
    eigenvector best aligns with ``u_c'``; later ones maximise alignment with
    the previous eigenvector. If the alignment drops below 0.8 the step is
    subdivided geometrically before giving up. Tracking stops, recording
    ``left_real_axis_at``, when the eigenvalue becomes nonreal (a collision
    with another real eigenvalue).
    """
    model = ModelKind.parse(model)
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.ndim != 1 or lams.size == 0 or np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise DomainError("lambda_grid must be ascending and positive")
    if check_kernel:
        l0 = assemble_L0(model, spec, nl, profile)
        ev = scipy.linalg.eigvalsh(l0)
        _, mult = kernel_check(l0, profile, default_kernel_tol(ev), ev)
        if mult != 1:
            raise KernelAssumptionError(f"kernel multiplicity estimate is {mult}, tracking needs 1")
    ref = derivative(profile.grid, profile.samples).astype(complex)
    thr = essential_threshold(model, profile.speed_c, spec.shift_gamma)

    out_l, out_k, out_o, out_v = [], [], [], []
    left_at = None
    prev_lam = None
    for lam in lams:
        steps = [lam]
        depth = 0
        min_ov = 1.0
        while steps:
            target = steps[0]
            w, vecs = _eig(assemble_A_lambda(model, spec, nl, profile, target).matrix)
            i, ov = _select(w, vecs, ref, thr)
            if i is None:
                raise TrackingError(f"no eigenvalue below the essential threshold at lambda={target:g}", target, 0.0)
            if ov < MIN_OVERLAP and prev_lam is not None:
                if depth >= MAX_SUBDIVISIONS:
                    raise TrackingError(
                        f"branch jump: overlap {ov:.3f} at lambda={target:g} after {depth} subdivisions",
                        target,
                        ov,
                    )
                steps.insert(0, float(np.sqrt(prev_lam * target)))
                depth += 1
                continue
            steps.pop(0)
            min_ov = min(min_ov, ov)
            ref = vecs[:, i]
            prev_lam = target
            k = w[i]
        if not _is_real(k):
            left_at = float(lam)
            log.info("k_lambda left the real axis at lambda=%g (k=%s)", lam, k)
            break
        out_l.append(lam)
        out_k.append(k)
        out_o.append(min_ov)
        out_v.append(ref.copy())
    return KLambdaTrace(
        lambdas=np.array(out_l),
        k_values=np.array(out_k, dtype=complex),
        overlaps=np.array(out_o),
        left_real_axis_at=left_at,
        essential_threshold=thr,
        eigenvectors=out_v,
    )


# ---------------------------------------------------------------------------
# global checks
# ---------------------------------------------------------------------------


def det_sign(matrix) -> float:
    """Sign of det(A); for a real A it is (-1)^(number of negative real eigenvalues)."""
    sign, _ = np.linalg.slogdet(matrix)
    return float(np.real(sign))


def min_real_part(model, spec, nl, profile, lam) -> float:
    mat = assemble_A_lambda(model, spec, nl, profile, lam).matrix
    return float(scipy.linalg.eigvals(mat).real.min())


def empirical_lambda_bound(model, spec, nl, profile, start: float = 1.0, cap: float = LAMBDA_CAP) -> float:
    """Smallest doubling of ``start`` where every eigenvalue has Re > 0."""
    lam = start
    while lam <= cap:
        if min_real_part(model, spec, nl, profile, lam) > 0:
            return lam
        lam *= 2.0
    raise NumericalError(f"A^lambda still has eigenvalues with Re <= 0 at lambda={cap:g}")


def det_sign_scan(model, spec, nl, profile, lambdas) -> np.ndarray:
    return np.array([det_sign(assemble_A_lambda(model, spec, nl, profile, lam).matrix) for lam in lambdas])


def count_left_half_plane(model, spec, nl, profile, lam: float = 1e-2, exclude_tracked: bool = True) -> int:
    """Eigenvalues of A^lambda with Re z < 0, not counting a negative k_lambda.

    For small lambda this reproduces n-(L0).
    """
    w = scipy.linalg.eigvals(assemble_A_lambda(model, spec, nl, profile, lam).matrix)
    count = int(np.count_nonzero(w.real < 0))
    if exclude_tracked:
        tr = track_k_lambda(model, spec, nl, profile, [lam], check_kernel=False)
        if len(tr.k_values) and tr.k_values[0].real < 0:
            count -= 1
    return count


def conjugate_pairing_defect(matrix) -> float:
    """Distance from the spectrum to its conjugate, relative to the spectral radius."""
    w = scipy.linalg.eigvals(matrix)
    wc = np.sort_complex(np.conj(w))
    ws = np.sort_complex(w)
    return float(np.max(np.abs(ws - wc)) / max(1.0, np.max(np.abs(w))))


# ---------------------------------------------------------------------------
# growing mode
# ---------------------------------------------------------------------------


def default_lambda_grid(lambda_max: float, lambda_min: float = 5e-4, n: int = 40) -> np.ndarray:
    return np.geomspace(lambda_min, lambda_max, n)


def _tracked_value(model, spec, nl, profile, lam, ref, thr):
    w, vecs = _eig(assemble_A_lambda(model, spec, nl, profile, lam).matrix)
    i, _ = _select(w, vecs, ref, thr)
    if i is None:
        raise TrackingError(f"no eligible eigenvalue at lambda={lam:g}", lam, 0.0)
    return w[i]


def find_growing_mode(model, spec, nl, profile, lambda_max: float | None = None, lambda_grid=None, xtol_rel: float = 1e-12):
    """Locate lambda* where k_lambda crosses zero, or return :class:`NotFound`.

    ``lambda_max`` defaults to the empirical bound beyond which A^lambda has
    no eigenvalue with Re <= 0. The crossing is refined with Brent's method
    on the tracked eigenvalue; the eigenfunction is the smallest right
    singular vector of ``A^{lambda*}``.
    """
    model = ModelKind.parse(model)
    if lambda_max is None:
        lambda_max = empirical_lambda_bound(model, spec, nl, profile)
    grid = default_lambda_grid(lambda_max) if lambda_grid is None else np.asarray(lambda_grid, float)
    trace = track_k_lambda(model, spec, nl, profile, grid)
    changes = trace.sign_changes()
    if not changes:
        det_l = grid[grid >= (trace.left_real_axis_at or grid[0])] if trace.left_real_axis_at else grid
        signs = det_sign_scan(model, spec, nl, profile, det_l)
        reason = "k_lambda keeps its sign"
        if trace.left_real_axis_at is not None:
            reason += f" until it leaves the real axis at lambda={trace.left_real_axis_at:g}"
        if np.any(np.diff(signs) != 0):
            reason += "; det(A) changes sign beyond the tracked range"
        return NotFound(trace, reason, signs, det_l)
    lo_i, hi_i = changes[0]
    lo, hi = float(trace.lambdas[lo_i]), float(trace.lambdas[hi_i])
    thr = trace.essential_threshold
    ref = trace.eigenvectors[lo_i]

    def g(lam):
        return _tracked_value(model, spec, nl, profile, lam, ref, thr).real

    try:
        lam_star = scipy.optimize.brentq(g, lo, hi, xtol=xtol_rel * lo, rtol=4 * np.finfo(float).eps)
    except ValueError as exc:
        raise NumericalError(f"refinement bracket [{lo}, {hi}] does not bracket a root: {exc}") from exc
    mat = assemble_A_lambda(model, spec, nl, profile, lam_star).matrix
    _, s, vh = scipy.linalg.svd(mat)
    u = vh[-1].conj()
    # fix the phase so the mode is real up to rounding
    j = np.argmax(np.abs(u))
    u = u * (abs(u[j]) / u[j])
    defect = float(np.linalg.norm(mat @ u) / np.linalg.norm(u))
    w = scipy.linalg.eigvals(mat)
    others = np.sort(np.abs(w.real))[1:]
    resid = spectral_equation_residual(model, spec, nl, profile, lam_star, u)
    return GrowingModeResult(lam_star, u, defect, (lo, hi), resid, float(others[0]), trace)


# ---------------------------------------------------------------------------
# moving kernel
# ---------------------------------------------------------------------------


class PoorFitError(NumericalError):
    """The quadratic fit of k_lambda does not describe the data."""


@dataclass
class MovingKernelFit:
    quadratic: float
    cubic: float
    linear: float
    fit_residual: float
    lambdas: np.ndarray
    k_values: np.ndarray

    def summary(self) -> dict:
        return {
            "quadratic_coefficient": self.quadratic,
            "cubic_coefficient": self.cubic,
            "linear_coefficient": self.linear,
            "fit_residual": self.fit_residual,
            "lambda_window": [float(self.lambdas[0]), float(self.lambdas[-1])],
        }


def moving_kernel_limit(trace: KLambdaTrace, window=FIT_WINDOW, max_residual: float = 1e-2) -> MovingKernelFit:
    """Least-squares fit ``k = A lam^2 + B lam^3`` over the window; A is the limit.

    A second fit ``a lam + A lam^2 + B lam^3 + C lam^4`` reports the linear
    coefficient ``a``, which should vanish.
    """
    lam = trace.lambdas
    sel = (lam >= window[0] * (1 - 1e-12)) & (lam <= window[1] * (1 + 1e-12))
    if np.count_nonzero(sel) < 4:
        raise PoorFitError(f"need at least 4 traced points in {window}, have {np.count_nonzero(sel)}")
    lam, k = lam[sel], trace.k_values.real[sel]
    # scale columns by lam^2 so each row is k/lam^2 = A + B lam
    y = k / lam**2
    (a2, b3), *_ = np.linalg.lstsq(np.column_stack([np.ones_like(lam), lam]), y, rcond=None)
    fit = a2 + b3 * lam
    resid = float(np.linalg.norm(y - fit) / (np.sqrt(len(y)) * abs(a2))) if a2 != 0 else float("inf")
    (a1, *_), *_ = np.linalg.lstsq(np.column_stack([lam**-1, np.ones_like(lam), lam, lam**2]), y, rcond=None)
    if resid > max_residual:
        raise PoorFitError(f"fit residual {resid:.3g} exceeds {max_residual}; use smaller lambda or a larger box")
    trace.quadratic_coefficient = float(a2)
    return MovingKernelFit(float(a2), float(b3), float(a1), resid, lam, k)


def moving_kernel_prediction(model, dP_dc: float, profile: WaveProfile) -> float:
    """``-w(c) dP/dc / ||u_c'||^2`` with w = 1/c (BBM), 1/c^2 (RBOU), 1 (KDV)."""
    model = ModelKind.parse(model)
    c = profile.speed_c
    ux = derivative(profile.grid, profile.samples)
    weight = {ModelKind.BBM: 1.0 / c, ModelKind.RBOU: 1.0 / c**2, ModelKind.KDV: 1.0}[model]
    return -weight * dP_dc / profile.grid.inner(ux, ux)

