"""Split-step Fourier integration of the KDV, BBM and RBOU families.

One step is Strang splitting: half a step of the exact linear flow in
Fourier space, a full RK4 step of the nonlinear part (2/3-rule dealiased),
then another linear half step. ``c_frame`` moves to a frame travelling at
that speed; the extra ``c d/dx`` term is part of the exact linear factor.

Fourier forms (lab frame):

* KDV:  ``u_t = ik alpha u - ik f``
* BBM:  ``u_t = -ik (u + f) / (1 + alpha)``
* RBOU: ``u_t = ik phi``, ``phi_t = ik (u + f) / (1 + alpha)``
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUpError, DomainError
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, dealias_mask
from .profile import WaveProfile

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e3


@dataclass
class EvolutionState:
    samples: np.ndarray
    grid: Grid
    time: float = 0.0
    velocity: np.ndarray | None = None  # RBOU only: u_t = d/dx velocity
    invariant_log: list = field(default_factory=list)

    def to_profile(self, model, speed_c: float) -> WaveProfile:
        """Wrap the state so it can be saved with :func:`~dispstab.profile.save_profile`."""
        return WaveProfile(ModelKind.parse(model), speed_c, self.samples.copy(), float("nan"), self.grid)


def travelling_velocity(profile: WaveProfile) -> np.ndarray:
    """Velocity field of a travelling RBOU wave: ``u_t = -c u' = phi'`` gives ``phi = -c u``."""
    return -profile.speed_c * profile.samples


def initial_state(model, profile: WaveProfile, perturbation=None, amplitude: float = 0.0, velocity_perturbation=None) -> EvolutionState:
    model = ModelKind.parse(model)
    u = profile.samples.copy()
    if perturbation is not None:
        u = u + amplitude * np.real(perturbation)
    phi = None
    if model is ModelKind.RBOU:
        phi = travelling_velocity(profile)
        if velocity_perturbation is not None:
            phi = phi + amplitude * np.real(velocity_perturbation)
    return EvolutionState(u, profile.grid, 0.0, phi)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def _apply(grid, sym, v):
    return np.fft.ifft(sym * np.fft.fft(v)).real


def invariants(model, spec: DispersionSpec, nl: Nonlinearity, state: EvolutionState) -> tuple[float, float]:
    """Momentum Q and energy E.

    * KDV:  ``Q = (u,u)/2``, ``E = (Mu,u)/2 - int G(u)``
    * BBM:  ``Q = ((1+M)u,u)/2``, ``E = int (u^2/2 + G(u))``
    * RBOU: ``Q = -((1+M)u, phi)``, ``E = ((1+M)phi,phi)/2 + int (u^2/2 + G(u))``

    with ``G' = f``. On a travelling wave Q equals P(c).
    """
    model = ModelKind.parse(model)
    g, u = state.grid, state.samples
    alpha = spec.on(g)
    big_g = g.integrate(nl.primitive(u))
    if model is ModelKind.KDV:
        return 0.5 * g.inner(u, u), 0.5 * g.inner(_apply(g, alpha, u), u) - big_g
    m1u = _apply(g, 1.0 + alpha, u)
    if model is ModelKind.BBM:
        return 0.5 * g.inner(m1u, u), 0.5 * g.inner(u, u) + big_g
    phi = state.velocity
    q = -g.inner(m1u, phi)
    e = 0.5 * g.inner(_apply(g, 1.0 + alpha, phi), phi) + 0.5 * g.inner(u, u) + big_g
    return q, e


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def linear_flow(model, spec: DispersionSpec, grid: Grid, uh, ph, t: float, c_frame: float = 0.0):
    """Exact linear propagator over time ``t`` (negative ``t`` runs backwards)."""
    model = ModelKind.parse(model)
    k = grid.wavenumbers
    alpha = spec.on(grid)
    frame = np.exp(1j * c_frame * k * t)
    if model is ModelKind.KDV:
        return np.exp(1j * k * alpha * t) * frame * uh, None
    if model is ModelKind.BBM:
        return np.exp(-1j * k * t / (1.0 + alpha)) * frame * uh, None
    omega = np.abs(k) / np.sqrt(1.0 + alpha)
    cos = np.cos(omega * t)
    # sin(omega t)/omega with the k=0 limit t
    sinc = t * np.sinc(omega * t / np.pi)
    u_new = cos * uh + 1j * k * sinc * ph
    p_new = 1j * k / (1.0 + alpha) * sinc * uh + cos * ph
    return frame * u_new, frame * p_new


def _nonlinear_rhs(model, alpha, k, mask, f, uh, ph):
    u = np.fft.ifft(uh).real
    fh = mask * np.fft.fft(f(u))
    if model is ModelKind.KDV:
        return -1j * k * fh, None
    if model is ModelKind.BBM:
        return -1j * k * fh / (1.0 + alpha), None
    return np.zeros_like(uh), 1j * k * fh / (1.0 + alpha)


def _rk4(model, alpha, k, mask, f, uh, ph, dt):
    def rhs(u, p):
        return _nonlinear_rhs(model, alpha, k, mask, f, u, p)

    def add(a, b, s):
        return None if a is None else a + s * b

    k1u, k1p = rhs(uh, ph)
    k2u, k2p = rhs(uh + 0.5 * dt * k1u, add(ph, k1p, 0.5 * dt))
    k3u, k3p = rhs(uh + 0.5 * dt * k2u, add(ph, k2p, 0.5 * dt))
    k4u, k4p = rhs(uh + dt * k3u, add(ph, k3p, dt))
    un = uh + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    pn = None if ph is None else ph + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return un, pn


class _Stepper:
    """Precomputed factors for repeated steps with a fixed dt.

    With ``base`` the stepper advances the deviation ``v = u - base`` and the
    nonlinear term becomes ``f(base + v) - f(base)``.
    """

    def __init__(self, model, spec, nl, grid, dt, c_frame, base=None):
        self.model = ModelKind.parse(model)
        if base is None:
            self.f = nl.f
        else:
            f_base = nl.f(base)
            self.f = lambda v: nl.f(base + v) - f_base
        self.grid = grid
        self.dt = dt
        self.c_frame = c_frame
        self.k = grid.wavenumbers
        self.alpha = spec.on(grid)
        self.mask = dealias_mask(grid)
        self.spec = spec

    def half(self, uh, ph):
        return linear_flow(self.model, self.spec, self.grid, uh, ph, 0.5 * self.dt, self.c_frame)

    def __call__(self, uh, ph):
        uh, ph = self.half(uh, ph)
        uh, ph = _rk4(self.model, self.alpha, self.k, self.mask, self.f, uh, ph, self.dt)
        return self.half(uh, ph)


def _to_hat(state):
    ph = None if state.velocity is None else np.fft.fft(state.velocity)
    return np.fft.fft(state.samples), ph


def _check_state(model, state):
    model = ModelKind.parse(model)
    state.grid.check(state.samples)
    if model is ModelKind.RBOU and state.velocity is None:
        raise DomainError("RBOU evolution needs a velocity field")
    return model


def step(model, spec, nl, state: EvolutionState, dt: float, c_frame: float = 0.0) -> EvolutionState:
    """One Strang step; returns a new state."""
    model = _check_state(model, state)
    if not dt > 0:
        raise DomainError("dt must be positive")
    uh, ph = _Stepper(model, spec, nl, state.grid, dt, c_frame)(*_to_hat(state))
    u = np.fft.ifft(uh).real
    if not np.all(np.isfinite(u)):
        raise BlowUpError(f"non-finite values at t={state.time + dt:g}", state)
    return replace(
        state,
        samples=u,
        time=state.time + dt,
        velocity=None if ph is None else np.fft.ifft(ph).real,
        invariant_log=list(state.invariant_log),
    )


def default_dt(model, spec, nl, state: EvolutionState, c_frame: float = 0.0, safety: float = 0.5) -> float:
    """``safety / (k_max * v)`` with v the largest nonlinear transport speed.

    The linear flow is exact, so only the explicit nonlinear substep limits dt.
    """
    v = float(np.max(np.abs(nl.f_prime(state.samples)))) + abs(c_frame) + 1.0
    return safety / (state.grid.k_max * v)


def evolve(
    model,
    spec,
    nl,
    state: EvolutionState,
    dt: float,
    n_steps: int,
    c_frame: float = 0.0,
    log_every: int = 0,
    callback=None,
    base: EvolutionState | None = None,
) -> EvolutionState:
    """Take ``n_steps`` steps; log (t, Q, E) every ``log_every`` steps.

    ``callback(t, u, phi)`` is called after each step, for on-the-fly
    measurements. Aborts with :class:`BlowUpError` (carrying the last good
    state) when values become non-finite or exceed 1e3 times the initial
    maximum.

    ``base`` must be a steady state in the frame ``c_frame`` (a solitary
    wave moving at that speed). The same equation is then advanced for the
    deviation from it, which keeps the base an exact fixed point of the
    discrete map instead of one perturbed by the splitting error.
    """
    model = _check_state(model, state)
    g = state.grid
    if base is None:
        u0, p0 = np.zeros(g.n_points), None if state.velocity is None else np.zeros(g.n_points)
    else:
        u0, p0 = base.samples, base.velocity
    stepper = _Stepper(model, spec, nl, g, dt, c_frame, None if base is None else u0)

    def full(vh, qh):
        u = u0 + np.fft.ifft(vh).real
        return u, None if qh is None else p0 + np.fft.ifft(qh).real

    uh = np.fft.fft(state.samples - u0)
    ph = None if state.velocity is None else np.fft.fft(state.velocity - p0)
    limit = BLOWUP_FACTOR * max(np.max(np.abs(state.samples)), np.finfo(float).tiny)
    t = state.time
    log_ = list(state.invariant_log)
    if log_every and not log_:
        log_.append((t, *invariants(model, spec, nl, state)))
    good = (uh, ph, t)
    for i in range(1, n_steps + 1):
        uh, ph = stepper(uh, ph)
        t = state.time + i * dt
        u, phi = full(uh, ph)
        peak = np.max(np.abs(u))
        if not np.isfinite(peak) or peak > limit:
            gu, gp, gt = good
            last = EvolutionState(*full(gu, gp)[:1], g, gt, full(gu, gp)[1], log_)
            raise BlowUpError(f"max|u| = {peak:.3g} exceeds {limit:.3g} at t={t:g}", last)
        good = (uh, ph, t)
        if callback is not None:
            callback(t, u, phi)
        if log_every and i % log_every == 0:
            log_.append((t, *invariants(model, spec, nl, EvolutionState(u, g, t, phi))))
    u, phi = full(uh, ph)
    return EvolutionState(u, g, t, phi, log_)


# ---------------------------------------------------------------------------
# growth measurement
# ---------------------------------------------------------------------------


@dataclass
class GrowthMeasurement:
    rate: float
    found: bool
    times: np.ndarray
    deviation: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    window: tuple[float, float] | None
    amplitude: float
    dt: float
    reason: str = ""

    def summary(self) -> dict:
        return {
            "found": self.found,
            "rate": self.rate if self.found else None,
            "window": list(self.window) if self.window else None,
            "amplitude": self.amplitude,
            "dt": self.dt,
            "reason": self.reason,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "log_norm", "Q", "E"])
            with np.errstate(divide="ignore"):
                logs = np.log(self.deviation)
            for row in zip(self.times, logs, self.momentum, self.energy):
                w.writerow([repr(float(v)) for v in row])


def velocity_of_mode(grid: Grid, lam: float, c: float, u) -> np.ndarray:
    """RBOU velocity field of a growing mode: ``d/dx phi = (lam - c d/dx) u``."""
    k = grid.wavenumbers
    uh = np.fft.fft(u)
    ph = np.zeros_like(uh)
    nz = k != 0
    ph[nz] = (lam - 1j * c * k[nz]) * uh[nz] / (1j * k[nz])
    return np.fft.ifft(ph)


def _fit_window(times, dev, lo, hi, min_points=5, min_decades=1.0):
    inside = np.flatnonzero((dev >= lo) & (dev <= hi))
    if inside.size < min_points:
        return None
    # longest run of consecutive samples inside the band
    breaks = np.flatnonzero(np.diff(inside) != 1)
    runs = np.split(inside, breaks + 1)
    run = max(runs, key=len)
    if run.size < min_points or np.log10(dev[run[-1]] / dev[run[0]]) < min_decades:
        return None
    slope, icpt = np.polyfit(times[run], np.log(dev[run]), 1)
    if slope <= 0:
        return None
    return float(slope), (float(times[run[0]]), float(times[run[-1]]))


def measure_growth_rate(
    model,
    spec,
    nl,
    profile: WaveProfile,
    perturbation,
    amplitude: float,
    t_final: float,
    dt: float | None = None,
    n_samples: int = 400,
    velocity_perturbation=None,
) -> GrowthMeasurement:
    """Growth rate of ``u_c + amplitude*perturbation`` in the travelling frame.

    The evolution runs in deviation form about ``u_c`` (see :func:`evolve`).
    The deviation from ``u_c`` is projected on the normalized perturbation
    (real part of the inner product). The rate is the least-squares slope of
    its logarithm over the longest stretch where it lies between
    ``10*amplitude`` and ``1e-2 * max|u_c|``. When there is no such stretch
    spanning at least a decade the result has ``found=False``.
    """
    model = ModelKind.parse(model)
    g = profile.grid
    peak = profile.amplitude
    if amplitude < 0 or amplitude > 1e-4 * peak:
        raise DomainError("amplitude must lie in [0, 1e-4 max|u_c|]")
    e = np.real(np.asarray(perturbation, dtype=complex))
    enorm = g.norm(e)
    if enorm == 0:
        raise DomainError("perturbation must be nonzero")
    e = e / enorm
    state = initial_state(model, profile, e, amplitude, None if velocity_perturbation is None else np.real(velocity_perturbation) / enorm)
    c = profile.speed_c
    if dt is None:
        # the growth rate carries an O(dt^2) splitting error; halve the default
        dt = default_dt(model, spec, nl, state, c, safety=0.25)
    n_steps = int(np.ceil(t_final / dt))
    every = max(1, n_steps // n_samples)
    base = profile.samples
    rec_t, rec_d, rec_q, rec_e = [0.0], [amplitude], [], []
    q0, e0 = invariants(model, spec, nl, state)
    rec_q.append(q0)
    rec_e.append(e0)
    count = [0]
    stop_at = 1e-1 * peak

    class _Saturated(Exception):
        pass

    def probe(t, u, phi):
        count[0] += 1
        if count[0] % every:
            return
        d = abs(g.inner(u - base, e))
        rec_t.append(t)
        rec_d.append(d)
        q, en = invariants(model, spec, nl, EvolutionState(u, g, t, phi))
        rec_q.append(q)
        rec_e.append(en)
        if d > stop_at:
            raise _Saturated

    reason = ""
    try:
        evolve(model, spec, nl, state, dt, n_steps, c_frame=c, callback=probe, base=initial_state(model, profile))
    except _Saturated:
        reason = "stopped once the deviation reached 0.1 max|u_c|"
    except BlowUpError as exc:
        reason = f"blow-up: {exc}"
    times, dev = np.array(rec_t), np.array(rec_d)
    args = (times, dev, np.array(rec_q), np.array(rec_e))
    if amplitude == 0:
        return GrowthMeasurement(float("nan"), False, *args, None, amplitude, dt, "zero amplitude")
    fit = _fit_window(times, dev, 10 * amplitude, 1e-2 * peak)
    if fit is None:
        return GrowthMeasurement(float("nan"), False, *args, None, amplitude, dt, reason or "no exponential window")
    return GrowthMeasurement(fit[0], True, *args, fit[1], amplitude, dt, reason)


def soliton_advection_error(model, spec, nl, profile: WaveProfile, t_final: float, dt: float) -> float:
    """Sup-norm error of the lab-frame solution against the exact shift by c*T."""
    state = initial_state(model, profile)
    n = int(round(t_final / dt))
    out = evolve(model, spec, nl, state, t_final / n, n)
    g = profile.grid
    shift = profile.speed_c * t_final
    exact = np.fft.ifft(np.exp(-1j * g.wavenumbers * shift) * np.fft.fft(profile.samples)).real
    return float(np.max(np.abs(out.samples - exact)))

