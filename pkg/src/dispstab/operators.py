"""Periodic grid, Fourier multipliers and the model catalogue.

Everything here is a pure function of its inputs. Arrays are sampled on
``x_j = -L + j*dx`` (``j = 0..N-1``) so that ``x = 0`` sits at index ``N/2``.
Wavenumbers are stored in FFT order; ``Grid.sorted_wavenumbers`` gives the
ascending ``-N/2..N/2-1`` ordering.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DomainError, InputShapeError, SymmetryError

__all__ = [
    "Grid",
    "DispersionSpec",
    "Nonlinearity",
    "ModelKind",
    "apply_multiplier",
    "resolvent_symbol",
    "resolvent_factor",
    "multiplier_matrix",
    "fourier_matrix",
    "derivative",
    "dealias_mask",
    "SYMBOL_PRESETS",
    "make_symbol",
]


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)``."""

    half_length: float
    n_points: int

    def __post_init__(self):
        n = int(self.n_points)
        if n < 64 or n & (n - 1):
            raise DomainError(f"n_points must be a power of two >= 64, got {self.n_points}")
        if not self.half_length > 0:
            raise DomainError(f"half_length must be positive, got {self.half_length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "half_length", float(self.half_length))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n_points)

    @property
    def mode_index(self) -> np.ndarray:
        """Integer mode numbers j in FFT order."""
        n = self.n_points
        return np.concatenate([np.arange(0, n // 2), np.arange(-n // 2, 0)])

    @property
    def wavenumbers(self) -> np.ndarray:
        return (np.pi / self.half_length) * self.mode_index

    @property
    def sorted_wavenumbers(self) -> np.ndarray:
        return (np.pi / self.half_length) * np.arange(-self.n_points // 2, self.n_points // 2)

    @property
    def k_max(self) -> float:
        return np.pi * self.n_points / (2.0 * self.half_length)

    @property
    def center(self) -> int:
        return self.n_points // 2

    def check(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != (self.n_points,):
            raise InputShapeError(f"expected {self.n_points} samples, got shape {u.shape}")
        return u

    def inner(self, u, v) -> float:
        """Real part of the discrete L2 inner product (trapezoid on a periodic grid)."""
        return float(np.real(np.vdot(v, u)) * self.dx)

    def norm(self, u) -> float:
        return float(np.sqrt(self.dx) * np.linalg.norm(u))

    def integrate(self, u) -> float:
        return float(np.sum(np.real(u)) * self.dx)

    def refined(self, factor: int = 2, length_factor: int | None = None) -> "Grid":
        """Grid with ``factor`` times the points and ``length_factor`` times the box."""
        lf = factor if length_factor is None else length_factor
        return Grid(self.half_length * lf, self.n_points * factor)


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean mask of modes kept by the 2/3 rule."""
    return np.abs(grid.mode_index) < grid.n_points / 3.0


def derivative(grid: Grid, u, order: int = 1) -> np.ndarray:
    """Spectral derivative; the Nyquist mode is dropped for odd orders."""
    u = grid.check(u)
    sym = (1j * grid.wavenumbers) ** order
    if order % 2:
        sym[grid.n_points // 2] = 0.0
    out = np.fft.ifft(sym * np.fft.fft(u))
    return out.real if np.isrealobj(u) else out


# ---------------------------------------------------------------------------
# Dispersion symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DispersionSpec:
    """Even real symbol alpha(k) with growth data ``a|k|^m <= alpha + gamma <= b|k|^m``."""

    symbol: Callable[[np.ndarray], np.ndarray]
    exponent_m: float
    lower_a: float
    upper_b: float
    shift_gamma: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.exponent_m < 1:
            raise DomainError("exponent_m must be >= 1")
        if self.lower_a <= 0 or self.upper_b <= 0:
            raise DomainError("lower_a and upper_b must be positive")
        if self.shift_gamma < 0:
            raise DomainError("shift_gamma must be nonnegative")

    def __call__(self, k) -> np.ndarray:
        return np.asarray(self.symbol(np.asarray(k, dtype=float)), dtype=float)

    def on(self, grid: Grid) -> np.ndarray:
        return self(grid.wavenumbers)

    def check(self, grid: Grid, rtol: float = 1e-12) -> dict:
        """Verify evenness and the growth bounds on the grid's largest wavenumbers.

        Returns the observed ratio range of ``(alpha + gamma)/|k|^m`` over the
        top quarter of ``|k|``; raises :class:`SymmetryError` on an odd or
        complex symbol and :class:`DomainError` when the lower bound fails.
        """
        k = grid.sorted_wavenumbers[1:]  # drop the unpaired Nyquist mode
        pos, neg = self(k), self(-k)
        scale = max(1.0, float(np.max(np.abs(pos))))
        if not np.all(np.isfinite(pos)):
            raise SymmetryError(f"symbol {self.name} is not finite on the grid")
        if np.max(np.abs(pos - neg)) > rtol * scale:
            raise SymmetryError(f"symbol {self.name} is not even")
        kk = np.abs(grid.sorted_wavenumbers)
        top = kk >= 0.75 * kk.max()
        ratio = (self(kk[top]) + self.shift_gamma) / kk[top] ** self.exponent_m
        if ratio.min() < self.lower_a * (1 - 1e-9):
            raise DomainError(
                f"symbol {self.name}: (alpha+gamma)/|k|^m = {ratio.min():.3g} < a = {self.lower_a}"
            )
        return {"ratio_min": float(ratio.min()), "ratio_max": float(ratio.max())}


def _ilw(H):
    def alpha(k):
        k = np.asarray(k, dtype=float)
        out = np.empty_like(k)
        small = np.abs(k * H) < 1e-6
        ks = k[~small]
        out[~small] = ks / np.tanh(ks * H) - 1.0 / H
        # series k coth(kH) = 1/H + k^2 H/3 - ...
        out[small] = k[small] ** 2 * H / 3.0
        return out

    return alpha


def make_symbol(name: str, **params) -> DispersionSpec:
    """Build one of the named symbols.

    ``quadratic`` k^2, ``abs`` |k|, ``smith`` sqrt(1+k^2)-1, ``ilw`` k coth(kH)-1/H,
    ``fifth_order`` -k^2+delta k^4, ``benjamin`` -|k|+delta k^2, ``power`` |k|^mu,
    ``tabulated`` (arrays ``k`` and ``alpha``, interpolated in |k|).
    """
    if name == "quadratic":
        return DispersionSpec(lambda k: k**2, 2.0, 1.0, 1.0, 0.0, name)
    if name == "abs":
        return DispersionSpec(np.abs, 1.0, 1.0, 1.0, 0.0, name)
    if name == "smith":
        return DispersionSpec(lambda k: np.sqrt(1.0 + k**2) - 1.0, 1.0, 0.5, 1.0, 0.0, name)
    if name == "power":
        mu = float(params["mu"])
        return DispersionSpec(lambda k: np.abs(k) ** mu, max(mu, 1.0), 1.0, 1.0, 0.0, name, {"mu": mu})
    if name == "ilw":
        H = float(params.get("H", 1.0))
        if H <= 0:
            raise DomainError("ilw depth H must be positive")
        return DispersionSpec(_ilw(H), 1.0, 0.5, 1.0, 0.0, name, {"H": H})
    if name == "fifth_order":
        d = float(params["delta"])
        if d <= 0:
            raise DomainError("delta must be positive")
        return DispersionSpec(
            lambda k: -(k**2) + d * k**4, 4.0, d / 2.0, d, 1.0 / (4.0 * d), name, {"delta": d}
        )
    if name == "benjamin":
        d = float(params["delta"])
        if d <= 0:
            raise DomainError("delta must be positive")
        return DispersionSpec(
            lambda k: -np.abs(k) + d * k**2, 2.0, d / 2.0, d, 1.0 / (4.0 * d), name, {"delta": d}
        )
    if name == "tabulated":
        kt = np.asarray(params["k"], dtype=float)
        at = np.asarray(params["alpha"], dtype=float)
        m = float(params.get("m", 2.0))
        if kt.ndim != 1 or kt.shape != at.shape or np.any(np.diff(kt) <= 0) or kt[0] < 0:
            raise DomainError("tabulated symbol needs ascending nonnegative k and matching alpha")
        # extrapolate with the last value times (|k|/k_last)^m
        def alpha(k):
            ak = np.abs(np.asarray(k, dtype=float))
            out = np.interp(ak, kt, at)
            far = ak > kt[-1]
            out[far] = at[-1] * (ak[far] / kt[-1]) ** m
            return out

        gamma = max(0.0, -float(at.min()))
        a = float(params.get("a", 0.5 * at[-1] / kt[-1] ** m))
        b = float(params.get("b", 2.0 * at[-1] / kt[-1] ** m))
        return DispersionSpec(alpha, m, a, b, gamma, name, {"m": m})
    raise DomainError(f"unknown symbol preset {name!r}")


SYMBOL_PRESETS = ("quadratic", "abs", "smith", "ilw", "fifth_order", "benjamin", "power", "tabulated")


# ---------------------------------------------------------------------------
# Nonlinearity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Nonlinearity:
    """f with f(0)=f'(0)=0, its derivative and ``F(u) = int_0^u f'(s) s ds``.

    ``degree`` is set for homogeneous f (a single power) and selects the
    Petviashvili stabilizing exponent.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    big_f: Callable[[np.ndarray], np.ndarray]
    degree: float | None = None
    label: str = "custom"
    coefficients: dict = field(default_factory=dict)

    @classmethod
    def polynomial(cls, coefficients: dict) -> "Nonlinearity":
        """``f(u) = sum_j a_j u^j`` for integer powers j >= 2."""
        coeffs = {int(p): float(a) for p, a in coefficients.items() if float(a) != 0.0}
        if not coeffs:
            raise DomainError("nonlinearity needs at least one nonzero coefficient")
        if min(coeffs) < 2:
            raise DomainError("powers must be >= 2 so that f(0) = f'(0) = 0")

        def f(u):
            return sum(a * u**p for p, a in coeffs.items())

        def fp(u):
            return sum(a * p * u ** (p - 1) for p, a in coeffs.items())

        def F(u):
            return sum(a * p / (p + 1.0) * u ** (p + 1) for p, a in coeffs.items())

        degree = float(next(iter(coeffs))) if len(coeffs) == 1 else None
        label = " + ".join(f"{a:g}*u^{p}" for p, a in sorted(coeffs.items()))
        return cls(f, fp, F, degree, label, coeffs)

    @classmethod
    def power(cls, p: int, coeff: float = 1.0) -> "Nonlinearity":
        return cls.polynomial({int(p): coeff})

    @classmethod
    def classical(cls) -> "Nonlinearity":
        """``f(u) = u^2/2``, the normalization of the textbook KdV/BO/BBM solitons."""
        return cls.power(2, 0.5)

    def primitive(self, u):
        """``G(u) = int_0^u f(s) ds = u f(u) - F(u)``."""
        return u * self.f(u) - self.big_f(u)

    def check(self, samples=None, h: float = 1e-5, rtol: float = 1e-6) -> None:
        if abs(float(self.f(np.array(0.0)))) > 1e-14 or abs(float(self.f_prime(np.array(0.0)))) > 1e-14:
            raise DomainError("need f(0) = f'(0) = 0")
        u = np.linspace(-1.5, 1.5, 13) if samples is None else np.asarray(samples, float)
        dF = (self.big_f(u + h) - self.big_f(u - h)) / (2 * h)
        ref = self.f_prime(u) * u
        if np.max(np.abs(dF - ref)) > rtol * max(1.0, float(np.max(np.abs(ref)))):
            raise DomainError("big_f is not an antiderivative of f'(u) u")
        df = (self.f(u + h) - self.f(u - h)) / (2 * h)
        if np.max(np.abs(df - self.f_prime(u))) > rtol * max(1.0, float(np.max(np.abs(df)))):
            raise DomainError("f_prime is not the derivative of f")


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


class ModelKind(str, enum.Enum):
    """The three equation families.

    Every solitary-wave equation has the form ``(M + s) u = kappa f(u)``; the
    linear shift ``s`` and coupling ``kappa`` depend on the family and speed.
    """

    BBM = "BBM"
    KDV = "KDV"
    RBOU = "RBOU"

    @classmethod
    def parse(cls, tag) -> "ModelKind":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).upper())
        except ValueError:
            raise DomainError(f"unknown model {tag!r}") from None

    def shift(self, c: float) -> float:
        if self is ModelKind.KDV:
            return c
        if self is ModelKind.BBM:
            return 1.0 - 1.0 / c
        return 1.0 - 1.0 / c**2

    def coupling(self, c: float) -> float:
        if self is ModelKind.KDV:
            return 1.0
        if self is ModelKind.BBM:
            return 1.0 / c
        return 1.0 / c**2

    def admissible(self, c: float, gamma: float = 0.0) -> bool:
        if not np.isfinite(c) or c == 0:
            return False
        if self is ModelKind.KDV:
            return c > max(gamma, 0.0)
        if self is ModelKind.BBM:
            return c > 1.0 and 1.0 - 1.0 / c > gamma
        return c * c > 1.0 and 1.0 - 1.0 / c**2 > gamma

    def require(self, c: float, gamma: float = 0.0) -> None:
        if not self.admissible(c, gamma):
            raise DomainError(f"speed c={c} is not admissible for {self.value} (gamma={gamma})")


# ---------------------------------------------------------------------------
# Multipliers
# ---------------------------------------------------------------------------


def apply_multiplier(grid: Grid, spec, u) -> np.ndarray:
    """Inverse transform of ``alpha(k) * u_hat``.

    ``spec`` is a :class:`DispersionSpec`, a callable, or an array of symbol
    values in FFT order.
    """
    u = grid.check(u)
    sym = _symbol_values(grid, spec)
    out = np.fft.ifft(sym * np.fft.fft(u))
    return out.real if np.isrealobj(u) else out


def resolvent_symbol(grid: Grid, lam: float, c: float, sign: int) -> np.ndarray:
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    if c == 0:
        raise DomainError("c must be nonzero")
    k = grid.wavenumbers
    return lam / (lam + sign * 1j * c * k)


def resolvent_factor(grid: Grid, lam: float, c: float, sign: int, u) -> np.ndarray:
    """Apply ``E = lam/(lam +- c d/dx)``; a contraction that fixes the k=0 mode."""
    u = grid.check(u)
    out = np.fft.ifft(resolvent_symbol(grid, lam, c, sign) * np.fft.fft(u))
    return out.real if np.isrealobj(u) else out


def _symbol_values(grid: Grid, symbol) -> np.ndarray:
    if isinstance(symbol, DispersionSpec):
        return symbol.on(grid)
    if callable(symbol):
        return np.asarray(symbol(grid.wavenumbers))
    vals = np.asarray(symbol)
    if vals.shape != (grid.n_points,):
        raise InputShapeError("symbol array must have one value per mode")
    return vals


def fourier_matrix(grid: Grid, symbol) -> np.ndarray:
    """Collocation matrix ``F^-1 diag(symbol) F`` projected onto real operators.

    For a Hermitian symbol (``s(-k) = conj s(k)``) the projection only touches
    the unpaired Nyquist mode, where the symbol is replaced by its real part.
    """
    col = np.fft.ifft(_symbol_values(grid, symbol))
    return scipy.linalg.circulant(col.real)


def multiplier_matrix(grid: Grid, symbol, rtol: float = 1e-12) -> np.ndarray:
    """Real symmetric matrix of an even real multiplier."""
    vals = _symbol_values(grid, symbol)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > rtol * scale:
        raise SymmetryError("multiplier symbol must be real")
    vals = np.real(vals)
    j = grid.mode_index
    paired = np.abs(j) < grid.n_points // 2
    mirror = vals[(-j[paired]) % grid.n_points]
    if np.max(np.abs(vals[paired] - mirror)) > rtol * scale:
        raise SymmetryError("multiplier symbol must be even")
    return fourier_matrix(grid, vals)
