"""Independent reference computations used by the tests.

Nothing here imports the package: closed-form solitons, closed-form
momenta, and brute-force dense discretizations built from an explicit
DFT matrix.
"""
import numpy as np


def sech2(z):
    return 1.0 / np.cosh(z) ** 2


def kdv_soliton(x, c):
    """Solves -u'' + c u = u^2/2."""
    return 3 * c * sech2(np.sqrt(c) * x / 2)


def bo_soliton(x, c):
    """Solves H u' + c u = u^2/2."""
    return 4 * c / (1 + (c * x) ** 2)


def sech2_params(model, c):
    """Amplitude a and rate b of ``a sech^2(b x)`` for classical f = u^2/2."""
    s = {"KDV": c, "BBM": 1 - 1 / c, "RBOU": 1 - 1 / c**2}[model]
    kappa = {"KDV": 1.0, "BBM": 1 / c, "RBOU": 1 / c**2}[model]
    return 3 * s / kappa, np.sqrt(s) / 2


def gkdv_soliton(x, c, p):
    """Solves -u'' + c u = u^p."""
    return ((p + 1) * c / 2 * sech2((p - 1) * np.sqrt(c) * x / 2)) ** (1 / (p - 1))


def sech2_integrals(a, b):
    """(int u^2, int u_x^2) for u = a sech^2(b x)."""
    return a * a * 4 / (3 * b), 16 * a * a * b / 15


def momentum(model, c):
    """Closed-form P(c) for the classical sech^2 solitons."""
    a, b = sech2_params(model, c)
    i0, i1 = sech2_integrals(a, b)
    if model == "KDV":
        return 0.5 * i0
    if model == "BBM":
        return 0.5 * (i0 + i1)
    return c * (i0 + i1)


def dmomentum(model, c, h=1e-3):
    """dP/dc by Richardson-extrapolated centred differences of the closed form."""
    d1 = (momentum(model, c + h) - momentum(model, c - h)) / (2 * h)
    d2 = (momentum(model, c + h / 2) - momentum(model, c - h / 2)) / h
    return (4 * d2 - d1) / 3


def moving_kernel_coefficient(model, c):
    """lim k_lambda / lambda^2 = -w(c) P'(c) / ||u_x||^2."""
    a, b = sech2_params(model, c)
    w = {"KDV": 1.0, "BBM": 1 / c, "RBOU": 1 / c**2}[model]
    return -w * dmomentum(model, c) / sech2_integrals(a, b)[1]


def dft_operators(L, N):
    """Dense x grid, first-derivative and second-derivative matrices built from an explicit DFT."""
    x = -L + 2 * L * np.arange(N) / N
    j = np.concatenate([np.arange(0, N // 2), np.arange(-N // 2, 0)])
    k = np.pi / L * j
    F = np.exp(-2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N)
    Finv = F.conj().T / N
    k1 = k.copy()
    k1[N // 2] = 0.0
    D1 = (Finv @ np.diag(1j * k1) @ F).real
    D2 = (Finv @ np.diag(-(k**2)) @ F).real
    return x, D1, D2


def kdv_unstable_eigenvalue(L, N, c, p):
    """Largest real eigenvalue of d/dx L0 for gKdV f = u^p; L0 = -d^2 + c - p u^(p-1)."""
    x, D1, D2 = dft_operators(L, N)
    u = gkdv_soliton(x, c, p)
    L0 = -D2 + c * np.eye(N) - np.diag(p * u ** (p - 1))
    w = np.linalg.eigvals(D1 @ L0)
    real = w[np.abs(w.imag) < 1e-8 * max(1.0, np.abs(w).max())].real
    return real.max(), w


def kdv_L0_low_eigenvalues(c):
    """Exact lowest eigenvalues of -d^2 + c - 3c sech^2(sqrt(c) x/2) (Poschl-Teller, l=3)."""
    return np.array([-5 * c / 4, 0.0, 3 * c / 4])


def fd_negative_count(L, N, c):
    """n- of L0 for classical KdV with second-order finite differences (Dirichlet ends)."""
    x = np.linspace(-L, L, N)
    h = x[1] - x[0]
    main = 2 / h**2 + c - kdv_soliton(x, c)
    off = -np.ones(N - 1) / h**2
    from scipy.linalg import eigh_tridiagonal

    w = eigh_tridiagonal(main, off, eigvals_only=True, select="i", select_range=(0, 4))
    return int(np.sum(w < -1e-3)), w
