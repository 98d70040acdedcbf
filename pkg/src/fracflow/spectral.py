"""Fourier analysis on the circle: mode splitting and Riesz eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma

from .errors import ModeUnderResolved
from .singular_kernel import (
    CORRECTION_ORDER,
    Domain,
    HeightField,
    check_order,
    inner,
    riesz_apply,
)

#: grid used by :func:`eigenvalue`
REFERENCE_GRID = 512

# orthonormal low modes on the unit circle (|B| = pi, n = 2)
_Y0 = 1.0 / np.sqrt(2 * np.pi)
_Y1 = 1.0 / np.sqrt(np.pi)


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Degree-0 coefficient ``a``, degree-1 pair ``b`` and remainder ``R``."""

    a: float
    b: np.ndarray
    R: HeightField

    def reconstruct(self) -> HeightField:
        th = self.R.nodes
        vals = self.a * _Y0 + _Y1 * (self.b[0] * np.cos(th) + self.b[1] * np.sin(th)) + self.R.values
        return self.R.with_values(vals)


def decompose(u: HeightField) -> SpectralSplit:
    """Project onto {Y0, Y1} (normalised constants and first harmonics)."""
    if u.domain is not Domain.CIRCLE:
        raise ValueError("decompose needs a circle field")
    th = u.nodes
    c, sn = np.cos(th), np.sin(th)
    a = u.h * np.sum(u.values) * _Y0
    b = np.array([u.h * np.dot(u.values, c) * _Y1, u.h * np.dot(u.values, sn) * _Y1])
    R = u.values - a * _Y0 - _Y1 * (b[0] * c + b[1] * sn)
    return SpectralSplit(float(a), b, u.with_values(R))


def derivative(u: HeightField) -> np.ndarray:
    """Spectral derivative with respect to the grid coordinate (Nyquist mode dropped)."""
    N = u.N
    k = np.fft.rfftfreq(N, d=1.0 / N) * (2 * np.pi / u.cell_length)
    U = np.fft.rfft(u.values) * 1j * k
    U[-1] = 0.0
    return np.fft.irfft(U, N)


def interpolate(u: HeightField, points) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``u`` at arbitrary coordinates."""
    N = u.N
    pts = np.asarray(points, dtype=float) * (2 * np.pi / u.cell_length)
    U = np.fft.rfft(u.values) / N
    U[1:-1] *= 2
    k = np.arange(U.size)
    phase = np.exp(1j * np.multiply.outer(pts, k))
    return np.real(phase @ U)


def mode_amplitude(u: HeightField, k: int) -> float:
    """Magnitude of the k-th Fourier mode (cosine and sine parts combined)."""
    N = u.N
    if not (0 <= k <= N // 2):
        raise ModeUnderResolved(f"mode {k} outside 0..{N // 2}")
    U = np.fft.rfft(u.values)
    scale = 1.0 if k in (0, N // 2) else 2.0
    return float(scale * np.abs(U[k]) / N)


@lru_cache(maxsize=256)
def eigenvalue(k: int, s: float, N: int = REFERENCE_GRID, order: int = CORRECTION_ORDER) -> float:
    """Rayleigh quotient of cos(k theta) for the discrete circle Riesz operator."""
    s = check_order(s)
    if k < 0 or k > N // 4:
        raise ModeUnderResolved(f"mode {k} needs k <= N/4 = {N // 4}")
    if k == 0:
        return 0.0
    u = HeightField.from_function(Domain.CIRCLE, N, lambda t: np.cos(k * t))
    return inner(u, riesz_apply(u, s, order)) / inner(u, u)


def eigenvalue_closed_form(k: int, s: float) -> float:
    """Exact circle eigenvalue 2 int_0^{2pi} (1 - cos k phi) (2 sin(phi/2))^{-2-s} dphi.

    Gamma-function form: lambda_k = c * (G(k) - G(0)) with
    G(k) = Gamma(k + 1 + s/2) / Gamma(k - s/2).
    """
    s = check_order(s)
    if k == 0:
        return 0.0
    lam1 = 2 * np.pi * _gamma(1 - s) / _gamma(1 - s / 2) ** 2

    def g(m):
        return _gamma(m + 1 + s / 2) / _gamma(m - s / 2)

    return float(lam1 * (g(k) - g(0)) / (g(1) - g(0)))


def line_eigenvalue(k: int, s: float) -> float:
    """Exact symbol of the periodic-line Riesz operator on cos(2 pi k x)."""
    s = check_order(s)
    w = 2 * np.pi * abs(k)
    return float(2 * np.pi * w ** (1 + s) / (_gamma(2 + s) * np.cos(np.pi * s / 2)))
