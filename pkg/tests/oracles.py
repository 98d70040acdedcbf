"""Independent quadrature oracles (scipy QUADPACK and mpmath), no package code.

The frozen constants in the tests were produced with these functions;
``python3 tests/oracles.py`` prints them again.
"""

from __future__ import annotations

import warnings

import numpy as np
from mpmath import mp
from scipy.integrate import IntegrationWarning, quad


def _sym_alg(g, s, upper=np.pi):
    # 2 int_0^upper phi^{-s} g(phi) dphi via the algebraic-weight rule (QAWS)
    val, _ = quad(g, 0.0, upper, weight="alg", wvar=(-s, 0.0), epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2 * val


def ball_integral(s):
    """int_0^{2pi} (2 sin(phi/2))^{-s} dphi."""
    return _sym_alg(lambda p: (p / (2 * np.sin(p / 2))) ** s if p > 0 else 1.0, s)


def circle_eigenvalue(k, s):
    """2 int_0^{2pi} (1 - cos k phi) (2 sin(phi/2))^{-2-s} dphi."""

    def g(p):
        if p == 0:
            return k * k / 2
        return 2 * np.sin(k * p / 2) ** 2 / p ** 2 * (p / (2 * np.sin(p / 2))) ** (2 + s)

    return 2 * _sym_alg(g, s)


def line_symbol(k, s):
    """int_R (1 - cos 2 pi k r) |r|^{-2-s} dr, times 2."""
    w = 2 * np.pi * k

    def g(r):
        return 2 * np.sin(w * r / 2) ** 2 / r ** 2 if r > 0 else w * w / 2

    near, _ = quad(g, 0.0, 1.0, weight="alg", wvar=(-s, 0.0), epsabs=1e-14, epsrel=1e-13, limit=200)
    with warnings.catch_warnings():
        # QAWF flags the slowly decaying cycles; the tail agrees with the closed form to 1e-13
        warnings.simplefilter("ignore", IntegrationWarning)
        tail_cos, _ = quad(lambda r: r ** (-2 - s), 1.0, np.inf, weight="cos", wvar=w, epsabs=1e-14)
    tail = 1.0 / (1 + s) - tail_cos
    return 2 * 2 * (near + tail)


def graph_curvature_cos(A, s, x=0.0, M=200, dps=30):
    """(2/s) int_R (u(y)-u(x)+(x-y)u'(y)) / (|x-y|^2+(u(x)-u(y))^2)^{(2+s)/2} dy for u = A cos 2 pi x.

    The sides y = x +- r are paired and integrated cell by cell in extended
    precision for r < M. For integer M, integrating the far field by parts
    gives the pair tail 2 u(x) (s/(1+s) M^{-1-s} - s(2+s) M^{-3-s}/(2 pi)^2)
    up to O(A^3 M^{-3-s}).
    """
    with mp.workdps(dps):
        A, s, x = mp.mpf(A), mp.mpf(s), mp.mpf(x)
        p = (2 + s) / 2
        w = 2 * mp.pi
        ux = A * mp.cos(w * x)

        def f(r):
            y = x + r
            uy = A * mp.cos(w * y)
            return (uy - ux - r * (-A * w * mp.sin(w * y))) / (r * r + (ux - uy) ** 2) ** p

        def g(r):
            return f(r) + f(-r)

        total = mp.quad(g, [0, mp.mpf(1) / 4, mp.mpf(1) / 2, 1])
        for m in range(1, M):
            total += mp.quad(g, [m, m + mp.mpf(1) / 2, m + 1], method="gauss-legendre")
        total += 2 * ux * (s / (1 + s) * mp.mpf(M) ** (-1 - s) - s * (2 + s) * mp.mpf(M) ** (-3 - s) / w ** 2)
        return float((2 / s) * total)


def sphere_curvature(u, du, s, theta, dps=30):
    """Three-term spherical-coordinate curvature of {r < 1 + u} at angle theta.

    ``u`` and ``du`` take and return mpmath numbers.
    """
    with mp.workdps(dps):
        s, theta = mp.mpf(s), mp.mpf(theta)
        p = (2 + s) / 2
        a = 1 + u(theta)

        def f(phi):
            y = theta + phi
            b = 1 + u(y)
            h2 = mp.sin(phi / 2) ** 2
            num = (b - a) * b + 2 * a * b * h2 - a * du(y) * mp.sin(phi)
            return (2 / s) * num / ((a - b) ** 2 + 4 * a * b * h2) ** p

        # r = t^q with q = 1/(1-s) turns the r^{-s} endpoint into a bounded integrand
        q = 1 / (1 - s)

        def g(t):
            r = t ** q
            return (f(r) + f(-r)) * q * t ** (q - 1)

        top = mp.pi ** (1 / q)
        return float(mp.quad(g, mp.linspace(0, top, 5), method="gauss-legendre"))


if __name__ == "__main__":
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        print(f"ball s={s}: {ball_integral(s) / s!r}")
    print("lambda1(0.5)", repr(circle_eigenvalue(1, 0.5)), "lambda2(0.5)", repr(circle_eigenvalue(2, 0.5)))
    print("mu(1,0.5)", repr(line_symbol(1, 0.5)))
    print("graph H(0), A=0.05", repr(graph_curvature_cos(0.05, 0.5)))
    u = lambda t: mp.mpf("0.05") * mp.cos(2 * t)  # noqa: E731
    du = lambda t: -mp.mpf("0.1") * mp.sin(2 * t)  # noqa: E731
    for th in (0.0, np.pi / 4):
        print(f"sphere H({th})", repr(sphere_curvature(u, du, 0.5, th)))
