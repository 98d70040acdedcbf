"""Nearly spherical sets in the plane and their volume-preserving flow.

A set is described by its radius 1 + u(theta) over the unit circle. The
fractional curvature at x = a xi (a = 1 + u(theta), xi the unit vector) is
evaluated through the ray representation

    H(x) = a^{-s} H_B - 2 int_0^{2pi} int_a^{b} rho |x - rho xi'|^{-2-s} drho dtheta'

with b = 1 + u(theta'). It compares E with the disk of radius a through x,
contains no derivative of u, and linearises exactly to the discrete Riesz
operator, which keeps explicit stepping stable at every wavenumber. The
literal three-term form with the tangential derivative is available as
``method="terms"`` for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonFinite, QuadratureBudgetExceeded, StabilityCapExceeded, StarShapeViolated
from .singular_kernel import (
    CORRECTION_ORDER,
    Domain,
    HeightField,
    check_order,
    corrected_sum,
    l2_stats,
    offset_weights,
    riesz_spectrum,
    shifted,
)
from .spectral import derivative, interpolate

BALL_GRID = 2048
#: default cap on radius x radius x offset x node evaluations in the deficit
DEFICIT_BUDGET = 2 ** 26


@dataclass(frozen=True)
class GeometricMoments:
    volume: float
    barycenter: tuple
    perimeter_classical: float


@dataclass(frozen=True, eq=False)
class SphereFlowState:
    """Height field over the unit circle, fractional order and time."""

    u: HeightField
    s: float
    t: float = 0.0

    def __post_init__(self):
        if self.u.domain is not Domain.CIRCLE:
            raise ValueError("sphere states live on the circle")
        object.__setattr__(self, "s", check_order(self.s))
        if np.max(np.abs(self.u.values)) >= 1.0:
            raise StarShapeViolated("sup |u| >= 1: radius function not positive")

    @classmethod
    def from_values(cls, values, s, t: float = 0.0) -> "SphereFlowState":
        return cls(HeightField(Domain.CIRCLE, values), s, t)

    def evolve(self, values, dt: float) -> "SphereFlowState":
        return SphereFlowState(self.u.with_values(values), self.s, self.t + dt)

    @property
    def N(self) -> int:
        return self.u.N

    @property
    def radius(self) -> np.ndarray:
        return 1.0 + self.u.values

    @property
    def c1_norm(self) -> float:
        return max(float(np.max(np.abs(self.u.values))), l2_stats(self.u)[2])

    def check_regular(self):
        """Raise StarShapeViolated once the C1 norm of u reaches 1."""
        if self.c1_norm >= 1.0:
            raise StarShapeViolated(f"C1 norm of u reached {self.c1_norm:.3g}")


@lru_cache(maxsize=16)
def _gauss(q: int):
    x, w = leggauss(q)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=128)
def ball_curvature(s: float, N: int = BALL_GRID, order: int = CORRECTION_ORDER) -> float:
    """Curvature of the unit disk, (1/s) int_0^{2pi} (2 sin(phi/2))^{-s} dphi."""
    s = check_order(s)
    h = 2 * np.pi / N
    phi = h * np.arange(1, N)
    f = np.abs(2 * np.sin(phi / 2)) ** (-s)
    # the corrections are fitted on pairs (f(phi) + f(-phi)); sum_j c_j f_j covers both signs
    return float(h * np.dot(offset_weights(N, s, order), f) / s)


def _neighbours(state: SphereFlowState):
    a = state.radius
    b = shifted(a)
    h = state.u.h
    phi = h * np.arange(1, state.N)
    return a, b, phi, h


def curvature_nearly_spherical(state: SphereFlowState, method: str = "ray",
                               order: int = CORRECTION_ORDER, nodes: int = 6) -> HeightField:
    """Fractional curvature at every boundary node.

    Parameters
    ----------
    method : {"ray", "terms"}
        ``"ray"`` integrates along rays (no derivative of u); ``"terms"`` sums
        the three spherical-coordinate integrals with a spectral derivative.
    nodes : int
        Gauss-Legendre nodes for the radial integral of the ray form.
    """
    if method == "terms":
        return HeightField(Domain.CIRCLE, sum(t.values for t in curvature_terms(state, order)))
    if method != "ray":
        raise ValueError(f"unknown curvature method {method!r}")
    s = state.s
    p = (2 + s) / 2
    a, b, phi, h = _neighbours(state)
    d = b - a[:, None]
    c = np.cos(phi)[None, :]
    A = a[:, None]
    acc = np.zeros_like(b)
    for x, w in zip(*_gauss(nodes)):
        r = A + x * d
        acc += w * r * (A * A + r * r - 2 * A * r * c) ** (-p)
    H = a ** (-s) * ball_curvature(s) - 2 * corrected_sum(acc * d, s, h, order)
    if not np.all(np.isfinite(H)):
        raise NonFinite("curvature evaluation produced non-finite values")
    return HeightField(Domain.CIRCLE, H)


def curvature_terms(state: SphereFlowState, order: int = CORRECTION_ORDER):
    """The three spherical-coordinate integrals, returned separately.

    With a = 1 + u(x), b = 1 + u(y) and phi the angle from x to y, all three
    share the denominator (a^2 + b^2 - 2ab cos phi)^{(2+s)/2}; the numerators
    are (2/s)(b - a) b, (2/s) a b (1 - cos phi) and -(2/s) a u'(y) sin phi.
    """
    s = state.s
    p = (2 + s) / 2
    a, b, phi, h = _neighbours(state)
    du = shifted(derivative(state.u))
    A = a[:, None]
    c = np.cos(phi)[None, :]
    den = (A * A + b * b - 2 * A * b * c) ** (-p)
    uno = (2 / s) * (b - A) * b * den
    due = (2 / s) * A * b * (1 - c) * den
    tre = -(2 / s) * A * du * np.sin(phi)[None, :] * den
    return tuple(HeightField(Domain.CIRCLE, corrected_sum(f, s, h, order)) for f in (uno, due, tre))


def area_element(state: SphereFlowState) -> np.ndarray:
    """Arc-length density sqrt((1+u)^2 + u'^2) with respect to theta."""
    return np.sqrt(state.radius ** 2 + derivative(state.u) ** 2)


def average_curvature(state: SphereFlowState, H: HeightField | None = None,
                      weighting: str = "boundary") -> float:
    """Mean curvature over the boundary.

    ``weighting="boundary"`` uses arc length on the curve itself;
    ``weighting="sphere"`` uses the reference measure dtheta.
    """
    H = curvature_nearly_spherical(state) if H is None else H
    if weighting == "sphere":
        return float(np.mean(H.values))
    if weighting != "boundary":
        raise ValueError(f"unknown weighting {weighting!r}")
    w = area_element(state)
    return float(np.dot(H.values, w) / np.sum(w))


def curvature_deficit_sq(state: SphereFlowState, H: HeightField | None = None,
                         weighting: str = "boundary") -> float:
    """||H - Hbar||^2 in L2 of the curve (or of the reference circle)."""
    H = curvature_nearly_spherical(state) if H is None else H
    Hbar = average_curvature(state, H, weighting)
    dev = (H.values - Hbar) ** 2
    w = area_element(state) if weighting == "boundary" else 1.0
    return float(state.u.h * np.sum(dev * w))


def moments(state: SphereFlowState) -> GeometricMoments:
    """Volume, barycenter and classical perimeter in polar coordinates."""
    a = state.radius
    h = state.u.h
    th = state.u.nodes
    vol = 0.5 * h * np.sum(a ** 2)
    a3 = a ** 3
    bary = (h * np.dot(np.cos(th), a3) / (3 * vol), h * np.dot(np.sin(th), a3) / (3 * vol))
    per = h * np.sum(area_element(state))
    return GeometricMoments(float(vol), (float(bary[0]), float(bary[1])), float(per))


def fractional_perimeter(state: SphereFlowState, order: int = CORRECTION_ORDER, nodes: int = 8,
                         budget: int = DEFICIT_BUDGET) -> float:
    """Per_s(E) = int_E int_{E^c} |x - y|^{-2-s}.

    Split representation: a radial part Phi int (1+u)^{2-s} dtheta with
    Phi = H_B / (2 - s), plus half the double integral over angle pairs of

        G = int_a^b int_a^b r rho ((r - rho)^2 + r rho (2 sin(phi/2))^2)^{-(2+s)/2} dr drho,

    which vanishes for disks centred at the origin. The inner square uses a
    tensor Gauss-Legendre rule.
    """
    N = state.N
    if N * (N - 1) * nodes * nodes > budget:
        raise QuadratureBudgetExceeded(
            f"{N * (N - 1) * nodes * nodes} evaluations exceed the budget {budget}")
    s = state.s
    p = (2 + s) / 2
    a, b, phi, h = _neighbours(state)
    A = a[:, None]
    d = b - A
    c2 = (2 * np.sin(phi / 2))[None, :] ** 2
    x, w = _gauss(nodes)
    r = [A + xk * d for xk in x]
    acc = np.zeros_like(b)
    for k in range(nodes):
        for m in range(k, nodes):
            rr = r[k] * r[m]
            term = rr * ((r[k] - r[m]) ** 2 + rr * c2) ** (-p)
            acc += (w[k] * w[m] * (1 if k == m else 2)) * term
    pair = corrected_sum(acc * d * d, s, h, order)
    Phi = ball_curvature(s) / (2 - s)
    return float(Phi * h * np.sum(a ** (2 - s)) + 0.5 * h * np.sum(pair))


def perimeter_s_deficit(state: SphereFlowState, reference: str = "volume", **kw) -> float:
    """Per_s(E) - Per_s(B).

    ``reference="volume"`` compares with the disk of the same area as E
    (equal to the unit-disk deficit whenever |E| = pi, and exactly zero for
    every centred disk); ``reference="unit"`` always subtracts the unit disk.
    """
    s = state.s
    per = fractional_perimeter(state, **kw)
    per_ball = 2 * np.pi * ball_curvature(s) / (2 - s)
    if reference == "unit":
        return float(per - per_ball)
    if reference != "volume":
        raise ValueError(f"unknown reference {reference!r}")
    # subtract the radial parts first so that centred disks cancel to rounding
    a = state.radius
    h = state.u.h
    scale = (0.5 * h * np.sum(a ** 2) / np.pi) ** ((2 - s) / 2)
    Phi = ball_curvature(s) / (2 - s)
    radial = Phi * h * np.sum(a ** (2 - s))
    return float((per - radial) + Phi * (h * np.sum(a ** (2 - s)) - 2 * np.pi * scale))


@lru_cache(maxsize=64)
def stability_cap(N: int, s: float, order: int = CORRECTION_ORDER) -> float:
    """Largest stable explicit Euler step, 2 / lambda_max of the discrete operator."""
    return float(2.0 / np.max(riesz_spectrum(N, check_order(s), Domain.CIRCLE, order)))


def velocity(state: SphereFlowState, H: HeightField | None = None):
    """Return (du/dt, H, Hbar) for the volume-preserving flow."""
    H = curvature_nearly_spherical(state) if H is None else H
    w = area_element(state)
    Hbar = float(np.dot(H.values, w) / np.sum(w))
    return -(H.values - Hbar) * w / state.radius, H, Hbar


def step_vpmcf(state: SphereFlowState, dt: float, volume_reproject: bool = False,
               H: HeightField | None = None) -> SphereFlowState:
    """One explicit Euler step of u_t = -(H - Hbar) sqrt((1+u)^2 + u'^2) / (1+u)."""
    cap = stability_cap(state.N, state.s)
    if not (dt > 0):
        raise StabilityCapExceeded(f"time step must be positive, got {dt}")
    if dt > cap * (1 + 1e-12):
        raise StabilityCapExceeded(f"dt={dt:.3e} exceeds the stability cap {cap:.3e}")
    v, _, _ = velocity(state, H)
    new = state.u.values + dt * v
    if volume_reproject:
        a_old, a_new = state.radius, 1.0 + new
        new = a_new * np.sqrt(np.sum(a_old ** 2) / np.sum(a_new ** 2)) - 1.0
    if not np.all(np.isfinite(new)):
        raise NonFinite("flow step produced non-finite values")
    return state.evolve(new, dt)


# ---------------------------------------------------------------------------
# rigid motions


def translated_disk(N: int, b) -> np.ndarray:
    """Exact height function of the unit disk translated by b (|b| < 1)."""
    th = 2 * np.pi * np.arange(N) / N
    bx = b[0] * np.cos(th) + b[1] * np.sin(th)
    return bx + np.sqrt(bx * bx - b[0] ** 2 - b[1] ** 2 + 1.0) - 1.0


def translate(state: SphereFlowState, b, tol: float = 1e-15, maxiter: int = 100) -> SphereFlowState:
    """Height function of E + b, resampled on the same angular grid."""
    b = np.asarray(b, dtype=float)
    th = state.u.nodes
    xi = np.stack([np.cos(th), np.sin(th)])
    radius = state.u.with_values(state.radius)
    # solve |t xi - b| = R(arg(t xi - b)) by fixed-point iteration on t
    t = state.radius + b @ xi
    for _ in range(maxiter):
        pts = t * xi - b[:, None]
        psi = np.arctan2(pts[1], pts[0])
        R = interpolate(radius, psi)
        bx = b @ xi
        cross = b[0] * xi[1] - b[1] * xi[0]
        t_new = bx + np.sqrt(R * R - cross * cross)
        done = np.max(np.abs(t_new - t)) < tol
        t = t_new
        if done:
            break
    return SphereFlowState(state.u.with_values(t - 1.0), state.s, state.t)


def dilate(state: SphereFlowState, lam: float) -> SphereFlowState:
    """The dilation E -> (1 + lam)^{1/s} E."""
    factor = (1.0 + lam) ** (1.0 / state.s)
    return SphereFlowState(state.u.with_values(factor * state.radius - 1.0), state.s, state.t)


# ---------------------------------------------------------------------------
# runner


def resolve_dt(dt, T: float, cap: float, safety: float = 0.8):
    """Return (dt, steps) with steps * dt == T and dt <= the requested step."""
    target = safety * cap if dt == "auto" else float(dt)
    steps = max(1, int(np.ceil(T / target - 1e-9)))
    return T / steps, steps


def run_sphere_flow(config, state: SphereFlowState | None = None):
    """Run the volume-preserving flow described by a FlowConfig.

    Returns (final_state, Trajectory). Errors during stepping halt the run and
    are reported on the trajectory instead of being raised.
    """
    from .config import initial_values
    from .spectral import mode_amplitude
    from .singular_kernel import seminorm_sq
    from .trajectory import Trajectory, TrajectoryRecord, march

    if state is None:
        state = SphereFlowState.from_values(initial_values(config), config.s)
    order = config.order
    dt, steps = resolve_dt(config.dt, config.T, stability_cap(state.N, state.s, order))
    traj = Trajectory("sphere", modes=tuple(config.modes), deficit_mode=config.deficit_mode)
    proxy = {"value": 0.0, "last": None}

    def observe(st, record):
        st.check_regular()
        H = curvature_nearly_spherical(st, order=order)
        cd = curvature_deficit_sq(st, H)
        if proxy["last"] is not None:
            proxy["value"] -= dt * proxy["last"]
        proxy["last"] = cd
        if not record:
            return None, H
        if traj.deficit_mode == "direct":
            try:
                deficit = perimeter_s_deficit(st, order=order, budget=config.quadrature_budget)
            except QuadratureBudgetExceeded:
                traj.deficit_mode = "dissipation_proxy"
                deficit = proxy["value"]
        else:
            deficit = proxy["value"]
        mom = moments(st)
        _, l2, grad = l2_stats(st.u)
        rec = TrajectoryRecord(
            t=st.t, per_s_deficit=deficit, seminorm_sq=seminorm_sq(st.u, st.s, order), l2_sq=l2,
            curv_deficit_l2_sq=cd, sup_grad=grad,
            mode_amplitudes=tuple(mode_amplitude(st.u, k) for k in config.modes),
            volume=mom.volume, barycenter_x=mom.barycenter[0], barycenter_y=mom.barycenter[1],
            curv_deficit_l2_sq_sphere=curvature_deficit_sq(st, H, "sphere"),
        )
        return rec, H

    def step(st, dt_, H):
        return step_vpmcf(st, dt_, config.volume_reproject, H)

    return march(state, steps, dt, step, observe, config.cadence, traj)
