"""Periodic graphs over [0, 1): curvature, flow and perimeter deficit.

With d = u(x) - u(y) and r = |x - y| the curvature of the subgraph is

    H(x) = 2 int_R I(r, d) dy,    I(r, d) = int_0^d (r^2 + t^2)^{-(2+s)/2} dt,

the form obtained from the gradient representation by integrating the
tangential term by parts; it is derivative-free and reduces to the Riesz
operator for small slopes. The deficit against a half-plane is

    D = 1/2 int_cell int_R Q(r, d) dy dx,   Q(r, d) = int_{-d}^{d} (|d| - |t|)(r^2 + t^2)^{-(2+s)/2} dt.

Both reduce to closed forms in tau = |d| / r via a Gauss hypergeometric
function. Periodic images closer than ten times the oscillation of u are
summed exactly; the rest use a short Taylor series in d against lattice sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import hyp2f1

from .errors import NonFinite, StabilityCapExceeded
from .singular_kernel import (
    CORRECTION_ORDER,
    Domain,
    HeightField,
    check_order,
    corrected_sum,
    l2_stats,
    lattice_sum,
    riesz_spectrum,
    shifted,
    signed_offsets,
)
from .spectral import derivative

#: Taylor terms used for distant images
SERIES_TERMS = 6
#: distant images start beyond this many oscillations of u
FAR_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class GraphFlowState:
    """Periodic height field on [0, 1), fractional order and time."""

    u: HeightField
    s: float
    t: float = 0.0

    def __post_init__(self):
        if self.u.domain is not Domain.LINE:
            raise ValueError("graph states live on the periodic line")
        object.__setattr__(self, "s", check_order(self.s))

    @classmethod
    def from_values(cls, values, s, t: float = 0.0) -> "GraphFlowState":
        return cls(HeightField(Domain.LINE, values), s, t)

    @property
    def N(self) -> int:
        return self.u.N

    def evolve(self, values, dt: float) -> "GraphFlowState":
        return GraphFlowState(self.u.with_values(values), self.s, self.t + dt)


def _binom_neg(p: float, k: int) -> float:
    # binomial coefficient C(-p, k)
    out = 1.0
    for i in range(k):
        out *= -(p + i) / (i + 1)
    return out


def _incomplete(r, d, s):
    """I(r, d) = int_0^d (r^2 + t^2)^{-(2+s)/2} dt."""
    p = (2 + s) / 2
    tau = d / r
    return r ** (-1 - s) * tau * hyp2f1(0.5, p, 1.5, -tau * tau)


def _square(r, d, s):
    """Q(r, d) = 2 int_0^{|d|} (|d| - t)(r^2 + t^2)^{-(2+s)/2} dt."""
    p = (2 + s) / 2
    tau = np.abs(d) / r
    t2 = tau * tau
    F = tau * hyp2f1(0.5, p, 1.5, -t2)
    return r ** (-s) * (2 * tau * F + (2 / s) * np.expm1(-(s / 2) * np.log1p(t2)))


def image_layers(osc: float) -> int:
    """Number of image layers (each side) summed exactly for a given oscillation."""
    return max(0, math.ceil(FAR_FACTOR * osc - 0.5))


@lru_cache(maxsize=32)
def _far_sums(N: int, s: float, layers: int) -> np.ndarray:
    """Lattice sums of |delta + m|^{-(2+s)-2k} over |m| > layers, k = 0..SERIES_TERMS-1."""
    delta = signed_offsets(N) / N
    out = np.array([lattice_sum(delta, 2 + s + 2 * k, inner=layers) for k in range(SERIES_TERMS)])
    out.setflags(write=False)
    return out


def _pair_tables(state: GraphFlowState, kernel, coeffs, even: bool):
    """Primary-image and regular tables for an integrand kernel(r, d).

    For large r the kernel is expanded as base(d) * sum_k coeffs[k] d^{2k} r^{-(2+s)-2k},
    with base(d) = d (odd kernels) or d^2 (even kernels).
    """
    u = state.u.values
    s = state.s
    N = state.N
    d = u[:, None] - shifted(u)
    delta = (signed_offsets(N) / N)[None, :]
    osc = float(np.ptp(u))
    layers = image_layers(osc)
    primary = kernel(np.abs(delta), d, s)
    regular = np.zeros_like(d)
    for m in range(1, layers + 1):
        regular += kernel(np.abs(delta + m), d, s) + kernel(np.abs(delta - m), d, s)
    far = _far_sums(N, s, layers)
    d2 = d * d
    acc = coeffs[-1] * far[-1][None, :]
    for k in range(SERIES_TERMS - 2, -1, -1):
        acc = acc * d2 + coeffs[k] * far[k][None, :]
    regular += (d2 if even else d) * acc
    return primary, regular


def curvature_graph(state: GraphFlowState, order: int = CORRECTION_ORDER) -> HeightField:
    """Fractional curvature of the subgraph at every node."""
    p = (2 + state.s) / 2

    coeffs = [_binom_neg(p, k) / (2 * k + 1) for k in range(SERIES_TERMS)]
    prim, reg = _pair_tables(state, _incomplete, coeffs, even=False)
    H = 2 * corrected_sum(prim, state.s, state.u.h, order, reg)
    if not np.all(np.isfinite(H)):
        raise NonFinite("graph curvature produced non-finite values")
    return state.u.with_values(H)


def curvature_graph_terms(state: GraphFlowState, order: int = CORRECTION_ORDER) -> HeightField:
    """Literal gradient form (2/s) int (u(y) - u(x) + (x - y) u'(y)) / (r^2 + d^2)^{(2+s)/2} dy.

    Images up to :data:`IMAGE_CUTOFF` layers are summed directly; beyond that
    the integrand is expanded to second order in d and summed with Hurwitz
    zeta tails. Meant for cross-checking :func:`curvature_graph`.
    """
    from scipy.special import zeta

    from .singular_kernel import IMAGE_CUTOFF as M

    s = state.s
    p = (2 + s) / 2
    u = state.u.values
    N = state.N
    du = shifted(derivative(state.u))
    d = shifted(u) - u[:, None]
    delta = signed_offsets(N) / N

    def term(x):
        return (d - x * du) * (x * x + d * d) ** (-p)

    def even(q):
        return (zeta(q, M + 1 + delta) + zeta(q, M + 1 - delta))[None, :]

    def odd(q):
        return (zeta(q - 1, M + 1 + delta) - zeta(q - 1, M + 1 - delta))[None, :]

    prim = term(delta[None, :])
    reg = np.zeros_like(d)
    for m in range(1, M + 1):
        reg += term(delta[None, :] + m) + term(delta[None, :] - m)
    q = 2 * p
    reg += d * even(q) - du * odd(q) - p * d ** 3 * even(q + 2) + p * du * d * d * odd(q + 2)
    return state.u.with_values((2 / s) * corrected_sum(prim, s, state.u.h, order, reg))


def periodic_perimeter_deficit(state: GraphFlowState, c: float = 0.0, order: int = CORRECTION_ORDER) -> float:
    """Per_s of the subgraph minus Per_s of a half-plane, per period.

    The level ``c`` of the comparison half-plane does not enter the value; it
    is accepted for interface symmetry and only checked to be finite.
    """
    if not np.isfinite(c):
        raise NonFinite("half-plane level must be finite")
    p = (2 + state.s) / 2

    coeffs = [_binom_neg(p, k) * 2 / ((2 * k + 1) * (2 * k + 2)) for k in range(SERIES_TERMS)]
    prim, reg = _pair_tables(state, _square, coeffs, even=True)
    h = state.u.h
    value = 0.5 * h * np.sum(corrected_sum(prim, state.s, h, order, reg))
    if not np.isfinite(value):
        raise NonFinite("graph deficit is not finite")
    return float(value)


@lru_cache(maxsize=64)
def stability_cap(N: int, s: float, order: int = CORRECTION_ORDER) -> float:
    """Largest stable explicit Euler step, 2 / lambda_max of the discrete operator."""
    return float(2.0 / np.max(riesz_spectrum(N, check_order(s), Domain.LINE, order)))


def velocity(state: GraphFlowState, H: HeightField | None = None):
    H = curvature_graph(state) if H is None else H
    return -H.values * np.sqrt(1.0 + derivative(state.u) ** 2), H


def step_graph(state: GraphFlowState, dt: float, H: HeightField | None = None) -> GraphFlowState:
    """One explicit Euler step of u_t = -H sqrt(1 + u'^2)."""
    cap = stability_cap(state.N, state.s)
    if not (dt > 0):
        raise StabilityCapExceeded(f"time step must be positive, got {dt}")
    if dt > cap * (1 + 1e-12):
        raise StabilityCapExceeded(f"dt={dt:.3e} exceeds the stability cap {cap:.3e}")
    v, _ = velocity(state, H)
    new = state.u.values + dt * v
    if not np.all(np.isfinite(new)):
        raise NonFinite("flow step produced non-finite values")
    return state.evolve(new, dt)


def run_graph_flow(config, state: GraphFlowState | None = None):
    """Run the graph flow described by a FlowConfig; returns (final_state, Trajectory)."""
    from .config import initial_values
    from .singular_kernel import seminorm_sq
    from .sphere_flow import resolve_dt
    from .spectral import mode_amplitude
    from .trajectory import Trajectory, TrajectoryRecord, march

    if state is None:
        state = GraphFlowState.from_values(initial_values(config), config.s)
    order = config.order
    dt, steps = resolve_dt(config.dt, config.T, stability_cap(state.N, state.s, order))
    traj = Trajectory("graph", modes=tuple(config.modes), deficit_mode=config.deficit_mode)
    proxy = {"value": 0.0, "last": None}

    def observe(st, record):
        H = curvature_graph(st, order)
        h = st.u.h
        w = np.sqrt(1.0 + derivative(st.u) ** 2)
        hsq = float(h * np.sum(H.values ** 2))
        if proxy["last"] is not None:
            proxy["value"] -= dt * proxy["last"]
        proxy["last"] = float(h * np.sum(H.values ** 2 * w))
        if not record:
            return None, H
        mean, l2, grad = l2_stats(st.u)
        dev = st.u.values - mean
        if traj.deficit_mode == "direct":
            deficit = periodic_perimeter_deficit(st, order=order)
        else:
            deficit = proxy["value"]
        rec = TrajectoryRecord(
            t=st.t, per_s_deficit=deficit, seminorm_sq=seminorm_sq(st.u, st.s, order), l2_sq=l2,
            curv_deficit_l2_sq=hsq, sup_grad=grad,
            mode_amplitudes=tuple(mode_amplitude(st.u, k) for k in config.modes),
            mean=mean, l2_dev=float(np.sqrt(h * np.dot(dev, dev))),
        )
        return rec, H

    def step(st, dt_, H):
        return step_graph(st, dt_, H)

    return march(state, steps, dt, step, observe, config.cadence, traj)
