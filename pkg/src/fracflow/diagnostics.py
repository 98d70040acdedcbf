"""Numerical checks of inequalities, expansions, identities and decay rates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWindow, InsufficientRecords, NonFinite, NonPositiveValues, NotNormalized
from .singular_kernel import (
    CORRECTION_ORDER,
    Domain,
    HeightField,
    check_order,
    corrected_sum,
    l2_stats,
    seminorm_sq,
    shifted,
)
from .spectral import derivative
from .sphere_flow import (
    SphereFlowState,
    ball_curvature,
    curvature_deficit_sq,
    curvature_nearly_spherical,
    dilate,
    moments,
    perimeter_s_deficit,
    translate,
)

NORMALIZATION_TOL = 1e-8
DEGENERATE_LHS = 1e-13


@dataclass(frozen=True)
class InequalityReport:
    """lhs <= C * rhs style comparison; ``ratio = rhs / lhs`` when lhs > 0."""

    lhs: float
    rhs: float
    ratio: float
    ensemble_min_ratio: float
    grid_meta: tuple
    degenerate: bool = False


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple


# ---------------------------------------------------------------------------
# normalisation


def is_normalized(state: SphereFlowState, tol: float = NORMALIZATION_TOL) -> bool:
    m = moments(state)
    return abs(m.volume - np.pi) <= tol and max(abs(m.barycenter[0]), abs(m.barycenter[1])) <= tol


def require_normalized(state: SphereFlowState, tol: float = NORMALIZATION_TOL):
    if not is_normalized(state, tol):
        m = moments(state)
        raise NotNormalized(f"volume {m.volume:.12g} (want pi), barycenter {m.barycenter}")


def normalize(state: SphereFlowState, tol: float = 1e-14, maxiter: int = 8) -> SphereFlowState:
    """Recentre (resampling the translated height function), then dilate to volume pi."""
    for _ in range(maxiter):
        m = moments(state)
        state = translate(state, -np.asarray(m.barycenter))
        vol = moments(state).volume
        state = dilate(state, (np.pi / vol) ** (state.s / 2) - 1.0)
        m = moments(state)
        if abs(m.volume - np.pi) <= tol and max(map(abs, m.barycenter)) <= tol:
            break
    return state


def random_states(N: int, s: float, eps: float, count: int, seed: int = 0, band: int = 8):
    """Normalised random band-limited states; member i uses seed ``seed + i``."""
    from .config import random_field

    out = []
    for i in range(count):
        u = random_field(N, 2 * np.pi, seed + i, eps, band, "sup", k_min=2)
        out.append(normalize(SphereFlowState.from_values(u, s)))
    return out


# ---------------------------------------------------------------------------
# inequalities


def _report(lhs, rhs, state) -> InequalityReport:
    meta = (state.N, state.s, float(np.max(np.abs(state.u.values))))
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        raise NonFinite("inequality sides are not finite")
    if lhs <= DEGENERATE_LHS:
        return InequalityReport(float(lhs), float(rhs), float("nan"), float("nan"), meta, True)
    r = rhs / lhs
    return InequalityReport(float(lhs), float(rhs), float(r), float(r), meta)


def alexandrov_check(state: SphereFlowState) -> InequalityReport:
    """lhs = [u]^2 + ||u||^2, rhs = ||H - Hbar||^2 on the curve."""
    require_normalized(state)
    lhs = seminorm_sq(state.u, state.s) + l2_stats(state.u)[1]
    return _report(lhs, curvature_deficit_sq(state), state)


def lojasiewicz_check(state: SphereFlowState) -> InequalityReport:
    """lhs = Per_s(E) - Per_s(B), rhs = ||H - Hbar||^2 on the curve."""
    require_normalized(state)
    return _report(perimeter_s_deficit(state), curvature_deficit_sq(state), state)


def fuglede_check(state: SphereFlowState) -> InequalityReport:
    """lhs = Per_s(E) - Per_s(B), rhs = [u]^2."""
    require_normalized(state)
    return _report(perimeter_s_deficit(state), seminorm_sq(state.u, state.s), state)


def graph_fuglede_bounds(state) -> tuple[float, float, float]:
    """(lower, deficit, upper) for a periodic graph.

    The half-plane deficit sits between [u]^2 / (2 (1 + 4 L^2)^{(2+s)/2}) and
    [u]^2 / 2, where L is the largest slope of u.
    """
    from .graph_flow import periodic_perimeter_deficit

    sem = seminorm_sq(state.u, state.s)
    L = float(np.max(np.abs(derivative(state.u))))
    lower = sem / (2 * (1 + 4 * L * L) ** ((2 + state.s) / 2))
    return float(lower), periodic_perimeter_deficit(state), float(sem / 2)


def ensemble_check(check, states) -> InequalityReport:
    """Run ``check`` on each state; the report carries the member with the smallest ratio."""
    reports = [check(st) for st in states]
    valid = [r for r in reports if not r.degenerate]
    if not valid:
        return reports[0]
    worst = min(valid, key=lambda r: r.ratio)
    return InequalityReport(worst.lhs, worst.rhs, worst.ratio, worst.ratio, worst.grid_meta)


# ---------------------------------------------------------------------------
# expansions


def _quadratic(state: SphereFlowState):
    sem = seminorm_sq(state.u, state.s)
    l2 = l2_stats(state.u)[1]
    HB = ball_curvature(state.s)
    return sem, l2, HB, sem - state.s * HB * l2


def residual_second(state: SphereFlowState) -> float:
    """Relative error of int u (H - H_B) ~ [u]^2 - s H_B ||u||^2."""
    sem, l2, HB, q = _quadratic(state)
    if sem + l2 == 0:
        return 0.0
    H = curvature_nearly_spherical(state).values
    lhs = state.u.h * np.dot(state.u.values, H - HB)
    return float(abs(lhs - q) / (sem + l2))


def residual_third(state: SphereFlowState) -> float:
    """Relative error of int (H - H_B) ~ -(2+s)/2 ([u]^2 - s H_B ||u||^2) at volume pi."""
    require_normalized(state)
    sem, l2, HB, q = _quadratic(state)
    if sem + l2 == 0:
        return 0.0
    H = curvature_nearly_spherical(state).values
    lhs = state.u.h * np.sum(H - HB)
    return float(abs(lhs + (2 + state.s) / 2 * q) / (sem + l2))


def expansion_check(state: SphereFlowState) -> tuple[float, float]:
    """(residual_second, residual_third); the state must be volume-normalised."""
    require_normalized(state)
    return residual_second(state), residual_third(state)


# ---------------------------------------------------------------------------
# divergence identities


def _gradient(u: HeightField, method: str) -> np.ndarray:
    if method == "spectral":
        return derivative(u)
    if method == "centered":
        return (np.roll(u.values, -1) - np.roll(u.values, 1)) / (2 * u.h)
    raise ValueError(f"unknown gradient method {method!r}")


def divergence_identity_check(u: HeightField, s, gradient: str = "centered",
                              order: int = CORRECTION_ORDER) -> float:
    """Quadrature value of int int ((x-y).grad u(y)) (u(y)-u(x))^2 |x-y|^{-4-s}, which vanishes."""
    s = check_order(s)
    h = u.h
    phi = h * np.arange(1, u.N)
    diff = shifted(u.values) - u.values[:, None]
    dg = shifted(_gradient(u, gradient))
    # (x - y) . grad u(y) = -u'(y) sin(phi) on the unit circle
    f = -dg * np.sin(phi)[None, :] * diff ** 2 * np.abs(2 * np.sin(phi / 2))[None, :] ** (-4 - s)
    return float(h * np.sum(corrected_sum(f, s, h, order)))


def first_divergence_identity(u: HeightField, s, gradient: str = "spectral",
                              order: int = CORRECTION_ORDER) -> tuple[float, float]:
    """Both sides of int int u(x) (x-y).grad u(y) |x-y|^{-2-s} = (s+1)/2 [u]^2 + ... (n = 2).

    Right side: (s+1)/2 [u]^2 - (s/4) s H_B ||u||^2 + (s/4) int int u(x) u(y) |x-y|^{-s}.
    """
    s = check_order(s)
    h = u.h
    phi = h * np.arange(1, u.N)
    chord = np.abs(2 * np.sin(phi / 2))[None, :]
    U = u.values[:, None]
    dg = shifted(_gradient(u, gradient))
    lhs_tab = -U * dg * np.sin(phi)[None, :] * chord ** (-2 - s)
    lhs = h * np.sum(corrected_sum(lhs_tab, s, h, order))
    cross = h * np.sum(corrected_sum(U * shifted(u.values) * chord ** (-s), s, h, order))
    # the diagonal y = x contributes u(x)^2 * (integrable singularity), captured by the paired rule
    l2 = l2_stats(u)[1]
    rhs = (s + 1) / 2 * seminorm_sq(u, s, order) - (s / 4) * s * ball_curvature(s) * l2 + (s / 4) * cross
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# asymptotics


DEFAULT_S_GRID = (1e-3, 0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999)


def asymptotic_scan(u: HeightField | None = None, s_grid=DEFAULT_S_GRID, N: int = 512) -> list[dict]:
    """Tabulate the s -> 0 and s -> 1 scalings of H_B and of the seminorm of u.

    Rows hold s, s*H_B, (1-s)*H_B, s*[u]^2/||u||^2 and (1-s)*[u]^2/||u'||^2,
    with ``u = cos(theta)`` by default. A row whose numbers are not finite is
    flagged instead of raising.
    """
    if u is None:
        u = HeightField.from_function(Domain.CIRCLE, N, np.cos)
    l2 = l2_stats(u)[1]
    g2 = u.h * np.sum(derivative(u) ** 2)
    rows = []
    for s in s_grid:
        s = check_order(s)
        try:
            HB = ball_curvature(s)
            sem = seminorm_sq(u, s)
            row = {"s": s, "s_HB": s * HB, "one_minus_s_HB": (1 - s) * HB,
                   "s_seminorm_ratio": s * sem / l2, "one_minus_s_seminorm_ratio": float((1 - s) * sem / g2)}
            ok = all(np.isfinite(v) for v in row.values())
        except (FloatingPointError, ValueError, ZeroDivisionError):
            row, ok = {"s": s}, False
        row["flag"] = "" if ok else "nonfinite"
        rows.append(row)
    return rows


def successive_differences_shrink(values) -> bool:
    """True when |v[k+1] - v[k]| is strictly decreasing along the sequence."""
    d = np.abs(np.diff(np.asarray(values, dtype=float)))
    return bool(d.size < 2 or np.all(d[1:] < d[:-1]))


# ---------------------------------------------------------------------------
# trajectories


def dissipation_check(traj, rel_floor: float = 1e-8) -> float:
    """Max relative mismatch between -dPer_s/dt and ||H - Hbar||^2 over interior records.

    Derivatives use the three-point formula for uneven spacing. Records whose
    dissipation is below ``rel_floor`` times the largest one are skipped;
    a trajectory with no dissipation at all returns NaN (0/0).
    """
    if len(traj) < 3:
        raise InsufficientRecords(f"need at least 3 records, got {len(traj)}")
    t = traj.column("t")
    D = traj.column("per_s_deficit")
    cd = traj.column("curv_deficit_l2_sq")
    top = np.max(np.abs(cd))
    if top == 0:
        return float("nan")
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    dD = (-h2 / (h1 * (h1 + h2)) * D[:-2] + (h2 - h1) / (h1 * h2) * D[1:-1]
          + h1 / (h2 * (h1 + h2)) * D[2:])
    c = cd[1:-1]
    keep = c > rel_floor * top
    if not np.any(keep):
        return float("nan")
    return float(np.max(np.abs(dD[keep] + c[keep]) / c[keep]))


def fit_rate(t, values, window=None) -> RateFit:
    """Least-squares fit of log(values) against t; ``rate`` is minus the slope.

    The default window is the second half of the records whose values exceed
    100 times the rounding floor of the series.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is None:
        floor = 100 * np.finfo(float).eps * np.max(np.abs(v)) if v.size else 0.0
        idx = np.flatnonzero(v > floor)
        if idx.size == 0:
            raise NonPositiveValues("series has no values above the rounding floor")
        idx = idx[idx.size // 2:]
        sel = np.zeros(t.size, dtype=bool)
        sel[idx] = True
    else:
        sel = (t >= window[0]) & (t <= window[1])
    tw, vw = t[sel], v[sel]
    if tw.size < 2 or np.ptp(tw) == 0:
        raise DegenerateWindow("fit window needs two distinct times")
    if np.any(vw <= 0):
        raise NonPositiveValues("log-linear fit needs positive values")
    y = np.log(vw)
    slope, intercept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - np.sum(resid ** 2) / sst)
    return RateFit(float(-slope), float(intercept), float(r2), (float(tw[0]), float(tw[-1])))
