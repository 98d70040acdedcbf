"""Fractional mean curvature flows in the plane: quadrature, flows and diagnostics."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigInvalid,
    DegenerateWindow,
    FracFlowError,
    GridTooCoarse,
    InsufficientRecords,
    InvalidOrder,
    ModeUnderResolved,
    NonFinite,
    NonPositiveValues,
    NotNormalized,
    QuadratureBudgetExceeded,
    StabilityCapExceeded,
    StarShapeViolated,
)
from .singular_kernel import Domain, HeightField, inner, riesz_apply, seminorm_sq
from .spectral import SpectralSplit, decompose, eigenvalue, eigenvalue_closed_form, line_eigenvalue
from .sphere_flow import (
    SphereFlowState,
    ball_curvature,
    curvature_nearly_spherical,
    perimeter_s_deficit,
    run_sphere_flow,
    step_vpmcf,
)
from .graph_flow import GraphFlowState, curvature_graph, periodic_perimeter_deficit, run_graph_flow, step_graph
from .trajectory import Trajectory, TrajectoryRecord
from .diagnostics import InequalityReport, RateFit, fit_rate, normalize

__all__ = [name for name in dir() if not name.startswith("_")]
