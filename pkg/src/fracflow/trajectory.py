"""Trajectory records shared by both flow runners and the CLI."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields

import numpy as np

SPHERE_COLUMNS = (
    "t", "volume", "barycenter_x", "barycenter_y", "per_s_deficit", "seminorm_sq", "l2_sq",
    "curv_deficit_l2_sq", "curv_deficit_l2_sq_sphere", "sup_grad",
)
GRAPH_COLUMNS = (
    "t", "mean", "l2_dev", "per_s_deficit", "seminorm_sq", "l2_sq", "curv_deficit_l2_sq", "sup_grad",
)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Diagnostics at one recorded time. Fields irrelevant to a flow kind are None."""

    t: float
    per_s_deficit: float
    seminorm_sq: float
    l2_sq: float
    curv_deficit_l2_sq: float
    sup_grad: float
    mode_amplitudes: tuple = ()
    volume: float | None = None
    barycenter_x: float | None = None
    barycenter_y: float | None = None
    curv_deficit_l2_sq_sphere: float | None = None
    mean: float | None = None
    l2_dev: float | None = None


@dataclass
class Trajectory:
    """Ordered records plus run metadata."""

    kind: str
    records: list = field(default_factory=list)
    modes: tuple = ()
    dt: float = float("nan")
    steps: int = 0
    deficit_mode: str = "direct"
    halted: bool = False
    error: str | None = None

    def __len__(self):
        return len(self.records)

    @property
    def columns(self) -> tuple:
        base = SPHERE_COLUMNS if self.kind == "sphere" else GRAPH_COLUMNS
        return base + tuple(f"mode_{k}" for k in self.modes)

    def column(self, name: str) -> np.ndarray:
        if name.startswith("mode_"):
            i = self.modes.index(int(name[5:]))
            return np.array([r.mode_amplitudes[i] for r in self.records], dtype=float)
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def rows(self):
        for r in self.records:
            row = [getattr(r, c) for c in self.columns if not c.startswith("mode_")]
            yield row + list(r.mode_amplitudes)

    def write_csv(self, path) -> None:
        """RFC-4180 CSV, doubles written with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(self.columns)
            for row in self.rows():
                w.writerow([format_float(v) for v in row])


def format_float(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.17g}"


def record_fields() -> tuple:
    return tuple(f.name for f in fields(TrajectoryRecord))


def march(state, n_steps: int, dt: float, step, observe, cadence: int, traj: Trajectory):
    """Advance ``state`` n_steps times, recording every ``cadence`` steps and at the end.

    ``observe(state)`` returns (record, cache) where cache is handed to
    ``step(state, dt, cache)`` so per-step work is not repeated. Library
    errors halt the loop; the partial trajectory is kept and flagged.
    """
    from .errors import FracFlowError

    traj.dt, traj.steps = dt, n_steps
    n = 0
    try:
        while True:
            rec, cache = observe(state, n % cadence == 0 or n == n_steps)
            if rec is not None:
                traj.records.append(rec)
            if n == n_steps:
                break
            state = step(state, dt, cache)
            n += 1
    except FracFlowError as exc:
        traj.halted = True
        traj.error = f"{type(exc).__name__}: {exc}"
    return state, traj
