"""Experiment configuration: flat TOML files, presets and initial data."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigInvalid, InvalidOrder
from .singular_kernel import check_order

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SPHERE = "sphere"
GRAPH = "graph"

# name -> (kind, initial-data keys)
PRESETS = {
    "sphere-cos2": (SPHERE, {"initial": "fourier", "cos": [0.0, 0.0, 0.05]}),
    "sphere-mixed": (SPHERE, {"initial": "fourier", "cos": [0.0, 0.0, 0.05], "sin": [0.0, 0.0, 0.0, 0.03]}),
    "sphere-ball": (SPHERE, {"initial": "fourier", "cos": [0.0]}),
    "graph-cos": (GRAPH, {"initial": "fourier", "cos": [0.0, 0.01]}),
    "graph-flat": (GRAPH, {"initial": "fourier", "cos": [0.3]}),
}

_KEYS = {
    "kind", "preset", "N", "s", "dt", "T", "cadence", "initial", "cos", "sin", "amplitude",
    "amplitude_norm", "band", "seed", "modes", "volume_reproject", "deficit_mode", "out", "order",
    "quadrature_budget", "s_grid", "name",
}


@dataclass(frozen=True)
class InitialSpec:
    """Initial height: Fourier coefficients or a seeded random band-limited field."""

    kind: str = "fourier"
    cos: tuple = (0.0,)
    sin: tuple = ()
    amplitude: float = 0.03
    amplitude_norm: str = "sup"
    band: int = 8
    seed: int = 0


@dataclass(frozen=True)
class FlowConfig:
    kind: str
    N: int = 256
    s: float = 0.5
    dt: object = "auto"
    T: float = 0.25
    cadence: int = 10
    initial: InitialSpec = field(default_factory=InitialSpec)
    modes: tuple = (1, 2, 3)
    volume_reproject: bool = False
    deficit_mode: str = "direct"
    out: str = "out"
    order: int = 3
    quadrature_budget: int = 2 ** 26
    preset: str | None = None
    name: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial"] = asdict(self.initial)
        return d


def load_file(path) -> dict:
    """Parse a flat TOML file into a dict (nested tables are rejected)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"malformed config {path}: {exc}") from exc
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigInvalid(f"nested table {k!r} not allowed; use flat keys")
    return data


def _positive(name, v, kind=float):
    try:
        v = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{name} must be a {kind.__name__}, got {v!r}") from exc
    if not v > 0:
        raise ConfigInvalid(f"{name} must be positive, got {v!r}")
    return v


def _coeffs(name, v):
    if not isinstance(v, (list, tuple)) or not all(isinstance(x, (int, float)) for x in v):
        raise ConfigInvalid(f"{name} must be a list of numbers")
    return tuple(float(x) for x in v)


def build_config(raw: dict, overrides: dict | None = None) -> FlowConfig:
    """Validate a raw key-value mapping (plus CLI overrides) into a FlowConfig."""
    raw = dict(raw)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigInvalid(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        pkind, pinit = PRESETS[preset]
        for k, v in pinit.items():
            raw.setdefault(k, v)
        raw.setdefault("kind", pkind)
        if raw["kind"] != pkind:
            raise ConfigInvalid(f"preset {preset!r} is a {pkind} preset")
    kind = raw.get("kind")
    if kind not in (SPHERE, GRAPH):
        raise ConfigInvalid(f"kind must be '{SPHERE}' or '{GRAPH}', got {kind!r}")

    N = _positive("N", raw.get("N", 256), int)
    if N < 8 or N % 2:
        raise ConfigInvalid(f"N must be even and >= 8, got {N}")
    try:
        s = check_order(raw.get("s", 0.5))
    except InvalidOrder as exc:
        raise ConfigInvalid(str(exc)) from exc
    dt = raw.get("dt", "auto")
    if dt != "auto":
        dt = _positive("dt", dt)
    T = _positive("T", raw.get("T", 0.25))
    cadence = _positive("cadence", raw.get("cadence", 10), int)
    order = int(raw.get("order", 3))
    if not 0 <= order <= 3:
        raise ConfigInvalid("order must be between 0 and 3")

    ikind = raw.get("initial", "fourier")
    if ikind not in ("fourier", "random"):
        raise ConfigInvalid(f"initial must be 'fourier' or 'random' (or use a preset), got {ikind!r}")
    amp = _positive("amplitude", raw.get("amplitude", 0.03))
    norm = raw.get("amplitude_norm", "sup")
    if norm not in ("sup", "grad"):
        raise ConfigInvalid("amplitude_norm must be 'sup' or 'grad'")
    init = InitialSpec(
        kind=ikind,
        cos=_coeffs("cos", raw.get("cos", [0.0])),
        sin=_coeffs("sin", raw.get("sin", [])),
        amplitude=amp,
        amplitude_norm=norm,
        band=_positive("band", raw.get("band", 8), int),
        seed=int(raw.get("seed", 0)),
    )
    if kind == SPHERE and ikind == "random" and norm == "sup" and amp >= 1:
        raise ConfigInvalid("amplitude cap must be < 1 for sphere runs")
    if init.band > N // 4:
        raise ConfigInvalid("band limit must not exceed N/4")

    modes = raw.get("modes", [1, 2, 3])
    if not isinstance(modes, (list, tuple)) or not all(isinstance(k, int) and 0 <= k <= N // 2 for k in modes):
        raise ConfigInvalid("modes must be a list of integers in 0..N/2")
    deficit_mode = raw.get("deficit_mode", "direct")
    if deficit_mode not in ("direct", "dissipation_proxy"):
        raise ConfigInvalid("deficit_mode must be 'direct' or 'dissipation_proxy'")
    vr = raw.get("volume_reproject", False)
    if not isinstance(vr, bool):
        raise ConfigInvalid("volume_reproject must be true or false")
    budget = _positive("quadrature_budget", raw.get("quadrature_budget", 2 ** 26), int)
    return FlowConfig(
        kind=kind, N=N, s=s, dt=dt, T=T, cadence=cadence, initial=init, modes=tuple(modes),
        volume_reproject=vr, deficit_mode=deficit_mode, out=str(raw.get("out", "out")), order=order,
        quadrature_budget=budget, preset=preset, name=raw.get("name"),
    )


def random_field(N: int, cell: float, seed: int, amplitude: float, band: int = 8,
                 norm: str = "sup", k_min: int = 1) -> np.ndarray:
    """Seeded band-limited random field.

    Generator (bit-exact): ``rng = numpy.random.default_rng(seed)``; for
    k = k_min..band draw ``alpha_k, beta_k = rng.standard_normal(2)``; the
    field is sum_k k^{-3} (alpha_k cos(w k x) + beta_k sin(w k x)) with
    w = 2 pi / cell, rescaled so that its grid maximum of |u| (``norm="sup"``)
    or of the exact derivative |u'| (``norm="grad"``) equals ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    x = cell * np.arange(N) / N
    w = 2 * np.pi / cell
    u = np.zeros(N)
    du = np.zeros(N)
    for k in range(k_min, band + 1):
        al, be = rng.standard_normal(2)
        c = k ** -3.0
        u += c * (al * np.cos(w * k * x) + be * np.sin(w * k * x))
        du += c * w * k * (-al * np.sin(w * k * x) + be * np.cos(w * k * x))
    ref = np.max(np.abs(u if norm == "sup" else du))
    return u * (amplitude / ref)


def fourier_field(N: int, cell: float, cos=(), sin=()) -> np.ndarray:
    """sum_k cos[k] cos(w k x) + sin[k] sin(w k x), w = 2 pi / cell."""
    x = cell * np.arange(N) / N
    w = 2 * np.pi / cell
    u = np.zeros(N)
    for k, c in enumerate(cos):
        u += c * np.cos(w * k * x)
    for k, c in enumerate(sin):
        u += c * np.sin(w * k * x)
    return u


def initial_values(config: FlowConfig) -> np.ndarray:
    cell = 2 * np.pi if config.kind == SPHERE else 1.0
    init = config.initial
    if init.kind == "random":
        k_min = 2 if config.kind == SPHERE else 1
        return random_field(config.N, cell, init.seed, init.amplitude, init.band, init.amplitude_norm, k_min)
    return fourier_field(config.N, cell, init.cos, init.sin)


def with_overrides(config: FlowConfig, **kw) -> FlowConfig:
    return replace(config, **kw)
