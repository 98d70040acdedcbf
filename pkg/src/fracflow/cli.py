"""Command-line experiment runner.

    fracflow run <config.toml> [--s S] [--N N] [--dt DT] [--T T] [--seed SEED] [--out DIR]
    fracflow suite {identities,inequalities,asymptotics,convergence} [--out DIR]
    fracflow scan-asymptotics <config.toml> [--out DIR]

Exit codes: 0 success, 2 invalid configuration or usage (nothing written),
3 runtime failure (partial outputs written and flagged).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import GRAPH, SPHERE, build_config, initial_values, load_file, random_field
from .errors import ConfigInvalid, FracFlowError

log = logging.getLogger("fracflow")

SUITES = ("identities", "inequalities", "asymptotics", "convergence")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _threads():
    n = os.environ.get("FRACFLOW_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("FRACFLOW_THREADS set but threadpoolctl is not installed; ignoring")
        return contextlib.nullcontext()
    return threadpool_limits(limits=int(n))


def _fit(t, values):
    from .diagnostics import fit_rate

    try:
        f = fit_rate(t, values)
    except (FracFlowError, ValueError) as exc:
        return {"degenerate": True, "reason": f"{type(exc).__name__}: {exc}"}
    return {"rate": f.rate, "intercept": f.intercept, "r_squared": f.r_squared, "window": list(f.window),
            "degenerate": False}


def _report_dict(rep):
    return {"lhs": rep.lhs, "rhs": rep.rhs, "ratio": rep.ratio, "ensemble_min_ratio": rep.ensemble_min_ratio,
            "grid_meta": list(rep.grid_meta), "degenerate": rep.degenerate}


# ---------------------------------------------------------------------------
# run


def _build_state(config):
    if config.kind == SPHERE:
        from .sphere_flow import SphereFlowState

        return SphereFlowState.from_values(initial_values(config), config.s)
    from .graph_flow import GraphFlowState

    return GraphFlowState.from_values(initial_values(config), config.s)


def _final_inequalities(state, kind):
    from . import diagnostics as dg

    try:
        if kind == SPHERE:
            st = dg.normalize(state)
            return {name: _report_dict(fn(st)) for name, fn in
                    (("alexandrov", dg.alexandrov_check), ("lojasiewicz", dg.lojasiewicz_check),
                     ("fuglede", dg.fuglede_check))}
        lo, val, hi = dg.graph_fuglede_bounds(state)
        return {"graph_fuglede": {"lower": lo, "deficit": val, "upper": hi, "holds": bool(lo <= val <= hi)}}
    except FracFlowError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def run_experiment(config, out_dir) -> int:
    """Run one flow, writing trajectory.csv and summary.json into ``out_dir``."""
    from . import diagnostics as dg

    try:
        state = _build_state(config)
    except FracFlowError as exc:
        raise ConfigInvalid(f"initial data rejected: {exc}") from exc
    if config.kind == SPHERE:
        from .sphere_flow import run_sphere_flow as runner, stability_cap
        cell = 2 * np.pi
    else:
        from .graph_flow import run_graph_flow as runner, stability_cap
        cell = 1.0
    with _threads():
        final, traj = runner(config, state)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")

    h = cell / config.N
    t = traj.column("t")
    fits = {}
    series = ["per_s_deficit"] + (["l2_dev"] if config.kind == GRAPH else []) + [f"mode_{k}" for k in traj.modes]
    for name in series:
        fits[name] = _fit(t, traj.column(name)) if len(traj) else {"degenerate": True, "reason": "no records"}
    try:
        diss = dg.dissipation_check(traj)
    except FracFlowError as exc:
        diss = None
        log.info("dissipation check skipped: %s", exc)
    last = traj.records[-1] if traj.records else None
    summary = {
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": config.to_dict(),
        "seed": config.initial.seed,
        "kind": config.kind,
        "dt": traj.dt,
        "steps": traj.steps,
        "stability_cap": stability_cap(config.N, config.s, config.order),
        "c_cfl": traj.dt / h ** (1 + config.s),
        "deficit_mode": traj.deficit_mode,
        "records": len(traj),
        "final": {c: getattr(last, c) for c in traj.columns if not c.startswith("mode_")} if last else None,
        "rate_fits": fits,
        "dissipation_mismatch": diss,
        "inequalities": _final_inequalities(final, config.kind) if not traj.halted else None,
        "partial": traj.halted,
        "error": traj.error,
    }
    write_json(out / "summary.json", summary)
    if traj.halted:
        log.error("run halted: %s (partial outputs in %s)", traj.error, out)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# suites


def _check(name, value, tol, passed=None):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": float(value), "tolerance": tol, "passed": ok}


def _suite_identities():
    from . import diagnostics as dg
    from .singular_kernel import Domain, HeightField, inner, riesz_apply, seminorm_sq
    from .spectral import eigenvalue, eigenvalue_closed_form
    from .sphere_flow import SphereFlowState, ball_curvature, curvature_nearly_spherical

    rows = []
    for s in (0.3, 0.5, 0.7):
        l1, l2 = eigenvalue(1, s), eigenvalue(2, s)
        rows.append(_check(f"eigenvalue_1 = s H_B, s={s}", abs(l1 / (s * ball_curvature(s)) - 1), 1e-6))
        rows.append(_check(f"eigenvalue ratio 4/(2-s), s={s}", abs(l2 / l1 / (4 / (2 - s)) - 1), 1e-4))
        rows.append(_check(f"eigenvalue_2 closed form, s={s}", abs(l2 / eigenvalue_closed_form(2, s) - 1), 1e-6))
    gap = 0.0
    for seed in range(10):
        u = HeightField(Domain.CIRCLE, random_field(256, 2 * np.pi, seed, 0.1))
        sem = seminorm_sq(u, 0.5)
        gap = max(gap, abs(sem - inner(u, riesz_apply(u, 0.5))) / sem)
    rows.append(_check("seminorm = <u, riesz u>, 10 fields", gap, 1e-12))
    for c in (-0.3, 0.2):
        st = SphereFlowState.from_values(np.full(256, c), 0.5)
        H = curvature_nearly_spherical(st).values
        ref = (1 + c) ** -0.5 * ball_curvature(0.5)
        rows.append(_check(f"curvature of disk radius {1 + c}", float(np.max(np.abs(H / ref - 1))), 1e-8))
    u = HeightField.from_function(Domain.CIRCLE, 256, lambda x: np.cos(2 * x) + np.sin(5 * x))
    rel = abs(dg.divergence_identity_check(u, 0.5)) / seminorm_sq(u, 0.5)
    rows.append(_check("second divergence identity (relative)", rel, 1e-10))
    lhs, rhs = dg.first_divergence_identity(u, 0.5)
    rows.append(_check("first divergence identity (relative)", abs(lhs - rhs) / abs(rhs), 1e-6))
    return rows


def _suite_inequalities():
    from . import diagnostics as dg
    from .graph_flow import GraphFlowState

    rows = []
    for s in (0.3, 0.7):
        states = dg.random_states(128, s, 0.03, 5, seed=0)
        for name, fn in (("alexandrov", dg.alexandrov_check), ("lojasiewicz", dg.lojasiewicz_check),
                         ("fuglede", dg.fuglede_check)):
            rep = dg.ensemble_check(fn, states)
            rows.append(_check(f"{name} ensemble min ratio > 0, s={s}", rep.ensemble_min_ratio, 0.0,
                               passed=rep.ensemble_min_ratio > 0))
        bad = 0
        for seed in range(10):
            st = GraphFlowState.from_values(random_field(128, 1.0, seed, 0.1, norm="grad"), s)
            lo, val, hi = dg.graph_fuglede_bounds(st)
            bad += not (lo <= val <= hi)
        rows.append(_check(f"graph sandwich violations, s={s}", bad, 0))
    return rows


def _suite_asymptotics():
    from . import diagnostics as dg

    rows = []
    near0 = dg.asymptotic_scan(s_grid=(0.1, 0.05, 0.01, 1e-3))
    near1 = dg.asymptotic_scan(s_grid=(0.9, 0.95, 0.99, 0.999))
    rows.append(_check("s H_B at s=1e-3 vs 2 pi", abs(near0[-1]["s_HB"] / (2 * np.pi) - 1), 0.01))
    for key, tab in (("s_seminorm_ratio", near0), ("one_minus_s_seminorm_ratio", near1),
                     ("s_HB", near0), ("one_minus_s_HB", near1)):
        vals = [r[key] for r in tab]
        rows.append(_check(f"{key} Cauchy toward endpoint", 0.0, 0.0, passed=dg.successive_differences_shrink(vals)))
    return rows


def _suite_convergence():
    from . import diagnostics as dg
    from .graph_flow import run_graph_flow
    from .spectral import eigenvalue, line_eigenvalue
    from .sphere_flow import run_sphere_flow

    rows = []
    cfg = build_config({"preset": "sphere-mixed", "N": 256, "s": 0.5, "T": 0.3, "cadence": 10})
    _, tr = run_sphere_flow(cfg)
    V = tr.column("volume")
    rows.append(_check("sphere volume drift", float(np.max(np.abs(V / V[0] - 1))), 1e-4))
    rows.append(_check("sphere deficit increments", float(np.max(np.diff(tr.column("per_s_deficit")))), 1e-10))
    fit = dg.fit_rate(tr.column("t"), tr.column("mode_2"))
    target = eigenvalue(2, 0.5) - eigenvalue(1, 0.5)
    rows.append(_check("sphere mode-2 rate (relative error)", abs(fit.rate / target - 1), 0.1))
    rows.append(_check("sphere rate fit 1 - r^2", 1 - fit.r_squared, 0.01))
    rows.append(_check("sphere dissipation mismatch", dg.dissipation_check(tr), 0.03))
    cfg = build_config({"preset": "graph-cos", "N": 256, "s": 0.5, "T": 0.04, "cadence": 20})
    _, tr = run_graph_flow(cfg)
    fit = dg.fit_rate(tr.column("t"), tr.column("l2_dev"))
    rows.append(_check("graph L2 rate (relative error)", abs(fit.rate / line_eigenvalue(1, 0.5) - 1), 0.1))
    g = tr.column("sup_grad")
    rows.append(_check("graph sup_grad growth (relative)", float(np.max(g[1:] / g[:-1] - 1)), 1e-6))
    return rows


_SUITE_FUNCS = {
    "identities": _suite_identities,
    "inequalities": _suite_inequalities,
    "asymptotics": _suite_asymptotics,
    "convergence": _suite_convergence,
}


def run_suite(name: str) -> dict:
    """Execute a named suite; failures are recorded in the report, not raised."""
    if name not in _SUITE_FUNCS:
        raise ConfigInvalid(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    checks = _SUITE_FUNCS[name]()
    return {"suite": name, "version": __version__, "checks": checks, "passed": all(c["passed"] for c in checks)}


def format_table(report: dict) -> str:
    lines = [f"suite {report['suite']}"]
    for c in report["checks"]:
        flag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"  {flag}  {c['name']:<48s} {c['value']:.3e}  (tol {c['tolerance']:g})")
    lines.append("all checks passed" if report["passed"] else "some checks FAILED")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# asymptotic scan


def scan_asymptotics(config, out_dir, s_grid=None) -> int:
    from . import diagnostics as dg
    from .singular_kernel import Domain, HeightField

    if config.kind != SPHERE:
        raise ConfigInvalid("scan-asymptotics needs a sphere configuration")
    u = HeightField(Domain.CIRCLE, initial_values(config))
    if not np.any(u.values):
        u = HeightField.from_function(Domain.CIRCLE, config.N, np.cos)
    rows = dg.asymptotic_scan(u, s_grid or dg.DEFAULT_S_GRID)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ("s", "s_HB", "one_minus_s_HB", "s_seminorm_ratio", "one_minus_s_seminorm_ratio", "flag")
    with open(out / "asymptotics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r.get(c, "") if c == "flag" else f"{r[c]:.17g}" if c in r else "" for c in cols])
    write_json(out / "asymptotics.json", {"version": __version__, "config": config.to_dict(), "rows": rows})
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracflow", description="Fractional curvature flows and diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def overrides(q):
        q.add_argument("--s", type=float)
        q.add_argument("--N", type=int)
        q.add_argument("--dt", type=str, help="time step or 'auto'")
        q.add_argument("--T", type=float)
        q.add_argument("--seed", type=int)
        q.add_argument("--out", type=str)

    r = sub.add_parser("run", help="run a flow from a config file")
    r.add_argument("config")
    overrides(r)
    s = sub.add_parser("suite", help="run a diagnostic suite")
    s.add_argument("name")
    s.add_argument("--out", type=str, default=None)
    a = sub.add_parser("scan-asymptotics", help="tabulate the s -> 0 and s -> 1 scalings")
    a.add_argument("config")
    overrides(a)
    return p


def _load(args):
    raw = load_file(args.config)
    dt = args.dt
    if dt is not None and dt != "auto":
        try:
            dt = float(dt)
        except ValueError as exc:
            raise ConfigInvalid(f"--dt must be a number or 'auto', got {dt!r}") from exc
    over = {"s": args.s, "N": args.N, "dt": dt, "T": args.T, "seed": args.seed, "out": args.out}
    return build_config(raw, over), raw


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.verb == "run":
            config, _ = _load(args)
            return run_experiment(config, config.out)
        if args.verb == "scan-asymptotics":
            config, raw = _load(args)
            grid = raw.get("s_grid")
            if grid is not None:
                if not isinstance(grid, list) or not grid:
                    raise ConfigInvalid("s_grid must be a non-empty list")
                grid = tuple(float(x) for x in grid)
                if not all(0 < x < 1 for x in grid):
                    raise ConfigInvalid("s_grid entries must lie in (0, 1)")
            return scan_asymptotics(config, config.out, grid)
        report = run_suite(args.name)
        print(format_table(report))
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_json(Path(args.out) / f"suite_{args.name}.json", report)
        return EXIT_OK
    except ConfigInvalid as exc:
        print(f"fracflow: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FracFlowError as exc:
        print(f"fracflow: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
