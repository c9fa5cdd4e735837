"""Command-line front end: config parsing, run orchestration, and exports.

One JSON config document drives every command.  Exit codes are scriptable:
0 success, 1 config problem (reported with the line of the offending key),
2 solver/continuation failure (partial outputs are kept), 3 verification
failure or check error.  Reports are byte-identical across reruns except for
the single top-level "timestamp" key, which holds every volatile quantity
(wall-clock times, write date).

Config keys by command:

    solve    chart, ring, grid, tau (continuation targets), solve (options)
    levels   levels (values to extract; snapshot comes from --snapshot)
    verify   chart, ring, grid, checks (default: all), verify (tau,
             oracle_grid_sizes)
    oracle   oracle (r_inner, r_outer, tau, n, samples)

Curve specs are {"kind": circle|ellipse|fourier, ...parameters} as accepted
by make_curve.  Negative curvature charts need --experimental-negative-curvature.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from .field import _atomic_write_text, load_field, save_field
from .levelgeom import (
    LevelRangeError,
    LevelSetReport,
    SingularGradientError,
    TopologyError,
    extract_level,
)
from .ring import AnnularGrid, ConvexRing, build_grid, make_curve, make_ring
from .solve import ContinuationError, SolveOptions, SolverError, continuation_solve
from .spaceform import ChartDomainError, SpaceFormChart
from .verify import SUITE_CHECKS, OracleInfeasibleError, radial_oracle, run_suite


class ConfigError(ValueError):
    """Invalid configuration; the message names the line when locatable."""


# -- config loading ------------------------------------------------------------


def _line_of_key(raw: str, key: str) -> int | None:
    pos = raw.find(f'"{key}"')
    if pos < 0:
        return None
    return raw.count("\n", 0, pos) + 1


def _fail(raw: str, key: str, message: str) -> None:
    line = _line_of_key(raw, key)
    where = f"line {line}: " if line is not None else ""
    raise ConfigError(f"config {where}{message}")


def load_config(path: str) -> tuple[dict, str]:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, raw


def _build_chart(cfg: dict, raw: str, allow_negative: bool) -> SpaceFormChart:
    section = cfg.get("chart")
    if not isinstance(section, dict):
        _fail(raw, "chart", 'missing or invalid "chart" section')
    epsilon = float(section.get("epsilon", 0.0))
    if epsilon < 0.0 and not allow_negative:
        _fail(raw, "epsilon",
              "epsilon < 0 requires --experimental-negative-curvature")
    try:
        return SpaceFormChart(
            epsilon=epsilon,
            dim=int(section.get("dim", 2)),
            chart_radius=section.get("chart_radius"),
            allow_negative_curvature=allow_negative,
        )
    except (ChartDomainError, ValueError, TypeError) as exc:
        _fail(raw, "chart", str(exc))


def _build_curve(entry: Any, raw: str, key: str):
    if not isinstance(entry, dict) or "kind" not in entry:
        _fail(raw, key, f'"{key}" must be a curve object with a "kind"')
    params = {k: tuple(v) if isinstance(v, list) else v
              for k, v in entry.items() if k != "kind"}
    try:
        return make_curve(entry["kind"], **params)
    except (ValueError, TypeError) as exc:
        _fail(raw, key, str(exc))


def _build_ring(cfg: dict, raw: str, chart: SpaceFormChart) -> ConvexRing:
    section = cfg.get("ring")
    if not isinstance(section, dict):
        _fail(raw, "ring", 'missing or invalid "ring" section')
    outer = _build_curve(section.get("outer"), raw, "outer")
    inner = _build_curve(section.get("inner"), raw, "inner")
    try:
        return make_ring(chart, outer, inner)
    except ValueError as exc:
        _fail(raw, "ring", str(exc))


def _build_grid(cfg: dict, raw: str, ring: ConvexRing) -> AnnularGrid:
    section = cfg.get("grid")
    if not isinstance(section, dict):
        _fail(raw, "grid", 'missing or invalid "grid" section')
    try:
        return build_grid(ring, int(section.get("ns", 33)), int(section.get("ntheta", 64)))
    except (ValueError, TypeError) as exc:
        _fail(raw, "grid", str(exc))


def _solve_options(cfg: dict, raw: str) -> SolveOptions:
    section = cfg.get("solve", {})
    if not isinstance(section, dict):
        _fail(raw, "solve", '"solve" must be an options object')
    try:
        return SolveOptions(**section)
    except (SolverError, TypeError) as exc:
        _fail(raw, "solve", str(exc))


def _tau_targets(cfg: dict, raw: str) -> list[float]:
    targets = cfg.get("tau")
    if not isinstance(targets, list) or not targets:
        _fail(raw, "tau", '"tau" must be a non-empty list of continuation targets')
    try:
        values = [float(t) for t in targets]
    except (ValueError, TypeError):
        _fail(raw, "tau", "targets must be numbers")
    if any(not 0.0 < t <= 1.0 for t in values):
        _fail(raw, "tau", "targets must lie in (0, 1]")
    if any(b <= a for a, b in zip(values, values[1:])):
        _fail(raw, "tau", "targets must be strictly increasing")
    return values


# -- serialization helpers -----------------------------------------------------


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _write_json(path: Path, obj: Any) -> None:
    _atomic_write_text(str(path), json.dumps(_jsonable(obj), indent=1) + "\n")


def _timestamp(runtimes: dict[str, float]) -> dict[str, Any]:
    now = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return {"written_at": now, "runtime_s": runtimes}


# -- commands ------------------------------------------------------------------


def cmd_solve(cfg: dict, raw: str, out_dir: Path, allow_negative: bool) -> int:
    chart = _build_chart(cfg, raw, allow_negative)
    ring = _build_ring(cfg, raw, chart)
    grid = _build_grid(cfg, raw, ring)
    targets = _tau_targets(cfg, raw)
    options = _solve_options(cfg, raw)

    failure = None
    try:
        trace = continuation_solve(grid, targets, options=options)
    except ContinuationError as exc:
        trace = exc.trace
        failure = str(exc)

    steps, runtimes = [], {}
    for record in trace.steps:
        snapshot = f"field_tau_{record.tau:.6g}.json"
        save_field(record.field, str(out_dir / snapshot))
        runtimes[snapshot] = record.report.wall_time
        steps.append({
            "tau": record.tau,
            "snapshot": snapshot,
            "converged": record.report.converged,
            "newton_iterations": record.report.newton_iterations,
            "final_residual_max": record.report.final_residual_max,
            "min_gradient_norm": record.report.min_gradient_norm,
            "min_interior_gradient": record.min_interior_gradient,
            "min_level_curvature": record.min_level_curvature,
            "outer_boundary_min_gradient": record.outer_boundary_min_gradient,
        })
        print(f"tau={record.tau:.6g}  newton={record.report.newton_iterations}  "
              f"max residual={record.report.final_residual_max:.3e}  "
              f"min |grad u|={record.min_interior_gradient:.6g}  "
              f"min level curvature={record.min_level_curvature:.6g}")

    payload = {
        "timestamp": _timestamp(runtimes),
        "completed": failure is None,
        "tau_schedule": trace.tau_schedule,
        "steps": steps,
    }
    if failure is not None:
        payload["failure"] = failure
    _write_json(out_dir / "trace.json", payload)
    if failure is not None:
        print(f"continuation failed: {failure}", file=sys.stderr)
        return 2
    return 0


def _svg_color(kappa: float) -> str:
    return "#2ca02c" if kappa >= 0.0 else "#d62728"


def _svg_path(points: np.ndarray, closed: bool) -> str:
    cmds = [f"{'M' if i == 0 else 'L'} {p[0]:.6g} {-p[1]:.6g}" for i, p in enumerate(points)]
    if closed:
        cmds.append("Z")
    return " ".join(cmds)


def _level_svg(ring: ConvexRing, reports: list[LevelSetReport]) -> str:
    thetas = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    outer = ring.outer.point(thetas)
    inner = ring.inner.point(thetas)
    all_pts = np.vstack([outer, inner] + [r.points for r in reports])
    x0, y0 = all_pts.min(axis=0) - 0.1
    x1, y1 = all_pts.max(axis=0) + 0.1
    width, height = x1 - x0, y1 - y0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{x0:.6g} {-y1:.6g} {width:.6g} {height:.6g}" '
        f'width="640" height="{640 * height / width:.6g}">',
        f'<path d="{_svg_path(outer, True)}" fill="none" stroke="#000000" stroke-width="{0.008 * width:.6g}"/>',
        f'<path d="{_svg_path(inner, True)}" fill="none" stroke="#000000" stroke-width="{0.008 * width:.6g}"/>',
    ]
    for report in reports:
        pts, kappas = report.points, report.kappa
        # contiguous runs of one curvature sign become one colored subpath
        start = 0
        for i in range(1, len(pts) + 1):
            at_end = i == len(pts)
            if not at_end and (kappas[i] >= 0.0) == (kappas[start] >= 0.0):
                continue
            segment = pts[start:min(i + 1, len(pts))]
            parts.append(
                f'<path d="{_svg_path(segment, False)}" fill="none" '
                f'stroke="{_svg_color(float(kappas[start]))}" '
                f'stroke-width="{0.005 * width:.6g}"/>')
            start = i
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_levels(cfg: dict, raw: str, snapshot: str, out_dir: Path) -> int:
    try:
        f = load_field(snapshot)
    except OSError as exc:
        raise ConfigError(f"cannot read snapshot {snapshot}: {exc}") from exc

    levels = cfg.get("levels")
    if not isinstance(levels, list) or not levels:
        _fail(raw, "levels", '"levels" must be a non-empty list')
    values = [float(c) for c in levels]
    if f.boundary_values is not None:
        lo, hi = sorted(f.boundary_values)
        for c in values:
            if not lo < c < hi:
                _fail(raw, "levels", f"level {c} outside the open range ({lo}, {hi})")

    reports = []
    for c in values:
        try:
            reports.append(extract_level(f, c))
        except LevelRangeError as exc:
            _fail(raw, "levels", str(exc))
        except (TopologyError, SingularGradientError) as exc:
            print(f"level {c:.6g}: {exc}", file=sys.stderr)
            return 3

    for report in reports:
        rows = ["x,y,kappa"]
        rows += [f"{p[0]:.17g},{p[1]:.17g},{k:.17g}"
                 for p, k in zip(report.points, report.kappa)]
        _atomic_write_text(str(out_dir / f"level_{report.level:.6g}.csv"),
                           "\n".join(rows) + "\n")
        print(f"level {report.level:.6g}: min kappa = {report.kappa_min:.6g}, "
              f"min |grad u| = {report.grad_min:.6g}")

    _atomic_write_text(str(out_dir / "levels.svg"), _level_svg(f.grid.ring, reports))
    print(f"overall min kappa = {min(r.kappa_min for r in reports):.6g}")
    return 0


def cmd_verify(cfg: dict, raw: str, out_dir: Path, allow_negative: bool) -> int:
    chart = _build_chart(cfg, raw, allow_negative)
    ring = _build_ring(cfg, raw, chart)
    grid_section = cfg.get("grid", {})
    if not isinstance(grid_section, dict):
        _fail(raw, "grid", 'invalid "grid" section')
    ns = int(grid_section.get("ns", 33))
    ntheta = int(grid_section.get("ntheta", 64))
    _build_grid(cfg, raw, ring)  # fail early on fold or size problems

    selected = cfg.get("checks")
    if selected is None:
        selected = list(SUITE_CHECKS)
    if not isinstance(selected, list):
        _fail(raw, "checks", '"checks" must be a list of check names')
    unknown = [c for c in selected if c not in SUITE_CHECKS]
    if unknown:
        _fail(raw, "checks", f"unknown checks {unknown}; available: {list(SUITE_CHECKS)}")

    verify_section = cfg.get("verify", {})
    if not isinstance(verify_section, dict):
        _fail(raw, "verify", '"verify" must be an options object')
    tau = float(verify_section.get("tau", 0.5))
    oracle_sizes = tuple(verify_section.get("oracle_grid_sizes", (64, 128, 256)))
    options = _solve_options(cfg, raw)

    if not selected:
        print("warning: empty check list, nothing verified", file=sys.stderr)
        _write_json(out_dir / "verification.json",
                    {"timestamp": _timestamp({}), "reports": []})
        return 0

    entries, runtimes, had_error = [], {}, False
    for name in selected:
        t0 = time.perf_counter()
        try:
            report, = run_suite(ring=ring, ns=ns, ntheta=ntheta, tau=tau,
                                checks=[name], oracle_grid_sizes=oracle_sizes,
                                options=options)
        except Exception as exc:
            had_error = True
            runtimes[name] = time.perf_counter() - t0
            entries.append({"name": name, "error": str(exc)})
            print(f"{name:<28} ERROR  {exc}")
            continue
        runtimes[name] = report.runtime_s
        entries.append({
            "name": report.name,
            "passed": report.passed,
            "margin": report.margin,
            "tolerance": report.tolerance,
            "claim": report.claim,
            "extras": report.extras,
        })
        status = "pass" if report.passed else "FAIL"
        print(f"{report.name:<28} {status}   margin={report.margin:+.6g}  "
              f"tolerance={report.tolerance:.6g}")

    _write_json(out_dir / "verification.json",
                {"timestamp": _timestamp(runtimes), "reports": entries})
    all_passed = not had_error and all(e.get("passed") for e in entries)
    return 0 if all_passed else 3


def cmd_oracle(cfg: dict, raw: str, out_dir: Path) -> int:
    section = cfg.get("oracle")
    if not isinstance(section, dict):
        _fail(raw, "oracle", 'missing or invalid "oracle" section')
    try:
        oracle = radial_oracle(
            float(section.get("r_inner", 1.0)),
            float(section.get("r_outer", 2.0)),
            float(section["tau"]) if "tau" in section else 0.3,
            int(section.get("n", 2)),
        )
    except (OracleInfeasibleError, ValueError) as exc:
        _fail(raw, "oracle", str(exc))
    samples = int(section.get("samples", 33))
    radii = np.linspace(oracle.r_inner, oracle.r_outer, samples)
    rows = ["r,u,du"]
    print(f"flux constant c = {oracle.c:.12g}")
    print("r,u,du")
    for r in radii:
        line = f"{r:.17g},{float(oracle.u(r)):.17g},{float(oracle.du(r)):.17g}"
        rows.append(line)
        print(line)
    _atomic_write_text(str(out_dir / "oracle.csv"), "\n".join(rows) + "\n")
    return 0


# -- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convexring",
        description="minimal graphs over convex rings: solve, inspect levels, verify",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "run the tau-continuation and write field snapshots"),
        ("levels", "extract level curves from a snapshot to CSV and SVG"),
        ("verify", "run verification checks and write a JSON report"),
        ("oracle", "dump the radial oracle table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory (default: config 'out' or '.')")
        p.add_argument("--experimental-negative-curvature", action="store_true",
                       help="allow charts with epsilon < 0")
        if name == "levels":
            p.add_argument("--snapshot", required=True, help="field snapshot to read")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, raw = load_config(args.config)
        out_dir = Path(args.out or cfg.get("out") or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, raw, out_dir, args.experimental_negative_curvature)
        if args.command == "levels":
            return cmd_levels(cfg, raw, args.snapshot, out_dir)
        if args.command == "verify":
            return cmd_verify(cfg, raw, out_dir, args.experimental_negative_curvature)
        return cmd_oracle(cfg, raw, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, ContinuationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
