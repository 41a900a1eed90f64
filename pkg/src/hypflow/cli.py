"""Command-line front end: JSON experiment configs, dispatch, and
deterministic CSV/SVG artifacts.

Commands:
  quermass   print quermassintegrals, deficit, convexity margin, inradius
  flow       run the constrained flow, write the trace CSV (+ optional SVG)
  sweep      static stability sweep over perturbation sizes, CSV (+ SVG)
  conformal  conformal-image identity report
  verify     the consolidated property suite; nonzero exit on any failure

Configs are strict: unknown keys are rejected and every violation is
reported with its key path. Outputs are byte-deterministic for a fixed
config and seed (17 significant digits, LF line endings, UTF-8); the
HYPFLOW_THREADS environment variable overrides the sweep worker count.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 verification
failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conformal import area_identity_check, conf_relation_residual, image_convexity_margin, to_ball
from .checks import run_verify
from .flow import FlowState, StepFailureError, run
from .grids import AxisymGrid, FullSphereGrid
from .hypersurface import (
    DiscretizationError,
    RadialGraph,
    ShapeRejectionError,
    generate_shape,
    geometry_fields,
    hconvexity_margin,
    inradius,
    quermassintegrals,
)
from .stability import InsufficientDataError, deficit, exponent_fit, stability_sweep
from .svgplot import flow_svg, sweep_svg
from .symfunc import ConeViolationError

__all__ = ["main", "parse_config", "ConfigError", "ExperimentConfig",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_VERIFY", "EXIT_IO"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4
EXIT_IO = 5


class ConfigError(Exception):
    """Invalid experiment config; `errors` lists every violation with its key path."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class ShapeSpec:
    kind: str
    r0: float
    a: float = 0.0
    eps: float = 0.0
    l: int = 2

    def build(self, grid) -> RadialGraph:
        if self.kind == "sphere":
            return generate_shape(grid, "sphere", r0=self.r0)
        if self.kind == "offset_sphere":
            return generate_shape(grid, "offset_sphere", r0=self.r0, a=self.a)
        return generate_shape(grid, "perturbed_sphere", r0=self.r0, eps=self.eps, l=self.l)

    def label(self) -> str:
        if self.kind == "sphere":
            return f"sphere(r0={self.r0:g})"
        if self.kind == "offset_sphere":
            return f"offset_sphere(r0={self.r0:g}, a={self.a:g})"
        return f"perturbed_sphere(r0={self.r0:g}, eps={self.eps:g}, l={self.l})"


@dataclass
class FlowParams:
    c_cfl: float = 0.2
    tol_stop: float = 1e-6
    t_max: float = 30.0


@dataclass
class ExperimentConfig:
    command: str
    n: int = 2
    m: int = 1
    backend: str = "full"
    J: int = 64
    shape: Optional[ShapeSpec] = None
    flow: FlowParams = field(default_factory=FlowParams)
    sweep_eps: list = field(default_factory=list)
    threads: Optional[int] = None
    seed: int = 0

    def build_grid(self):
        if self.backend == "full":
            return FullSphereGrid(self.J)
        return AxisymGrid(self.J, n=self.n)

    def build_shape(self) -> RadialGraph:
        return self.shape.build(self.build_grid())


def _typename(v) -> str:
    return type(v).__name__


def _get_int(obj, key, errs, path, *, lo=None, hi=None, default=None, required=False):
    if key not in obj:
        if required:
            errs.append(f"{path}{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        errs.append(f"{path}{key}: expected integer, got {_typename(v)}")
        return default
    if lo is not None and v < lo:
        errs.append(f"{path}{key}: must be >= {lo}, got {v}")
        return default
    if hi is not None and v > hi:
        errs.append(f"{path}{key}: must be <= {hi}, got {v}")
        return default
    return v


def _get_num(obj, key, errs, path, *, lo=None, lo_strict=None, hi=None,
             default=None, required=False):
    if key not in obj:
        if required:
            errs.append(f"{path}{key}: required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errs.append(f"{path}{key}: expected number, got {_typename(v)}")
        return default
    v = float(v)
    if not np.isfinite(v):
        errs.append(f"{path}{key}: must be finite")
        return default
    if lo is not None and v < lo:
        errs.append(f"{path}{key}: must be >= {lo}, got {v:g}")
        return default
    if lo_strict is not None and v <= lo_strict:
        errs.append(f"{path}{key}: must be > {lo_strict}, got {v:g}")
        return default
    if hi is not None and v > hi:
        errs.append(f"{path}{key}: must be <= {hi}, got {v:g}")
        return default
    return v


def _check_unknown(obj, allowed, errs, path=""):
    for key in obj:
        if key not in allowed:
            errs.append(f"{path}{key}: unknown key")


_SHAPE_KEYS = {
    "sphere": {"kind", "r0"},
    "offset_sphere": {"kind", "r0", "a"},
    "perturbed_sphere": {"kind", "r0", "eps", "l"},
}


def _parse_shape(obj, errs, path="shape.", require_eps=True) -> Optional[ShapeSpec]:
    if not isinstance(obj, dict):
        errs.append(f"{path[:-1]}: expected object, got {_typename(obj)}")
        return None
    kind = obj.get("kind")
    if kind not in _SHAPE_KEYS:
        errs.append(f"{path}kind: expected one of {sorted(_SHAPE_KEYS)}, got {kind!r}")
        return None
    _check_unknown(obj, _SHAPE_KEYS[kind], errs, path)
    r0 = _get_num(obj, "r0", errs, path, lo_strict=0.0, required=True)
    spec = ShapeSpec(kind=kind, r0=r0 if r0 is not None else 1.0)
    if kind == "offset_sphere":
        a = _get_num(obj, "a", errs, path, lo=0.0, required=True)
        if a is not None:
            spec.a = a
            if r0 is not None and a >= r0:
                errs.append(f"{path}a: must be < r0 ({r0:g}), got {a:g}")
    elif kind == "perturbed_sphere":
        eps = _get_num(obj, "eps", errs, path, lo=0.0, required=require_eps)
        if eps is not None:
            spec.eps = eps
        l = _get_int(obj, "l", errs, path, lo=2, default=2)
        if l is not None:
            spec.l = l
    return spec


_COMMAND_KEYS = {
    "quermass": {"n", "m", "backend", "J", "shape"},
    "flow": {"n", "m", "backend", "J", "shape", "flow"},
    "sweep": {"n", "m", "backend", "J", "shape", "sweep", "threads"},
    "conformal": {"n", "backend", "J", "shape"},
    "verify": {"seed"},
}


def parse_config(raw: dict, command: str) -> ExperimentConfig:
    """Validate a config dict for a command; raises ConfigError listing every
    violation with its key path."""
    if command not in _COMMAND_KEYS:
        raise ConfigError([f"unknown command {command!r}"])
    errs: list = []
    if not isinstance(raw, dict):
        raise ConfigError([f"config root: expected object, got {_typename(raw)}"])
    _check_unknown(raw, _COMMAND_KEYS[command], errs)
    cfg = ExperimentConfig(command=command)

    if command == "verify":
        cfg.seed = _get_int(raw, "seed", errs, "", lo=0, default=0)
        if errs:
            raise ConfigError(errs)
        return cfg

    n = _get_int(raw, "n", errs, "", lo=2, required=True)
    backend = raw.get("backend")
    if backend not in ("full", "axisym"):
        errs.append(f"backend: expected 'full' or 'axisym', got {backend!r}")
        backend = None
    J = _get_int(raw, "J", errs, "", lo=16, required=True)
    if n is not None:
        cfg.n = n
    if backend is not None:
        cfg.backend = backend
        if backend == "full" and n is not None and n != 2:
            errs.append(f"n: backend 'full' requires n=2, got {n}")
        if backend == "full" and J is not None and J % 2 != 0:
            errs.append(f"J: backend 'full' requires even J, got {J}")
    if J is not None:
        cfg.J = J

    if command in ("quermass", "flow", "sweep"):
        default_m = 1 if command == "quermass" else None
        m = _get_int(raw, "m", errs, "", lo=1, default=default_m,
                     required=command != "quermass")
        if m is not None:
            cfg.m = m
            if n is not None and not 1 <= m <= n - 1:
                errs.append(f"m: out of range 1..{n - 1}, got {m}")

    if "shape" not in raw:
        errs.append("shape: required")
    else:
        spec = _parse_shape(raw["shape"], errs, require_eps=command != "sweep")
        if spec is not None:
            cfg.shape = spec
            if command == "sweep":
                if spec.kind != "perturbed_sphere":
                    errs.append("shape.kind: sweep requires 'perturbed_sphere'")
                elif "eps" in raw["shape"]:
                    errs.append("shape.eps: set per member by sweep.eps_list, remove it")

    if command == "flow":
        fl = raw.get("flow", {})
        if not isinstance(fl, dict):
            errs.append(f"flow: expected object, got {_typename(fl)}")
        else:
            _check_unknown(fl, {"c_cfl", "tol_stop", "t_max"}, errs, "flow.")
            params = FlowParams()
            v = _get_num(fl, "c_cfl", errs, "flow.", lo_strict=0.0, hi=0.22,
                         default=params.c_cfl)
            if v is not None:
                params.c_cfl = v
            v = _get_num(fl, "tol_stop", errs, "flow.", lo=0.0, default=params.tol_stop)
            if v is not None:
                params.tol_stop = v
            v = _get_num(fl, "t_max", errs, "flow.", lo_strict=0.0, default=params.t_max)
            if v is not None:
                params.t_max = v
            cfg.flow = params

    if command == "sweep":
        sw = raw.get("sweep")
        if not isinstance(sw, dict):
            errs.append("sweep: required object with key eps_list")
        else:
            _check_unknown(sw, {"eps_list"}, errs, "sweep.")
            lst = sw.get("eps_list")
            if not isinstance(lst, list) or not lst:
                errs.append("sweep.eps_list: required nonempty list of numbers")
            else:
                eps = []
                for i, v in enumerate(lst):
                    if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                        errs.append(f"sweep.eps_list[{i}]: expected number >= 0, got {v!r}")
                    else:
                        eps.append(float(v))
                cfg.sweep_eps = eps
        cfg.threads = _get_int(raw, "threads", errs, "", lo=1)

    # a perturbed-sphere shape on the axisymmetric backend is fine; the
    # full-sphere backend only exists for n=2, already enforced above
    if errs:
        raise ConfigError(errs)
    return cfg


def _g17(x: float) -> str:
    return f"{x:.17g}"


def _write_text(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _emit_csv(path: str, lines, failed: Optional[str] = None):
    body = "\n".join(lines)
    if failed is not None:
        body += f"\nFAILED: {failed}"
    _write_text(path, body + "\n")


def cmd_quermass(cfg: ExperimentConfig, out_dir: str, plot: bool) -> int:
    graph = cfg.build_shape()
    fields = geometry_fields(graph)
    W = quermassintegrals(graph, fields)
    d = deficit(graph, cfg.m, fields)
    inr = inradius(graph)
    print(f"shape: {cfg.shape.label()}  backend={cfg.backend} n={cfg.n} J={cfg.J} m={cfg.m}")
    for k, w in enumerate(W):
        print(f"W{k} = {_g17(w)}")
    print(f"deficit = {_g17(d.value)}  (raw {_g17(d.raw)}, ball radius {_g17(d.ball_radius)})")
    print(f"hconvexity_margin = {_g17(hconvexity_margin(fields))}")
    print(f"inradius_rho = {_g17(inr.rho)}")
    print(f"inradius_center_norm = {_g17(inr.center_norm())}")
    return EXIT_OK


def cmd_flow(cfg: ExperimentConfig, out_dir: str, plot: bool) -> int:
    graph = cfg.build_shape()
    state = FlowState.create(graph, cfg.m)
    csv_path = os.path.join(out_dir, "flow_trace.csv")
    try:
        final, trace = run(state, t_max=cfg.flow.t_max, tol_stop=cfg.flow.tol_stop,
                           c_cfl=cfg.flow.c_cfl)
    except StepFailureError as exc:
        partial = getattr(exc, "partial_trace", None)
        if partial is not None:
            _emit_csv(csv_path, partial.csv_lines(), failed=str(exc))
            print(f"wrote partial trace {csv_path}")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit_csv(csv_path, trace.csv_lines())
    steps = len(trace.rows) - 1
    print(f"flow: {cfg.shape.label()}  m={cfg.m} J={cfg.J} backend={cfg.backend}")
    print(f"stop_reason = {trace.stop_reason}  steps = {steps}  t_end = {_g17(final.t)}")
    print(f"W{cfg.m} drift = {_g17(abs(final.W[cfg.m] - state.W_init[cfg.m]))}")
    print(f"W{cfg.m + 1} drop = {_g17(state.W_init[cfg.m + 1] - final.W[cfg.m + 1])}")
    print(f"monitor_flags = {trace.flag_count}  rejections = {trace.rejections}")
    print(f"wrote {csv_path}")
    if plot:
        svg_path = os.path.join(out_dir, "flow.svg")
        _write_text(svg_path, flow_svg(trace, cfg.m))
        print(f"wrote {svg_path}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, out_dir: str, plot: bool) -> int:
    spec = cfg.shape

    def family(eps: float) -> RadialGraph:
        return generate_shape(cfg.build_grid(), "perturbed_sphere",
                              r0=spec.r0, eps=eps, l=spec.l)

    result = stability_sweep(family, cfg.m, cfg.sweep_eps, n=cfg.n, workers=cfg.threads)
    csv_path = os.path.join(out_dir, "sweep.csv")
    _emit_csv(csv_path, result.csv_lines())
    print(f"sweep: n={cfg.n} m={cfg.m} l={spec.l} J={cfg.J} backend={cfg.backend} "
          f"members={len(result.records)} rejected={len(result.rejections)}")
    for eps, reason in result.rejections:
        print(f"  rejected eps={eps:g}: {reason}")
    print(f"C* (max ratio) = {_g17(result.max_ratio())}")
    try:
        slope, intercept, r2 = exponent_fit(result.records)
        print(f"log-log slope = {_g17(slope)}  r2 = {_g17(r2)}")
    except InsufficientDataError as exc:
        print(f"log-log slope: not fitted ({exc})")
    print(f"wrote {csv_path}")
    if plot:
        svg_path = os.path.join(out_dir, "sweep.svg")
        _write_text(svg_path, sweep_svg(result))
        print(f"wrote {svg_path}")
    return EXIT_OK


def cmd_conformal(cfg: ExperimentConfig, out_dir: str, plot: bool) -> int:
    graph = cfg.build_shape()
    fields = geometry_fields(graph)
    image = to_ball(graph)
    res_max, res_l2 = conf_relation_residual(fields, image)
    margin = image_convexity_margin(image)
    area = area_identity_check(fields, image)
    s = image.s
    lines = [
        f"conformal report: {cfg.shape.label()}  backend={cfg.backend} n={cfg.n} J={cfg.J}",
        f"relation_residual_max = {_g17(res_max)}",
        f"relation_residual_l2 = {_g17(res_l2)}",
        f"image_convexity_margin = {_g17(margin)}",
        f"area_identity_mismatch = {_g17(area.relative_mismatch)}",
        f"density_ratio_range = [{_g17(area.density_ratio_min)}, {_g17(area.density_ratio_max)}]",
        f"ball_radius_range = [{_g17(float(s.min()))}, {_g17(float(s.max()))}]",
    ]
    for line in lines:
        print(line)
    path = os.path.join(out_dir, "conformal_report.txt")
    _write_text(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out_dir: str, plot: bool) -> int:
    results = run_verify(seed=cfg.seed)
    for res in results:
        print(res.line())
    passed = sum(r.passed for r in results)
    print(f"verify: {passed}/{len(results)} checks passed (seed={cfg.seed})")
    return EXIT_OK if passed == len(results) else EXIT_VERIFY


_COMMANDS = {
    "quermass": cmd_quermass,
    "flow": cmd_flow,
    "sweep": cmd_sweep,
    "conformal": cmd_conformal,
    "verify": cmd_verify,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypflow",
        description="Constrained curvature flows of h-convex hypersurfaces in hyperbolic space")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "verify",
                       help="path to a JSON experiment config")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        if name in ("flow", "sweep"):
            p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    plot = getattr(args, "plot", False)
    try:
        if args.config is None:
            raw: dict = {}
        else:
            try:
                with open(args.config, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
            except FileNotFoundError:
                print(f"config error: no such file: {args.config}", file=sys.stderr)
                return EXIT_CONFIG
            except json.JSONDecodeError as exc:
                print(f"config error: {args.config} is not valid JSON: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        try:
            cfg = parse_config(raw, args.command)
        except ConfigError as exc:
            for line in exc.errors:
                print(f"config error: {line}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            os.makedirs(args.out, exist_ok=True)
        except OSError as exc:
            print(f"I/O error: cannot create output directory {args.out}: {exc}",
                  file=sys.stderr)
            return EXIT_IO
        return _COMMANDS[args.command](cfg, args.out, plot)
    except (ShapeRejectionError, DiscretizationError, ConeViolationError,
            StepFailureError, InsufficientDataError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # e.g. a malformed HYPFLOW_THREADS env var; schema validation catches
        # everything coming from the config file itself before this point
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
