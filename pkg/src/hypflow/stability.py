"""Stability experiment: how far a shape sits from the nearest geodesic
sphere, measured against its quermassintegral deficit.

For an h-convex domain the (m+1)-st quermassintegral exceeds the value it
would take on the geodesic ball with the same W_m; the excess ("deficit")
vanishes exactly on balls, and the distance to the best-fit geodesic sphere
is controlled by deficit^(1/(m+2)). This module computes both sides of that
relation: the deficit through the ball profile functions, the distance through
a Chebyshev radial-gap fit (which upper-bounds the Hausdorff distance to the
fitted sphere for star-shaped bodies), epsilon-sweeps over shape families, a
log-log exponent fit, and a line-by-line check of the integral identity that
links the time-accumulated flow dissipation to the initial deficit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .flow import DEFAULT_CFL, DEFAULT_TOL_STOP, FlowState, FlowTrace, run
from .hypersurface import (
    RadialGraph,
    ShapeRejectionError,
    ball_profile,
    ball_profile_inverse,
    geodesic_distances,
    geometry_fields,
    inradius,
    quermassintegrals,
)
from .symfunc import quotient_eval

__all__ = [
    "DeficitResult",
    "deficit",
    "SphereFit",
    "sphere_fit",
    "SweepRecord",
    "SweepResult",
    "stability_sweep",
    "InsufficientDataError",
    "exponent_fit",
    "ProofTraceReport",
    "proof_trace_check",
    "sweep_worker_count",
]

#: negative deficits larger than this (in magnitude, relative) indicate a
#: resolution problem rather than rounding and are not silently clamped
_CLAMP_REL = 1e-6


class InsufficientDataError(ValueError):
    """Too few (or degenerate) data points for a requested fit."""


@dataclass(frozen=True)
class DeficitResult:
    """Quermassintegral deficit; `value` clamps rounding-level negatives to 0,
    `raw` keeps the signed number for logging."""

    value: float
    raw: float
    W_m: float
    W_m1: float
    ball_radius: float


def deficit(graph: RadialGraph, m: int, fields=None) -> DeficitResult:
    """W_{m+1}(Omega) minus its value on the ball with the same W_m."""
    n = graph.n
    if not 0 <= m <= n - 1:
        raise ValueError(f"m={m} out of range 0..{n - 1}")
    if fields is None:
        fields = geometry_fields(graph)
    W = quermassintegrals(graph, fields)
    r_hat = ball_profile_inverse(n, m, float(W[m]))
    raw = float(W[m + 1] - ball_profile(n, m + 1, r_hat))
    value = raw if raw > 0.0 else 0.0
    return DeficitResult(value=value, raw=raw, W_m=float(W[m]),
                         W_m1=float(W[m + 1]), ball_radius=r_hat)


@dataclass(frozen=True)
class SphereFit:
    """Best-fit geodesic sphere: minimizes the radial gap
    (max_x d(c,x) - min_x d(c,x))/2 over centers c; radius is the midrange."""

    center: np.ndarray        # 3-vector chart point (full) or signed axis offset (axisym)
    radius: float
    cheb: float
    converged: bool

    def center_norm(self) -> float:
        return float(np.linalg.norm(np.atleast_1d(self.center)))


def _gap_and_radius(grid, r, center) -> tuple[float, float]:
    d = geodesic_distances(grid, r, center)
    lo, hi = float(d.min()), float(d.max())
    return 0.5 * (hi - lo), 0.5 * (hi + lo)


def sphere_fit(graph: RadialGraph) -> SphereFit:
    grid, r = graph.grid, graph.r
    inr = inradius(graph)

    def gap(center):
        return _gap_and_radius(grid, r, center)[0]

    if graph.backend == "axisym":
        bound = float(r.max())
        res = minimize_scalar(gap, bounds=(-bound, bound), method="bounded",
                              options={"xatol": 1e-11})
        best_c, best_val, ok = float(res.x), float(res.fun), bool(res.success)
        for start in (0.0, float(np.atleast_1d(inr.center)[0])):
            v = gap(start)
            if v < best_val:
                best_c, best_val = start, v
        cheb, radius = _gap_and_radius(grid, r, best_c)
        return SphereFit(center=np.array([0.0, 0.0, best_c]), radius=radius,
                         cheb=cheb, converged=ok)

    starts = [np.zeros(3), np.asarray(inr.center, dtype=float)]
    best = None
    ok = False
    for s0 in starts:
        res = minimize(lambda c: gap(c), s0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
        ok = ok or bool(res.success)
    cheb, radius = _gap_and_radius(grid, r, best.x)
    return SphereFit(center=np.asarray(best.x, dtype=float), radius=radius,
                     cheb=cheb, converged=ok)


@dataclass(frozen=True)
class SweepRecord:
    """One stability-experiment sample; `ratio` tests the sharp exponent
    1/(m+2), `ratio3` the weaker 1/3 law, both zero by convention when the
    deficit vanishes."""

    eps: float
    deficit: float
    raw_deficit: float
    dist: float
    ratio: float
    ratio3: float
    minF: float
    maxF: float
    maxH: float
    rho_minus: float

    def csv_row(self) -> str:
        vals = (self.eps, self.deficit, self.dist, self.ratio, self.ratio3,
                self.minF, self.maxF, self.maxH, self.rho_minus)
        return ",".join(f"{x:.17g}" for x in vals)

    @staticmethod
    def csv_header() -> str:
        return "eps,deficit,dist,ratio_m2,ratio_3,minF,maxF,maxH,rhoMinus"


@dataclass
class SweepResult:
    records: list          # list[SweepRecord], sorted by eps
    rejections: list       # list[(eps, reason)]
    m: int
    n: int

    def max_ratio(self) -> float:
        vals = [rec.ratio for rec in self.records if rec.ratio > 0.0]
        return max(vals) if vals else 0.0

    def csv_lines(self):
        yield SweepRecord.csv_header()
        for rec in self.records:
            yield rec.csv_row()


def sweep_worker_count(n_jobs: int, configured: Optional[int] = None) -> int:
    """Pool size for sweep fan-out: HYPFLOW_THREADS beats the configured
    value, which beats the CPU count; never more workers than jobs."""
    env = os.environ.get("HYPFLOW_THREADS", "").strip()
    if env:
        workers = int(env)
        if workers < 1:
            raise ValueError("HYPFLOW_THREADS must be a positive integer")
    elif configured is not None:
        workers = configured
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_jobs))


def _sweep_one(family: Callable[[float], RadialGraph], m: int, eps: float):
    try:
        graph = family(eps)
    except ShapeRejectionError as exc:
        return ("rejected", eps, str(exc))
    fields = geometry_fields(graph)
    F, _ = quotient_eval(m, fields.kappa)
    defres = deficit(graph, m, fields)
    if defres.raw < -_CLAMP_REL * max(abs(defres.W_m1), 1.0):
        return ("rejected", eps, f"deficit {defres.raw:.3e} below clamp window")
    if eps == 0.0:
        dist = ratio = ratio3 = 0.0
    else:
        dist = sphere_fit(graph).cheb
        d = defres.value
        ratio = dist / d ** (1.0 / (m + 2)) if d > 0.0 else 0.0
        ratio3 = dist / d ** (1.0 / 3.0) if d > 0.0 else 0.0
    rec = SweepRecord(
        eps=eps, deficit=defres.value, raw_deficit=defres.raw, dist=dist,
        ratio=ratio, ratio3=ratio3, minF=float(F.min()), maxF=float(F.max()),
        maxH=float(fields.H.max()), rho_minus=inradius(graph).rho,
    )
    return ("ok", eps, rec)


def stability_sweep(family: Callable[[float], RadialGraph], m: int,
                    eps_list: Sequence[float], *, n: Optional[int] = None,
                    workers: Optional[int] = None) -> SweepResult:
    """Static sweep over perturbation amplitudes; members run concurrently
    (HYPFLOW_THREADS caps the pool) and results come back sorted by eps."""
    eps_sorted = sorted(float(e) for e in eps_list)
    if not eps_sorted:
        raise ValueError("eps_list must be nonempty")
    workers = sweep_worker_count(len(eps_sorted), workers)
    if workers == 1:
        outcomes = [_sweep_one(family, m, e) for e in eps_sorted]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda e: _sweep_one(family, m, e), eps_sorted))
    records, rejections = [], []
    dim = n
    for status, eps, payload in outcomes:
        if status == "ok":
            records.append(payload)
        else:
            rejections.append((eps, payload))
    if records and dim is None:
        dim = family(records[0].eps).n
    return SweepResult(records=records, rejections=rejections, m=m, n=dim or 0)


def exponent_fit(records: Sequence[SweepRecord]) -> tuple[float, float, float]:
    """Least-squares slope of log(dist) against log(deficit); returns
    (slope, intercept, r_squared)."""
    pts = [(rec.deficit, rec.dist) for rec in records
           if rec.deficit > 0.0 and rec.dist > 0.0]
    if len(pts) < 3:
        raise InsufficientDataError(
            f"exponent fit needs >= 3 records with positive deficit and dist, got {len(pts)}")
    x = np.log(np.array([p[0] for p in pts]))
    y = np.log(np.array([p[1] for p in pts]))
    if np.ptp(x) < 1e-12:
        raise InsufficientDataError("degenerate fit: deficits are identical")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(intercept), r2


@dataclass
class ProofTraceReport:
    """Comparison of the flow's accumulated dissipation integral with the
    initial deficit (they agree exactly in the continuum), plus the windowed
    traceless-curvature mass over t in [delta, 2*delta], delta = deficit^(1/(m+2))."""

    cum_integral: float
    target: float
    relative_residual: float
    initial_deficit: DeficitResult
    delta: float
    window_mass: float
    window_constant: float
    stop_reason: str
    converged: bool
    skipped: bool


def proof_trace_check(graph: RadialGraph, m: int, *,
                      precomputed: Optional[tuple[FlowState, FlowTrace]] = None,
                      t_max: float = 30.0, tol_stop: float = DEFAULT_TOL_STOP,
                      c_cfl: float = DEFAULT_CFL) -> ProofTraceReport:
    """Check int_0^stop int lam'(E_m - E_{m+1}E_{m-1}/E_m) dmu dt against
    ((n+1)/(n-m)) * deficit of the initial shape."""
    n = graph.n
    defres = deficit(graph, m)
    if precomputed is not None:
        final_state, trace = precomputed
    else:
        final_state, trace = run(FlowState.create(graph, m), t_max=t_max,
                                 tol_stop=tol_stop, c_cfl=c_cfl)
    cum = float(trace.rows[-1][-1])
    target = (n + 1) / (n - m) * defres.value
    if abs(target) < 1e-12:
        residual = abs(cum - target)
    else:
        residual = abs(cum - target) / abs(target)
    converged = trace.stop_reason in ("traceless_small", "stationary")

    delta = defres.value ** (1.0 / (m + 2)) if defres.value > 0.0 else 0.0
    window_mass = 0.0
    if delta > 0.0 and len(trace.rows) > 1:
        t = trace.column("t")
        y = trace.column("AtrL2") ** 2
        lo, hi = delta, min(2.0 * delta, float(t[-1]))
        if hi > lo:
            ts = np.unique(np.concatenate([[lo], t[(t > lo) & (t < hi)], [hi]]))
            window_mass = float(np.trapezoid(np.interp(ts, t, y), ts))
    window_constant = (window_mass * delta ** (m - 1) / defres.value
                       if defres.value > 0.0 else 0.0)
    return ProofTraceReport(
        cum_integral=cum, target=target, relative_residual=residual,
        initial_deficit=defres, delta=delta, window_mass=window_mass,
        window_constant=window_constant, stop_reason=trace.stop_reason,
        converged=converged, skipped=not converged,
    )
