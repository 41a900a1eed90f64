"""Consolidated verification suite: seeded fuzz and identity checks spanning
every module, runnable from the CLI (`hypflow verify`) or from tests.

Each check returns a CheckResult with a pass flag and a one-line numeric
summary; run_verify executes the full battery. The checks are quantitative
statements with fixed tolerances — symmetric-function inequalities on random
spectra, integral identities on random h-convex shapes, invariant monitors on
a canned flow run, conformal-image identities, and the deficit/dissipation
bookkeeping — so a pass is direct evidence the numerics implement the
structure they claim.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .conformal import area_identity_check, conf_relation_residual, image_convexity_margin, to_ball
from .flow import FlowState, run, variational_check
from .grids import AxisymGrid, FullSphereGrid
from .hypersurface import (
    ball_profile,
    generate_shape,
    geometry_fields,
    hconvexity_margin,
    integrate,
    quermassintegrals,
    random_hconvex_shape,
)
from .stability import deficit, proof_trace_check, sphere_fit
from .symfunc import esym_all, quotient_eval

__all__ = ["CheckResult", "run_verify",
           "check_symfunc_fuzz", "check_subset_oracle", "check_minkowski",
           "check_isometry", "check_deficit_fuzz", "check_canned_flow",
           "check_conformal", "check_variational"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<22s} {self.detail}  [{self.elapsed:.2f}s]"


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.elapsed = time.perf_counter() - t0
        return res
    return wrapper


def _sample_spectra(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """h-convex spectra with a spread of scales, including near-umbilic and
    near-degenerate (kappa_i -> 1) rows."""
    kind = rng.integers(0, 4, size=count)
    kappa = np.empty((count, n))
    kappa[kind == 0] = 1.0 + rng.lognormal(0.0, 1.0, size=((kind == 0).sum(), n))
    kappa[kind == 1] = 1.0 + 10.0 ** rng.uniform(-12, 3, size=((kind == 1).sum(), n))
    base = 1.0 + rng.lognormal(0.0, 1.5, size=((kind == 2).sum(), 1))
    kappa[kind == 2] = base * (1.0 + 1e-9 * rng.standard_normal(((kind == 2).sum(), n)))
    kappa[kind == 3] = np.repeat(1.0 + rng.lognormal(0.0, 1.0, size=((kind == 3).sum(), 1)), n, axis=1)
    return np.maximum(kappa, 1.0)


@_timed
def check_symfunc_fuzz(seed: int = 0, samples: int = 100_000) -> CheckResult:
    """Newton-Maclaurin, Euler homogeneity, gradient positivity, midpoint
    concavity, and the quotient trace/second-moment bounds on random
    h-convex spectra."""
    rng = np.random.default_rng(seed)
    combos = [(n, m) for n in range(2, 7) for m in range(1, n + 1)]
    per = max(2, samples // len(combos))
    worst: dict[str, float] = {}
    total = 0

    def track(name, slack):
        worst[name] = min(worst.get(name, np.inf), float(np.min(slack)))

    for n, m in combos:
        kappa = _sample_spectra(rng, n, per)
        total += per
        E = esym_all(kappa)
        F, dF = quotient_eval(m, kappa)
        scaleE = np.abs(E).max(axis=-1)
        for k in range(1, n):
            track("newton_maclaurin",
                  (E[:, k] ** 2 - E[:, k - 1] * E[:, k + 1]) / scaleE ** 2 + 1e-11)
        track("euler_homogeneity", 1e-11 - np.abs((kappa * dF).sum(-1) - F) / F)
        track("grad_positive", dF.min(-1))
        track("trace_lower", dF.sum(-1) - 1.0 + 1e-11)
        track("trace_upper", m - dF.sum(-1) + 1e-11)
        sec = (kappa ** 2 * dF).sum(-1)
        track("second_moment_lower", (sec - F ** 2) / F ** 2 + 1e-11)
        track("second_moment_upper", ((n + 1 - m) * F ** 2 - sec) / F ** 2 + 1e-11)
        half = per // 2
        a, b = kappa[:half], kappa[half:2 * half]
        Fa, _ = quotient_eval(m, a)
        Fb, _ = quotient_eval(m, b)
        Fmid, _ = quotient_eval(m, 0.5 * (a + b))
        scale = np.maximum(np.abs(Fa), np.abs(Fb))
        track("midpoint_concavity", (Fmid - 0.5 * (Fa + Fb)) / scale + 1e-11)

    bad = {k: v for k, v in worst.items() if v < 0.0}
    detail = f"{total} samples, worst slacks: " + ", ".join(
        f"{k}={v:.2e}" for k, v in sorted(worst.items()))
    return CheckResult("symfunc_fuzz", not bad, detail)


@_timed
def check_subset_oracle(seed: int = 0, trials: int = 200) -> CheckResult:
    """esym_all against brute-force subset enumeration for n <= 6."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        kappa = rng.uniform(-2.0, 3.0, size=n)
        E = esym_all(kappa)
        binom = 1.0
        for k in range(n + 1):
            brute = sum(np.prod(kappa[list(c)]) for c in itertools.combinations(range(n), k))
            binom = 1.0 if k == 0 else binom * (n - k + 1) / k
            expected = brute / binom
            worst = max(worst, abs(E[k] - expected) / max(1.0, abs(expected)))
    return CheckResult("subset_oracle", worst <= 1e-12, f"max rel err {worst:.2e} over n<=6")


def _random_shape_pool(seed: int, count: int, J: int):
    """Deterministic mix of random h-convex shapes over both backends."""
    rng = np.random.default_rng(seed)
    grids = [FullSphereGrid(J), AxisymGrid(J, n=2), AxisymGrid(J, n=3), AxisymGrid(J, n=4)]
    return [random_hconvex_shape(grids[i % len(grids)], rng) for i in range(count)]


def minkowski_residuals(graph, fields=None) -> np.ndarray:
    """Relative residual of int lam' E_k dmu = int u E_{k+1} dmu for each k."""
    if fields is None:
        fields = geometry_fields(graph)
    n = graph.n
    res = np.empty(n)
    for k in range(n):
        lhs = integrate(fields, fields.lamp * fields.E[..., k])
        rhs = integrate(fields, fields.u * fields.E[..., k + 1])
        res[k] = abs(lhs - rhs) / abs(rhs)
    return res


@_timed
def check_minkowski(seed: int = 0, count: int = 20, J: int = 96) -> CheckResult:
    worst = 0.0
    for graph in _random_shape_pool(seed, count, J):
        worst = max(worst, float(minkowski_residuals(graph).max()))
    return CheckResult("minkowski_identity", worst <= 1e-5,
                       f"worst rel residual {worst:.2e} over {count} shapes, all k")


@_timed
def check_isometry(J: int = 96) -> CheckResult:
    """Quermassintegrals of an off-center sphere match the centered ball."""
    worst = 0.0
    for r0, a in ((1.0, 0.3), (1.5, 0.6), (0.8, 0.25)):
        graph = generate_shape(AxisymGrid(J, n=2), "offset_sphere", r0=r0, a=a)
        W = quermassintegrals(graph)
        for k, w in enumerate(W):
            exact = ball_profile(graph.n, k, r0)
            worst = max(worst, abs(w - exact) / abs(exact))
    return CheckResult("isometry_invariance", worst <= 1e-6,
                       f"worst rel W error {worst:.2e} on offset spheres")


@_timed
def check_deficit_fuzz(seed: int = 0, count: int = 200, J: int = 96) -> CheckResult:
    """Deficit nonnegative (to grid tolerance) on random h-convex shapes, and
    zero within 1e-6 on spheres and offset spheres."""
    rng = np.random.default_rng(seed)
    worst_rel = np.inf
    shapes = _random_shape_pool(seed + 1, count - 24, J)
    for graph in shapes:
        m = int(rng.integers(1, graph.n))
        d = deficit(graph, m)
        worst_rel = min(worst_rel, d.raw / max(abs(d.W_m1), 1e-300))
    worst_sphere = 0.0
    for i in range(24):
        r0 = float(rng.uniform(0.5, 2.0))
        a = float(rng.uniform(0.0, 0.4)) * (i % 2)
        grid = AxisymGrid(J, n=2 + i % 3)
        graph = (generate_shape(grid, "offset_sphere", r0=r0, a=min(a, 0.9 * r0))
                 if a > 0 else generate_shape(grid, "sphere", r0=r0))
        m = int(rng.integers(1, graph.n))
        worst_sphere = max(worst_sphere, abs(deficit(graph, m).raw))
    ok = worst_rel >= -1e-6 and worst_sphere <= 1e-6
    return CheckResult("deficit_fuzz", ok,
                       f"min rel deficit {worst_rel:.2e} over {count - 24} shapes; "
                       f"max |deficit| {worst_sphere:.2e} on spheres/offsets")


@_timed
def check_canned_flow() -> CheckResult:
    """Short perturbed-sphere run: conservation, monotonicity, clean monitors,
    and convergence to the round equality case."""
    graph = generate_shape(AxisymGrid(64, n=2), "perturbed_sphere", r0=1.0, eps=0.05, l=2)
    state = FlowState.create(graph, m=1)
    final, trace = run(state, t_max=50.0)
    W1 = trace.column("W1")
    W2 = trace.column("W2")
    drift = float(np.abs(W1 - W1[0]).max() / W1[0])
    mono = bool(np.all(np.diff(W2) <= 1e-10 * np.abs(W2[:-1])))
    fit = sphere_fit(final.graph)
    radius_err = abs(ball_profile(2, 1, fit.radius) - W1[0]) / W1[0]
    issues = []
    if trace.stop_reason != "traceless_small":
        issues.append(f"stop={trace.stop_reason}")
    if trace.flag_count:
        issues.append(f"{trace.flag_count} monitor flags")
    if trace.rejections:
        issues.append(f"{trace.rejections} step rejections")
    if drift > 1e-4:
        issues.append(f"W1 drift {drift:.2e}")
    if not mono:
        issues.append("W2 not monotone")
    if fit.cheb > 1e-4:
        issues.append(f"terminal cheb {fit.cheb:.2e}")
    if radius_err > 1e-3:
        issues.append(f"terminal radius err {radius_err:.2e}")
    detail = (f"steps={len(trace.rows) - 1} drift={drift:.2e} cheb={fit.cheb:.2e} "
              f"radius_err={radius_err:.2e} flags={trace.flag_count}")
    if issues:
        detail += " | " + "; ".join(issues)
    result = CheckResult("canned_flow", not issues, detail)
    result.payload = (graph, final, trace)
    return result


@_timed
def check_proof_trace(canned_payload=None) -> CheckResult:
    """Accumulated dissipation integral vs ((n+1)/(n-m)) * initial deficit."""
    if canned_payload is None:
        graph = generate_shape(AxisymGrid(64, n=2), "perturbed_sphere", r0=1.0, eps=0.05, l=2)
        rep = proof_trace_check(graph, 1, t_max=50.0)
    else:
        graph, final, trace = canned_payload
        rep = proof_trace_check(graph, 1, precomputed=(final, trace))
    ok = rep.converged and rep.relative_residual <= 1e-2
    return CheckResult("proof_trace", ok,
                       f"cum={rep.cum_integral:.6e} target={rep.target:.6e} "
                       f"rel={rep.relative_residual:.2e} windowC={rep.window_constant:.3f}")


@_timed
def check_conformal(J: int = 96) -> CheckResult:
    """Conformal-image identities: relation residual, convexity of the image,
    and the area identity."""
    worst_sphere = worst_pert = worst_area = 0.0
    worst_margin = np.inf
    cases = [
        generate_shape(FullSphereGrid(J), "sphere", r0=0.5),
        generate_shape(FullSphereGrid(J), "sphere", r0=1.0),
        generate_shape(AxisymGrid(J, n=3), "sphere", r0=2.0),
        generate_shape(FullSphereGrid(J), "perturbed_sphere", r0=1.0, eps=0.05, l=2),
        generate_shape(FullSphereGrid(J), "perturbed_sphere", r0=1.0, eps=0.05, l=2, order=2),
        generate_shape(AxisymGrid(J, n=2), "perturbed_sphere", r0=1.0, eps=0.05, l=3),
        generate_shape(AxisymGrid(J, n=4), "perturbed_sphere", r0=1.2, eps=0.04, l=2),
    ]
    for i, graph in enumerate(cases):
        fields = geometry_fields(graph)
        image = to_ball(graph)
        res_max, _ = conf_relation_residual(fields, image)
        if i < 3:
            worst_sphere = max(worst_sphere, res_max)
        else:
            worst_pert = max(worst_pert, res_max)
        worst_margin = min(worst_margin, image_convexity_margin(image))
        worst_area = max(worst_area, abs(area_identity_check(fields, image).relative_mismatch))
    ok = (worst_sphere <= 1e-10 and worst_pert <= 1e-4
          and worst_margin >= -1e-8 and worst_area <= 1e-4)
    return CheckResult("conformal_suite", ok,
                       f"sphere res {worst_sphere:.2e}, perturbed res {worst_pert:.2e}, "
                       f"min margin {worst_margin:.3f}, area mismatch {worst_area:.2e}")


@_timed
def check_variational(J: int = 64) -> CheckResult:
    """Finite-difference dW_k/dt against the first-variation formula."""
    graph = generate_shape(FullSphereGrid(J), "perturbed_sphere", r0=1.0, eps=0.05, l=2)
    state = FlowState.create(graph, m=1)
    rep = variational_check(state)
    ok = (rep.k_residuals[state.m + 1] <= 1e-3 and rep.minkowski_residual <= 1e-5
          and rep.k_residuals[0] <= 1e-3)
    return CheckResult("variational", ok,
                       "residuals " + "/".join(f"{r:.1e}" for r in rep.k_residuals)
                       + f", minkowski {rep.minkowski_residual:.1e}")


def run_verify(seed: int = 0) -> list[CheckResult]:
    results = [
        check_symfunc_fuzz(seed),
        check_subset_oracle(seed),
        check_minkowski(seed),
        check_isometry(),
        check_deficit_fuzz(seed),
    ]
    canned = check_canned_flow()
    results.append(canned)
    results.append(check_proof_trace(getattr(canned, "payload", None)))
    results.append(check_conformal())
    results.append(check_variational())
    return results
