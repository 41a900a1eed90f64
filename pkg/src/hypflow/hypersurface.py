"""Radial-graph hypersurfaces in hyperbolic (and model Euclidean) space.

A closed star-shaped hypersurface M in H^{n+1} is stored as a radial
graph r over S^n on one of the two grid backends. With warping factor
lam(r) (sinh r for hyperbolic space, s for the flat ball model) the
induced metric, support function and Weingarten map of the graph are

    g_ij = r_i r_j + lam^2 sigma_ij,        v^2 = 1 + |grad r|^2 / lam^2,
    u = lam / v,
    h_ij = (-r_;ij + lam lam' sigma_ij + (2 lam'/lam) r_i r_j) / v,

with r_;ij the covariant Hessian on the round sphere. Everything below
is straightforward evaluation of these formulas with 4th-order stencils,
plus the integral geometry built on them: quermassintegrals via the
curvature-integral recursion, geodesic-ball profiles, and the inball.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import eval_legendre, lpmv

from .grids import AxisymGrid, FullSphereGrid, sphere_area, theta_weights
from .symfunc import esym_all

__all__ = [
    "Warp",
    "HYPERBOLIC",
    "EUCLIDEAN",
    "RadialGraph",
    "GeometryFields",
    "DiscretizationError",
    "ShapeRejectionError",
    "InradiusResult",
    "geometry_fields",
    "integrate",
    "quermassintegrals",
    "ball_profile",
    "ball_profile_inverse",
    "generate_shape",
    "random_hconvex_shape",
    "geodesic_distances",
    "radial_range_about",
    "inradius",
    "hconvexity_margin",
    "traceless_measures",
    "sinh_power_integral",
]


class DiscretizationError(RuntimeError):
    """Geometry evaluation produced a degenerate or non-finite field."""


class ShapeRejectionError(ValueError):
    """Requested shape violates a generator precondition (e.g. not h-convex)."""

    def __init__(self, message: str, margin: float | None = None):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True)
class Warp:
    """Warped-product factor of the ambient metric dr^2 + lam(r)^2 dsigma^2."""

    name: str
    lam: Callable[[np.ndarray], np.ndarray]
    lam_prime: Callable[[np.ndarray], np.ndarray]


HYPERBOLIC = Warp("hyperbolic", np.sinh, np.cosh)
EUCLIDEAN = Warp("euclidean", lambda s: np.asarray(s, dtype=float), lambda s: np.ones_like(np.asarray(s, dtype=float)))


@dataclass(frozen=True)
class RadialGraph:
    """Positive radial sample vector over one of the angular grids."""

    grid: FullSphereGrid | AxisymGrid
    r: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.r, dtype=float)
        if arr.shape != self.grid.node_shape():
            raise ValueError(f"radial values have shape {arr.shape}, grid wants {self.grid.node_shape()}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise ValueError("radial values must be finite and positive")
        object.__setattr__(self, "r", arr)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def backend(self) -> str:
        return self.grid.backend

    def with_values(self, r: np.ndarray) -> "RadialGraph":
        return RadialGraph(self.grid, r)


@dataclass
class GeometryFields:
    """Pointwise geometry of a radial graph; axis layout follows the grid."""

    graph: RadialGraph
    warp: Warp
    r: np.ndarray
    lam: np.ndarray
    lamp: np.ndarray
    v: np.ndarray
    u: np.ndarray
    kappa: np.ndarray          # (..., n); axisym order is (radial, angular, ...)
    E: np.ndarray              # (..., n+1) normalized symmetric functions
    area_density: np.ndarray   # v * lam^n against the round measure
    Atr2: np.ndarray           # |A - (H/n) g|^2, clamped at 0
    H: np.ndarray
    rt: np.ndarray
    rtt: np.ndarray
    rp: Optional[np.ndarray] = None
    rtp: Optional[np.ndarray] = None
    rpp: Optional[np.ndarray] = None
    g_tt: Optional[np.ndarray] = None
    g_tp: Optional[np.ndarray] = None
    g_pp: Optional[np.ndarray] = None
    h_tt: Optional[np.ndarray] = None
    h_tp: Optional[np.ndarray] = None
    h_pp: Optional[np.ndarray] = None
    S_tt: Optional[np.ndarray] = None
    S_tp: Optional[np.ndarray] = None
    S_pt: Optional[np.ndarray] = None
    S_pp: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.graph.n

    def min_kappa(self) -> float:
        return float(self.kappa.min())


def geometry_fields(graph: RadialGraph, warp: Warp = HYPERBOLIC) -> GeometryFields:
    """Evaluate first and second fundamental form data at every node."""
    grid, r = graph.grid, graph.r
    lam = warp.lam(r)
    lamp = warp.lam_prime(r)
    if grid.backend == "full":
        fields = _geometry_full(graph, grid, r, lam, lamp, warp)
    else:
        fields = _geometry_axisym(graph, grid, r, lam, lamp, warp)
    if not np.all(np.isfinite(fields.kappa)):
        bad = np.argwhere(~np.isfinite(fields.kappa))
        raise DiscretizationError(f"non-finite curvature at node index {bad[0].tolist()}")
    return fields


def _geometry_full(graph, grid: FullSphereGrid, r, lam, lamp, warp) -> GeometryFields:
    rt = grid.d_theta(r)
    rp = grid.d_phi(r)
    rtt = grid.d_theta2(r)
    rpp = grid.d_phi2(r)
    rtp = grid.d_theta_phi(r)
    sin_t, cos_t, cot_t = grid.sin_t, grid.cos_t, grid.cot_t

    cov_tt = rtt
    cov_tp = rtp - cot_t * rp
    cov_pp = rpp + sin_t * cos_t * rt

    inv_lam2 = 1.0 / (lam * lam)
    grad2 = rt * rt + (rp / sin_t) ** 2
    v = np.sqrt(1.0 + grad2 * inv_lam2)
    u = lam / v

    g_tt = rt * rt + lam * lam
    g_tp = rt * rp
    g_pp = rp * rp + (lam * sin_t) ** 2
    detg = g_tt * g_pp - g_tp * g_tp
    if np.any(detg <= 0.0):
        bad = np.argwhere(detg <= 0.0)
        raise DiscretizationError(f"induced metric degenerate at node index {bad[0].tolist()}")

    two_lp = 2.0 * lamp / lam
    h_tt = (-cov_tt + lam * lamp + two_lp * rt * rt) / v
    h_tp = (-cov_tp + two_lp * rt * rp) / v
    h_pp = (-cov_pp + lam * lamp * sin_t ** 2 + two_lp * rp * rp) / v

    i_tt = g_pp / detg
    i_pp = g_tt / detg
    i_tp = -g_tp / detg
    S_tt = i_tt * h_tt + i_tp * h_tp
    S_tp = i_tt * h_tp + i_tp * h_pp
    S_pt = i_tp * h_tt + i_pp * h_tp
    S_pp = i_tp * h_tp + i_pp * h_pp

    tr = S_tt + S_pp
    # (tr^2 - 4 det) in cancellation-free form; exact umbilic input stays umbilic
    disc = np.maximum((S_tt - S_pp) ** 2 + 4.0 * S_tp * S_pt, 0.0)
    root = np.sqrt(disc)
    kappa = np.stack([(tr - root) / 2.0, (tr + root) / 2.0], axis=-1)

    E = esym_all(kappa)
    H = 2.0 * E[..., 1]
    Atr2 = disc / 2.0  # |A - (H/2)g|^2 = (kappa_1 - kappa_2)^2 / 2
    area_density = v * lam ** 2

    return GeometryFields(
        graph=graph, warp=warp, r=r, lam=lam, lamp=lamp, v=v, u=u,
        kappa=kappa, E=E, area_density=area_density, Atr2=Atr2, H=H,
        rt=rt, rtt=rtt, rp=rp, rtp=rtp, rpp=rpp,
        g_tt=g_tt, g_tp=g_tp, g_pp=g_pp, h_tt=h_tt, h_tp=h_tp, h_pp=h_pp,
        S_tt=S_tt, S_tp=S_tp, S_pt=S_pt, S_pp=S_pp,
    )


def _geometry_axisym(graph, grid: AxisymGrid, r, lam, lamp, warp) -> GeometryFields:
    n = grid.n
    rt = grid.d_theta(r)
    rtt = grid.d_theta2(r)

    v = np.sqrt(1.0 + (rt / lam) ** 2)
    u = lam / v
    g_tt = rt * rt + lam * lam

    # coordinate directions are principal: one radial and n-1 equal angular curvatures
    k_rad = (-rtt + lam * lamp + 2.0 * (lamp / lam) * rt * rt) / (v * g_tt)
    k_ang = (lam * lamp - grid.cot_t * rt) / (v * lam * lam)

    kappa = np.concatenate([k_rad[:, None], np.repeat(k_ang[:, None], n - 1, axis=1)], axis=1)
    E = esym_all(kappa)
    H = n * E[..., 1]
    # |A|^2 - H^2/n via the curvature split, free of large-term cancellation
    Atr2 = (n - 1) / n * (k_rad - k_ang) ** 2
    area_density = v * lam ** n

    return GeometryFields(
        graph=graph, warp=warp, r=r, lam=lam, lamp=lamp, v=v, u=u,
        kappa=kappa, E=E, area_density=area_density, Atr2=Atr2, H=H,
        rt=rt, rtt=rtt, g_tt=g_tt,
    )


def integrate(fields: GeometryFields, values) -> float:
    """Integral over M of a node scalar against the induced area measure."""
    values = np.asarray(values, dtype=float)
    if values.shape != fields.area_density.shape:
        raise ValueError("integrand shape does not match the grid")
    return fields.graph.grid.integrate_sigma(values * fields.area_density)


def sinh_power_integral(n: int, r: np.ndarray) -> np.ndarray:
    """integral_0^r sinh^n(s) ds via the standard reduction formula."""
    r = np.asarray(r, dtype=float)
    if n == 0:
        return r.copy()
    prev2 = r.copy()               # I_0
    prev = np.cosh(r) - 1.0        # I_1
    if n == 1:
        return prev
    sh, ch = np.sinh(r), np.cosh(r)
    for k in range(2, n + 1):
        cur = sh ** (k - 1) * ch / k - (k - 1) / k * prev2
        prev2, prev = prev, cur
    return prev


def quermassintegrals(graph: RadialGraph, fields: GeometryFields | None = None) -> np.ndarray:
    """W_0..W_n of the enclosed domain, via the curvature-integral recursion

        W_0 = |Omega|,  W_1 = |M|/(n+1),
        W_{k+1} = (1/(n+1)) int E_k dmu - k/(n+2-k) W_{k-1}.
    """
    if fields is None:
        fields = geometry_fields(graph)
    if fields.warp.name != "hyperbolic":
        raise ValueError("quermassintegrals are defined for the hyperbolic warp")
    n = graph.n
    W = np.zeros(n + 1)
    W[0] = graph.grid.integrate_sigma(sinh_power_integral(n, graph.r))
    int_E = [integrate(fields, fields.E[..., k]) for k in range(n)]
    W[1] = int_E[0] / (n + 1)
    for k in range(1, n):
        W[k + 1] = int_E[k] / (n + 1) - k / (n + 2 - k) * W[k - 1]
    return W


def ball_profile(n: int, m: int, r: float) -> float:
    """W_m of the geodesic ball of radius r in H^{n+1}."""
    if r <= 0.0:
        raise ValueError("ball radius must be positive")
    if not 0 <= m <= n:
        raise ValueError(f"order m={m} out of range [0, {n}]")
    omega = sphere_area(n)
    area = omega * np.sinh(r) ** n
    coth = np.cosh(r) / np.sinh(r)
    W = np.zeros(n + 1)
    W[0] = omega * float(sinh_power_integral(n, np.asarray(r)))
    if n >= 1:
        W[1] = area / (n + 1)
    for k in range(1, n):
        W[k + 1] = coth ** k * area / (n + 1) - k / (n + 2 - k) * W[k - 1]
    return float(W[m])


def _ball_profile_slope(n: int, m: int, r: float) -> float:
    # dW_m(B_r)/dr for unit normal speed
    omega = sphere_area(n)
    coth = np.cosh(r) / np.sinh(r)
    return (n + 1 - m) / (n + 1) * coth ** m * omega * np.sinh(r) ** n


def ball_profile_inverse(n: int, m: int, w: float, tol: float = 1e-12) -> float:
    """Radius of the geodesic ball with W_m = w; bisection bracket, Newton polish."""
    if w <= 0.0:
        raise ValueError("profile value must be positive (W_m -> 0 as r -> 0)")
    lo, hi = 1e-9, 1.0
    while ball_profile(n, m, hi) < w:
        lo, hi = hi, hi * 2.0
        if hi > 500.0:
            raise ValueError("profile value out of representable range")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ball_profile(n, m, mid) < w:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-3 * max(1.0, hi):
            break
    r = 0.5 * (lo + hi)
    slack = 1e-9 * max(1.0, hi)  # root may sit on a bracket endpoint
    for _ in range(100):
        g = ball_profile(n, m, r) - w
        if g < 0.0:
            lo = max(lo, min(r, hi))
        else:
            hi = min(hi, max(r, lo))
        step = g / _ball_profile_slope(n, m, r)
        r_new = r - step
        if abs(step) <= tol * max(1.0, abs(r)):
            return float(min(max(r_new, lo), hi))
        if not lo - slack <= r_new <= hi + slack:
            r_new = 0.5 * (lo + hi)
        r = r_new
    return float(min(max(r, lo), hi))


# ---------------------------------------------------------------------------
# shape generation


def _axisym_harmonic(grid: AxisymGrid, l: int) -> np.ndarray:
    """Legendre profile P_l(cos theta), scaled to unit L^2(S^n) norm."""
    Jq = 2 * l + 2
    wq = theta_weights(Jq, grid.n - 1) * sphere_area(grid.n - 1)
    tq = (np.arange(Jq) + 0.5) * pi / Jq
    norm2 = float(np.sum(eval_legendre(l, np.cos(tq)) ** 2 * wq))
    return eval_legendre(l, grid.cos_t) / np.sqrt(norm2)


def _full_harmonic(grid: FullSphereGrid, l: int, order: int = 0) -> np.ndarray:
    """Real spherical harmonic of degree l and the given order, unit L^2(S^2).

    The zonal default keeps the two backends' generators in exact agreement
    for n = 2, so full-grid results can be cross-checked against the 1-D code.
    """
    from math import factorial
    if not 0 <= order <= l:
        raise ValueError("harmonic order must lie in [0, l]")
    if order == 0:
        coef = np.sqrt((2 * l + 1) / (4.0 * pi))
        ang = np.ones(2 * grid.J)
    else:
        coef = np.sqrt(2.0) * np.sqrt(
            (2 * l + 1) * factorial(l - order) / (4.0 * pi * factorial(l + order))
        )
        ang = np.cos(order * grid.phi)
    return coef * lpmv(order, l, grid.cos_t) * ang[None, :]


def _offset_sphere_profile(theta: np.ndarray, r0: float, a: float) -> np.ndarray:
    """Distance-from-origin profile of the geodesic sphere of radius r0 whose
    center sits at distance a along the axis; safeguarded Newton on the
    hyperbolic law of cosines cosh(r0) = cosh(a)cosh(p) - sinh(a)sinh(p)cos(theta)."""
    ca, sa = np.cosh(a), np.sinh(a)
    ct = np.cos(theta)
    target = np.cosh(r0)
    lo = np.full_like(ct, r0 - abs(a))
    hi = np.full_like(ct, r0 + abs(a))
    p = r0 + a * ct  # first-order profile, already close
    for _ in range(100):
        g = ca * np.cosh(p) - sa * np.sinh(p) * ct - target
        gp = ca * np.sinh(p) - sa * np.cosh(p) * ct
        step = g / gp
        p_new = p - step
        outside = (p_new < lo) | (p_new > hi)
        p_new = np.where(outside, 0.5 * (lo + hi), p_new)
        grew = ca * np.cosh(p_new) - sa * np.sinh(p_new) * ct - target
        lo = np.where(grew < 0.0, p_new, lo)
        hi = np.where(grew >= 0.0, p_new, hi)
        converged = np.max(np.abs(p_new - p)) <= 1e-13 * max(1.0, r0 + abs(a))
        p = p_new
        if converged:
            break
    return p


def generate_shape(grid, kind: str, r0: float, a: float = 0.0, eps: float = 0.0,
                   l: int = 2, order: int = 0, hconvex_floor: float = 1.0) -> RadialGraph:
    """Build one of the canonical initial hypersurfaces.

    kinds: "sphere" (geodesic sphere about the origin), "offset_sphere"
    (geodesic sphere with center displaced a < r0 along the polar axis),
    "perturbed_sphere" (r = r0 + eps * Y with Y a unit-L^2 degree-l
    harmonic, zonal unless an order is given; rejected if any principal
    curvature drops below hconvex_floor).
    """
    if r0 <= 0.0:
        raise ValueError("r0 must be positive")
    if kind == "sphere":
        return RadialGraph(grid, np.full(grid.node_shape(), float(r0)))
    if kind == "offset_sphere":
        if not 0.0 <= a < r0:
            raise ValueError("offset needs 0 <= a < r0 so the origin stays enclosed")
        if grid.backend == "full":
            prof = _offset_sphere_profile(grid.theta, r0, a)
            return RadialGraph(grid, np.repeat(prof[:, None], 2 * grid.J, axis=1))
        return RadialGraph(grid, _offset_sphere_profile(grid.theta, r0, a))
    if kind == "perturbed_sphere":
        if l < 2:
            raise ValueError("perturbation mode l must be >= 2 (l <= 1 moves the center)")
        if grid.backend == "full":
            Y = _full_harmonic(grid, l, order=order)
        else:
            if order != 0:
                raise ValueError("axisymmetric perturbations are zonal (order 0)")
            Y = _axisym_harmonic(grid, l)
        r = r0 + eps * Y
        if np.any(r <= 0.0):
            raise ShapeRejectionError("perturbation drives the radius nonpositive")
        graph = RadialGraph(grid, r)
        margin = hconvexity_margin(geometry_fields(graph))
        if margin < hconvex_floor - 1.0:
            raise ShapeRejectionError(
                f"perturbed sphere not h-convex: min kappa = {1.0 + margin:.6f}", margin=margin
            )
        return graph
    raise ValueError(f"unknown shape kind {kind!r}")


def random_hconvex_shape(grid, rng: np.random.Generator, r0_range=(0.7, 1.5),
                         margin_target: float = 0.15, max_mode: int = 4) -> RadialGraph:
    """Random smooth h-convex graph: harmonic mix over 2 <= l <= max_mode,
    amplitude shrunk geometrically until the curvature margin clears the target."""
    # keep the base sphere itself comfortably inside the margin (coth r0 - 1 >= target)
    r0_cap = 0.95 * np.arctanh(1.0 / (1.0 + margin_target + 0.05))
    r0 = min(float(rng.uniform(*r0_range)), float(r0_cap))
    bump = np.zeros(grid.node_shape())
    for l in range(2, max_mode + 1):
        if grid.backend == "full":
            for order in range(0, min(l, 2) + 1):
                bump += rng.standard_normal() * _full_harmonic(grid, l, order=order)
        else:
            bump += rng.standard_normal() * _axisym_harmonic(grid, l)
    amp = 0.1 * r0
    scale = amp / max(1e-30, float(np.max(np.abs(bump))))
    for _ in range(60):
        r = r0 + scale * bump
        if np.all(r > 0.05):
            graph = RadialGraph(grid, r)
            if hconvexity_margin(geometry_fields(graph)) >= margin_target:
                return graph
        scale *= 0.7
    return RadialGraph(grid, np.full(grid.node_shape(), r0))


# ---------------------------------------------------------------------------
# distances, inball, convexity reporting


def geodesic_distances(grid, r: np.ndarray, center) -> np.ndarray:
    """Hyperbolic distance from an interior point to every node of the graph.

    Axisym centers are signed positions on the symmetry axis; full-sphere
    centers are vectors in the exponential chart at the origin.
    """
    if grid.backend == "axisym":
        aa = float(center)
        arg = np.cosh(aa) * np.cosh(r) - np.sinh(aa) * np.sinh(r) * grid.cos_t
    else:
        w = np.asarray(center, dtype=float)
        rho = float(np.linalg.norm(w))
        if rho < 1e-300:
            return np.asarray(r, dtype=float).copy()
        cosg = np.tensordot(grid.xyz, w / rho, axes=([-1], [0]))
        arg = np.cosh(rho) * np.cosh(r) - np.sinh(rho) * np.sinh(r) * cosg
    return np.arccosh(np.maximum(arg, 1.0))


def radial_range_about(graph: RadialGraph, center) -> tuple[float, float]:
    d = geodesic_distances(graph.grid, graph.r, center)
    return float(d.min()), float(d.max())


@dataclass
class InradiusResult:
    rho: float
    center: object            # float (axisym) or ndarray shape (3,) (full)
    converged: bool

    def center_norm(self) -> float:
        return float(np.linalg.norm(np.atleast_1d(np.asarray(self.center, dtype=float))))


def inradius(graph: RadialGraph) -> InradiusResult:
    """Largest rho so some center keeps every boundary node at distance >= rho.

    Max-min optimization with multistart (origin plus a center-of-mass
    proxy); the objective is concave-ish but nonsmooth, so a simplex
    search is used and the best start wins.
    """
    grid, r = graph.grid, graph.r
    if grid.backend == "axisym":
        def neg_obj(a):
            return -float(geodesic_distances(grid, r, float(a)).min())
        span = float(r.max())
        res = minimize_scalar(neg_obj, bounds=(-span, span), method="bounded",
                              options={"xatol": 1e-11})
        a_best, v_best = float(res.x), -float(res.fun)
        if -neg_obj(0.0) >= v_best:
            a_best, v_best = 0.0, -neg_obj(0.0)
        return InradiusResult(v_best, a_best, bool(res.success))

    def neg_obj(w):
        return -float(geodesic_distances(grid, r, w).min())

    com = np.tensordot(grid.sigma_weights * r, grid.xyz, axes=([0, 1], [0, 1]))
    com_norm = np.linalg.norm(com)
    starts = [np.zeros(3)]
    if com_norm > 1e-12:
        starts.append(com / com_norm * min(0.3 * float(r.min()), com_norm))
    best, best_val, ok = np.zeros(3), -neg_obj(np.zeros(3)), True
    for w0 in starts:
        res = minimize(neg_obj, w0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if -res.fun > best_val:
            best, best_val, ok = res.x, -res.fun, bool(res.success)
    return InradiusResult(best_val, best, ok)


def hconvexity_margin(fields: GeometryFields) -> float:
    """min over nodes and directions of (kappa_i - 1); >= 0 means h-convex."""
    return float(fields.kappa.min() - 1.0)


def traceless_measures(fields: GeometryFields) -> tuple[float, float]:
    """(L^2 norm, sup norm) of the traceless second fundamental form."""
    l2 = float(np.sqrt(max(integrate(fields, fields.Atr2), 0.0)))
    sup = float(np.sqrt(fields.Atr2.max()))
    return l2, sup
