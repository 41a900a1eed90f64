"""Normalized elementary symmetric functions of curvature spectra.

E_k(kappa) = sigma_k(kappa) / C(n, k), so that E_k(c, ..., c) = c^k.
The curvature quotient F = E_m / E_{m-1} drives the flow module; its
gradient and the cone inequalities below are what make the flow parabolic
on h-convex data.

All evaluators accept arrays whose last axis indexes the n principal
curvatures and broadcast over any leading grid axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

__all__ = [
    "ConeViolationError",
    "CurvatureSpectrum",
    "ConeCheckReport",
    "esym_all",
    "esym_eval",
    "esym_grad",
    "esym_hess",
    "quotient_eval",
    "cone_checks",
]

# Quotients with |E_{m-1}| below this are rejected as degenerate.
QUOTIENT_FLOOR = 1e-14


class ConeViolationError(ValueError):
    """Raised when a spectrum leaves the cone a quotient needs."""


@dataclass(frozen=True)
class CurvatureSpectrum:
    """A single point's principal curvatures, ordered ascending."""

    kappa: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.kappa, dtype=float))
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("spectrum needs at least two curvatures")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectrum contains non-finite entries")
        object.__setattr__(self, "kappa", arr)

    @property
    def n(self) -> int:
        return self.kappa.size

    def in_positive_cone(self) -> bool:
        """All sigma_1..sigma_n positive (Garding cone of sigma_n)."""
        return bool(np.all(esym_all(self.kappa) > 0.0))

    def is_hconvex(self, tol: float = 0.0) -> bool:
        return bool(self.kappa[0] >= 1.0 - tol)


def _kappa_array(kappa) -> np.ndarray:
    arr = np.asarray(kappa, dtype=float) if not isinstance(kappa, CurvatureSpectrum) else kappa.kappa
    if arr.shape[-1] < 1:
        raise ValueError("empty spectrum")
    return arr


def esym_all(kappa) -> np.ndarray:
    """All normalized values E_0..E_n, shape (..., n+1).

    Uses coefficient accumulation of prod_i (x + kappa_i): every update is
    an add of same-sign terms when kappa >= 0, so there is no cancellation
    for the h-convex spectra the flow produces.
    """
    arr = _kappa_array(kappa)
    n = arr.shape[-1]
    out = np.zeros(arr.shape[:-1] + (n + 1,), dtype=float)
    out[..., 0] = 1.0
    for i in range(n):
        ki = arr[..., i]
        for k in range(i + 1, 0, -1):
            out[..., k] += ki * out[..., k - 1]
    for k in range(1, n + 1):
        out[..., k] /= comb(n, k)
    return out


def _check_k(k: int, n: int, *, lo: int = 0):
    if not lo <= k <= n:
        raise ValueError(f"order k={k} out of range [{lo}, {n}]")


def esym_eval(k: int, kappa) -> np.ndarray | float:
    """Normalized elementary symmetric value E_k."""
    arr = _kappa_array(kappa)
    _check_k(k, arr.shape[-1])
    val = esym_all(arr)[..., k]
    return float(val) if val.ndim == 0 else val


def esym_grad(k: int, kappa) -> np.ndarray:
    """Gradient dE_k/dkappa_i, shape (..., n).

    dE_k/dkappa_i = sigma_{k-1}(kappa with i removed) / C(n, k); each
    reduced spectrum is re-accumulated from scratch, which is O(n^2) but
    cancellation-free.
    """
    arr = _kappa_array(kappa)
    n = arr.shape[-1]
    _check_k(k, n, lo=1)
    grad = np.empty_like(arr)
    for i in range(n):
        reduced = np.delete(arr, i, axis=-1)
        if k - 1 == 0:
            grad[..., i] = 1.0
        else:
            sigma = esym_all(reduced)[..., k - 1] * comb(n - 1, k - 1)
            grad[..., i] = sigma
    return grad / comb(n, k)


def esym_hess(k: int, kappa) -> np.ndarray:
    """Hessian d2E_k/dkappa_i dkappa_j, shape (..., n, n); zero diagonal."""
    arr = _kappa_array(kappa)
    n = arr.shape[-1]
    _check_k(k, n, lo=1)
    hess = np.zeros(arr.shape[:-1] + (n, n), dtype=float)
    if k < 2:
        return hess
    for i in range(n):
        for j in range(i + 1, n):
            reduced = np.delete(arr, (i, j), axis=-1)
            if k - 2 == 0:
                val = np.ones(arr.shape[:-1])
            else:
                val = esym_all(reduced)[..., k - 2] * comb(n - 2, k - 2)
            hess[..., i, j] = val
            hess[..., j, i] = val
    return hess / comb(n, k)


def quotient_eval(m: int, kappa) -> tuple[np.ndarray | float, np.ndarray]:
    """Curvature quotient F = E_m/E_{m-1} and its gradient dF/dkappa.

    Raises ConeViolationError when E_{m-1} falls below the degeneracy
    floor anywhere, since the quotient stops being well defined there.
    """
    arr = _kappa_array(kappa)
    n = arr.shape[-1]
    if not 1 <= m <= n:
        raise ValueError(f"quotient order m={m} out of range [1, {n}]")
    E = esym_all(arr)
    Em1 = E[..., m - 1]
    if np.any(Em1 <= QUOTIENT_FLOOR) or not np.all(np.isfinite(Em1)):
        raise ConeViolationError(f"E_{m-1} <= {QUOTIENT_FLOOR:g}: spectrum left the admissible cone")
    F = E[..., m] / Em1
    gm = esym_grad(m, arr)
    gm1 = esym_grad(m - 1, arr) if m >= 2 else np.zeros_like(arr)
    dF = (gm * Em1[..., None] - E[..., m, None] * gm1) / (Em1 ** 2)[..., None]
    F = float(F) if np.ndim(F) == 0 else F
    return F, dF


@dataclass
class ConeCheckReport:
    """Slack of each structural inequality at one spectrum; >= 0 means it holds."""

    hconvex: bool
    f_value: float
    grad_trace_lower: float        # sum_i dF_i - 1
    grad_trace_upper: float        # m - sum_i dF_i
    second_moment_lower: float     # sum_i kappa_i^2 dF_i - F^2
    second_moment_upper: float     # (n+1-m) F^2 - sum_i kappa_i^2 dF_i
    # (E_k^2 - E_{k-1}E_{k+1}) / max(E_k^2, |E_{k-1}E_{k+1}|, 1): the raw
    # difference scales like kappa^(2k), so only a relative slack can be
    # compared against one tolerance across k
    newton_maclaurin: list[float] = field(default_factory=list)

    def all_hold(self, tol: float = 0.0) -> bool:
        slacks = [
            self.grad_trace_lower,
            self.grad_trace_upper,
            self.second_moment_lower,
            self.second_moment_upper,
            *self.newton_maclaurin,
        ]
        return all(s >= -tol for s in slacks)


def cone_checks(kappa, m: int) -> ConeCheckReport:
    """Evaluate the quotient's structural inequalities on one spectrum.

    For h-convex spectra every reported slack should be nonnegative:
    1 <= sum dF <= m and F^2 <= sum kappa^2 dF <= (n+1-m) F^2, plus
    E_{k-1}E_{k+1} <= E_k^2 for k = 1..n-1.
    """
    arr = _kappa_array(kappa)
    if arr.ndim != 1:
        raise ValueError("cone_checks takes a single spectrum")
    n = arr.size
    F, dF = quotient_eval(m, arr)
    E = esym_all(arr)
    trace = float(np.sum(dF))
    second = float(np.sum(arr ** 2 * dF))
    nm = [float((E[k] ** 2 - E[k - 1] * E[k + 1])
                / max(E[k] ** 2, abs(E[k - 1] * E[k + 1]), 1.0))
          for k in range(1, n)]
    return ConeCheckReport(
        hconvex=bool(arr.min() >= 1.0),
        f_value=float(F),
        grad_trace_lower=trace - 1.0,
        grad_trace_upper=float(m) - trace,
        second_moment_lower=second - F ** 2,
        second_moment_upper=(n + 1 - m) * F ** 2 - second,
        newton_maclaurin=nm,
    )
