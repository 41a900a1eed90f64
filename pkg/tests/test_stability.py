"""Deficit functional, sphere fitting, amplitude sweeps, and the
time-integrated deficit identity along the flow.

Oracles: geodesic spheres and their isometric offsets (zero deficit, exact
fits), quadratic small-amplitude scaling of the deficit, synthetic power-law
data for the exponent fit, and the closed-form relation between the flow's
accumulated dissipation and the initial deficit.
"""

import numpy as np
import pytest

import hypflow.stability as stability
from hypflow.flow import FlowState, run
from hypflow.grids import AxisymGrid, FullSphereGrid
from hypflow.hypersurface import ShapeRejectionError, generate_shape
from hypflow.stability import (
    InsufficientDataError,
    SweepRecord,
    deficit,
    exponent_fit,
    proof_trace_check,
    sphere_fit,
    stability_sweep,
    sweep_worker_count,
)


def perturbed_family(grid, l=2, r0=1.0):
    def family(eps):
        if eps == 0.0:
            return generate_shape(grid, "sphere", r0)
        return generate_shape(grid, "perturbed_sphere", r0, eps=eps, l=l)
    return family


class TestDeficit:
    def test_sphere_is_extremal(self):
        for grid in [AxisymGrid(48, 2), AxisymGrid(48, 4), FullSphereGrid(48)]:
            for m in range(1, grid.n if grid.backend == "axisym" else 2):
                d = deficit(generate_shape(grid, "sphere", 1.0), m)
                assert abs(d.raw) < 1e-11
                assert d.value >= 0.0
                assert d.ball_radius == pytest.approx(1.0, abs=1e-10)

    def test_offset_sphere_zero_deficit(self):
        d = deficit(generate_shape(AxisymGrid(64, 2), "offset_sphere", 1.0, a=0.4), 1)
        assert abs(d.raw) < 1e-6  # discretization only
        assert d.ball_radius == pytest.approx(1.0, abs=1e-6)

    def test_perturbed_positive_and_quadratic(self):
        grid = AxisymGrid(48, 2)
        d1 = deficit(generate_shape(grid, "perturbed_sphere", 1.0, eps=0.05, l=2), 1)
        d2 = deficit(generate_shape(grid, "perturbed_sphere", 1.0, eps=0.1, l=2), 1)
        assert d1.value > 0.0 and d2.value > 0.0
        assert d2.value / d1.value == pytest.approx(4.0, rel=0.1)
        assert d1.value == d1.raw  # no clamping when genuinely positive
        from hypflow.hypersurface import ball_profile
        assert ball_profile(2, 1, d1.ball_radius) == pytest.approx(d1.W_m, rel=1e-10)

    def test_order_validation(self):
        g = generate_shape(AxisymGrid(32, 2), "sphere", 1.0)
        with pytest.raises(ValueError):
            deficit(g, 2)
        with pytest.raises(ValueError):
            deficit(g, -1)


class TestSphereFit:
    def test_exact_sphere(self):
        fit = sphere_fit(generate_shape(AxisymGrid(48, 2), "sphere", 1.2))
        assert fit.cheb < 1e-10
        assert fit.radius == pytest.approx(1.2, abs=1e-9)
        assert fit.center_norm() < 1e-7

    def test_offset_sphere_axisym(self):
        fit = sphere_fit(generate_shape(AxisymGrid(64, 2), "offset_sphere", 1.0, a=0.3))
        assert fit.cheb < 1e-8
        assert fit.radius == pytest.approx(1.0, abs=1e-8)
        assert fit.center_norm() == pytest.approx(0.3, abs=1e-6)

    def test_offset_sphere_full(self):
        fit = sphere_fit(generate_shape(FullSphereGrid(32), "offset_sphere", 1.0, a=0.3))
        assert fit.cheb < 1e-8
        assert fit.center_norm() == pytest.approx(0.3, abs=1e-6)

    def test_perturbed_distance_scale(self):
        # zonal l=2 with unit-L2 harmonic: best center stays at the origin by
        # symmetry and the gap is eps * (max Y - min Y)/2 to first order
        eps = 0.1
        fit = sphere_fit(generate_shape(AxisymGrid(48, 2), "perturbed_sphere", 1.0,
                                        eps=eps, l=2))
        y_half_range = 0.75 * np.sqrt(5.0 / (4.0 * np.pi))
        assert fit.center_norm() < 1e-6
        assert fit.cheb == pytest.approx(eps * y_half_range, rel=0.02)


class TestSweep:
    def test_records_sorted_and_conventions(self):
        res = stability_sweep(perturbed_family(AxisymGrid(48, 2)), 1,
                              [0.1, 0.0, 0.05, 0.2], workers=1)
        eps = [r.eps for r in res.records]
        assert eps == sorted(eps) and len(res.records) == 4
        zero = res.records[0]
        assert zero.eps == 0.0 and zero.dist == 0.0 and zero.ratio == 0.0
        defs = [r.deficit for r in res.records[1:]]
        assert all(b > a for a, b in zip(defs, defs[1:]))
        assert res.rejections == []
        assert res.n == 2 and res.m == 1

    def test_rejected_member_recorded_not_fatal(self):
        res = stability_sweep(perturbed_family(AxisymGrid(48, 2)), 1,
                              [0.05, 0.1, 0.8], workers=1)
        assert len(res.records) == 2
        assert len(res.rejections) == 1
        assert res.rejections[0][0] == 0.8

    def test_clamp_window_rejection(self, monkeypatch):
        from hypflow.stability import DeficitResult
        monkeypatch.setattr(stability, "deficit",
                            lambda g, m, fields=None: DeficitResult(
                                value=0.0, raw=-1.0, W_m=5.0, W_m1=5.0, ball_radius=1.0))
        status, eps, payload = stability._sweep_one(
            perturbed_family(AxisymGrid(32, 2)), 1, 0.05)
        assert status == "rejected" and "clamp" in payload

    def test_thread_invariance(self):
        fam = perturbed_family(AxisymGrid(48, 2))
        res1 = stability_sweep(fam, 1, [0.05, 0.1, 0.2], workers=1)
        res4 = stability_sweep(fam, 1, [0.05, 0.1, 0.2], workers=4)
        assert list(res1.csv_lines()) == list(res4.csv_lines())

    def test_worker_count_resolution(self, monkeypatch):
        monkeypatch.delenv("HYPFLOW_THREADS", raising=False)
        assert sweep_worker_count(8, configured=3) == 3
        assert sweep_worker_count(2, configured=5) == 2   # capped by jobs
        monkeypatch.setenv("HYPFLOW_THREADS", "2")
        assert sweep_worker_count(8, configured=5) == 2   # env wins
        assert sweep_worker_count(8) == 2
        monkeypatch.setenv("HYPFLOW_THREADS", "0")
        with pytest.raises(ValueError):
            sweep_worker_count(8)                         # zero rejected

    def test_csv_header_frozen(self):
        assert SweepRecord.csv_header() == \
            "eps,deficit,dist,ratio_m2,ratio_3,minF,maxF,maxH,rhoMinus"

    def test_csv_row_roundtrip(self):
        res = stability_sweep(perturbed_family(AxisymGrid(48, 2)), 1, [0.1], workers=1)
        row = res.records[0].csv_row()
        vals = [float(x) for x in row.split(",")]
        assert len(vals) == 9
        assert vals[0] == 0.1 and vals[1] == res.records[0].deficit

    def test_empty_eps_list_rejected(self):
        with pytest.raises(ValueError):
            stability_sweep(perturbed_family(AxisymGrid(32, 2)), 1, [])


class TestExponentFit:
    def test_synthetic_power_law_exact(self):
        rng = np.random.default_rng(3)
        defs = 10.0 ** rng.uniform(-6, -2, 8)
        recs = [SweepRecord(eps=0.1, deficit=d, raw_deficit=d, dist=1.7 * d ** 0.37,
                            ratio=0.0, ratio3=0.0, minF=1.0, maxF=2.0, maxH=3.0,
                            rho_minus=1.0) for d in defs]
        slope, intercept, r2 = exponent_fit(recs)
        assert slope == pytest.approx(0.37, abs=1e-12)
        assert np.exp(intercept) == pytest.approx(1.7, rel=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_real_sweep_slope_near_half(self):
        res = stability_sweep(perturbed_family(AxisymGrid(48, 2)), 1,
                              [0.05, 0.1, 0.2], workers=1)
        slope, _, r2 = exponent_fit(res.records)
        assert slope == pytest.approx(0.5, abs=0.05)
        assert r2 > 0.999

    def test_too_few_points(self):
        res = stability_sweep(perturbed_family(AxisymGrid(48, 2)), 1,
                              [0.0, 0.05, 0.1], workers=1)
        with pytest.raises(InsufficientDataError):
            exponent_fit(res.records)  # only 2 usable points

    def test_degenerate_spread(self):
        recs = [SweepRecord(eps=e, deficit=1e-4, raw_deficit=1e-4, dist=0.01,
                            ratio=0.0, ratio3=0.0, minF=1.0, maxF=2.0, maxH=3.0,
                            rho_minus=1.0) for e in (0.1, 0.2, 0.3)]
        with pytest.raises(InsufficientDataError):
            exponent_fit(recs)


class TestProofTrace:
    def test_identity_along_full_relaxation(self):
        g = generate_shape(AxisymGrid(48, 2), "perturbed_sphere", 1.0, eps=0.1, l=2)
        rep = proof_trace_check(g, 1, t_max=30.0)
        assert rep.converged and not rep.skipped
        assert rep.stop_reason == "traceless_small"
        assert rep.relative_residual < 1e-3
        assert rep.target == pytest.approx(3.0 * rep.initial_deficit.value, rel=1e-12)
        assert rep.delta == pytest.approx(rep.initial_deficit.value ** (1 / 3), rel=1e-12)
        assert rep.window_mass > 0.0
        assert 0.0 < rep.window_constant < 100.0

    def test_sphere_trivial(self):
        rep = proof_trace_check(generate_shape(AxisymGrid(32, 2), "sphere", 1.0), 1,
                                t_max=1.0)
        assert rep.cum_integral == 0.0
        assert abs(rep.target) < 1e-12
        assert not rep.skipped
        assert rep.window_mass == 0.0

    def test_precomputed_run_is_reused(self):
        g = generate_shape(AxisymGrid(48, 2), "perturbed_sphere", 1.0, eps=0.1, l=2)
        pre = run(FlowState.create(g, 1), t_max=30.0)
        rep = proof_trace_check(g, 1, precomputed=pre, t_max=30.0)
        rep2 = proof_trace_check(g, 1, precomputed=pre, t_max=30.0)
        assert rep.cum_integral == rep2.cum_integral == float(pre[1].rows[-1][-1])
        assert rep.relative_residual < 1e-3

    def test_truncated_run_reports_skipped(self):
        g = generate_shape(AxisymGrid(48, 2), "perturbed_sphere", 1.0, eps=0.1, l=2)
        rep = proof_trace_check(g, 1, t_max=0.05)
        assert rep.stop_reason == "t_max"
        assert rep.skipped and not rep.converged
