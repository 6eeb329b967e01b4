"""Tests for the profile construction pipeline: contraction of the tail
iteration, strict pointwise bounds after leftward continuation, origin
extrapolation, the rescaling family, and the solve-for-eta wrapper."""

import math
from dataclasses import replace

import numpy as np
import pytest

from fastdiff import (
    ExtrapolationError,
    RangeError,
    ToleranceError,
    continue_left,
    picard_solve,
    profile_interpolator,
    recover_profile,
    rescale_profile,
    solve_for_eta,
    tail_residual,
)
from fastdiff.profile import PROFILE_DS

# Origin coefficient of the base profile (eta_inf = 1) at the reference
# parameter point, frozen from a converged run; guards against silent drift
# in the quadrature/continuation stack.
ETA_ORIGIN_BASE = 1.8089242558402994


class TestPicardSolve:
    def test_update_ratios_contract(self, tail_ref):
        assert tail_ref.update_ratios.size >= 2
        assert np.all(tail_ref.update_ratios <= 0.25)
        assert np.all(np.diff(tail_ref.update_norms) < 0)

    def test_fixed_point_residual(self, tail_ref):
        assert 0.0 <= tail_ref.fp_residual <= 1e-10

    def test_converges_in_few_iterations(self, tail_ref):
        assert tail_ref.iterations <= 8

    def test_grid_structure(self, tail_ref, fp_ref):
        s = tail_ref.grid
        assert s[0] == fp_ref.b1
        ds = np.diff(s)
        assert np.allclose(ds, ds[0], rtol=1e-12)
        assert ds[0] <= 0.01 / fp_ref.C2 + 1e-15
        assert s[-1] >= fp_ref.b1 + 40.0 / fp_ref.C2

    def test_validation(self, fp_ref):
        with pytest.raises(RangeError):
            picard_solve(fp_ref, tol=0.0)
        with pytest.raises(RangeError):
            picard_solve(fp_ref, s_max=fp_ref.b1 + 1.0)

    def test_tolerance_error_when_unreachable(self, fp_ref):
        with pytest.raises(ToleranceError):
            picard_solve(fp_ref, tol=1e-30, max_iter=4)

    def test_residual_detector_responds_to_perturbation(self, tail_ref):
        # the independent residual route must flag a profile that is off by
        # one part in 1e6, otherwise the cross-check is vacuous
        perturbed = replace(tail_ref, wt=tail_ref.wt * (1.0 + 1e-6))
        res = tail_residual(perturbed)
        assert res >= 1e-8
        assert res <= 1e-4

    def test_residual_recomputation_is_deterministic(self, tail_ref):
        assert tail_residual(tail_ref) == tail_ref.fp_residual


class TestContinueLeft:
    def test_strict_pointwise_bounds(self, base_profile):
        C1 = (base_profile.params.n - 2) / base_profile.params.m - base_profile.params.gamma
        # h and z = h - C1 are stored in their well-conditioned forms; the
        # four open bounds follow pairwise: h > 0 and z > -C1 are the same
        # statement, as are z < 0 and h < C1.
        assert np.all(base_profile.h > 0.0)
        assert np.all(base_profile.z < 0.0)
        assert np.all(base_profile.z > -C1 - 1e-12)
        assert np.all(base_profile.h < C1 + 1e-12)

    def test_slope_ratio_bounds(self, base_profile):
        # r f_r / f = z - gamma; z decays below the resolution of gamma at
        # the far end, so the strict inequality is carried by z itself while
        # the assembled ratio is only <= in float arithmetic.
        p = base_profile.params
        rfr = base_profile.rfr_over_f
        assert np.all(rfr <= -p.gamma)
        assert np.all(base_profile.z < 0.0)
        assert np.all(rfr >= -(p.n - 2) / p.m)
        assert np.all(base_profile.h > 0.0)

    def test_grid_structure(self, base_profile, fp_ref):
        s = base_profile.s_grid
        ds = np.diff(s)
        assert np.allclose(ds, PROFILE_DS, rtol=0, atol=1e-9)
        # b1 lands on a node (to roundoff) so the tail and continued parts join
        assert np.min(np.abs(s - fp_ref.b1)) <= 1e-12

    def test_table_consistency(self, base_profile):
        p = base_profile.params
        assert np.allclose(base_profile.r_grid, np.exp(base_profile.s_grid), rtol=1e-14)
        wt_check = base_profile.f * base_profile.r_grid**p.gamma
        assert np.allclose(wt_check, base_profile.wt, rtol=1e-10)
        assert np.all(base_profile.f > 0.0)

    def test_smin_validation(self, tail_ref, fp_ref):
        with pytest.raises(RangeError):
            continue_left(tail_ref, s_min=fp_ref.b1 + 5.0)


class TestRecoverProfile:
    def test_richardson_levels_agree(self, base_profile):
        eta = base_profile.eta_origin
        gaps = np.abs(np.diff(base_profile.origin_levels))
        assert np.max(gaps) <= 1e-4 * abs(eta)

    def test_eta_origin_regression(self, base_profile):
        assert base_profile.eta_origin == pytest.approx(ETA_ORIGIN_BASE, rel=1e-9)

    def test_far_field_gap(self, base_profile, fp_ref):
        s_max = float(base_profile.s_grid[-1])
        bound = math.exp(-fp_ref.C2 * (s_max - fp_ref.b1)) + 1e-8
        assert base_profile.far_field_gap <= bound
        assert base_profile.far_field_gap <= 1e-10

    def test_origin_fit_constant(self, base_profile):
        assert np.isfinite(base_profile.origin_fit_K)
        assert 0.0 < base_profile.origin_fit_K < 100.0

    def test_shallow_profile_rejected(self, tail_ref, fp_ref):
        shallow = continue_left(tail_ref, s_min=fp_ref.b1 - 10.0)
        with pytest.raises(ExtrapolationError):
            recover_profile(shallow)

    def test_detects_corrupted_origin_region(self, base_profile):
        wt_bad = base_profile.wt.copy()
        wt_bad[:50] *= 1.001
        with pytest.raises(ExtrapolationError):
            recover_profile(replace(base_profile, wt=wt_bad))


class TestRescaleProfile:
    def test_scaling_laws(self, base_profile):
        p = base_profile.params
        lam = 1.7
        two1m = 2.0 / (1.0 - p.m)
        scaled = rescale_profile(base_profile, lam)
        assert scaled.eta_origin == pytest.approx(
            base_profile.eta_origin * lam ** (two1m - p.gamma), rel=1e-14)
        assert scaled.eta_inf == pytest.approx(
            base_profile.eta_inf * lam ** (two1m - (p.n - 2) / p.m), rel=1e-14)
        # pointwise: f_lam(r/lam) = lam^(2/(1-m)) f(r)
        assert np.allclose(scaled.r_grid, base_profile.r_grid / lam, rtol=1e-13)
        assert np.allclose(scaled.f, lam**two1m * base_profile.f, rtol=1e-12)

    def test_roundtrip(self, base_profile):
        back = rescale_profile(rescale_profile(base_profile, 2.0), 0.5)
        assert back.eta_origin == pytest.approx(base_profile.eta_origin, rel=1e-12)
        assert np.allclose(back.wt, base_profile.wt, rtol=1e-12)

    def test_validation(self, base_profile):
        with pytest.raises(RangeError):
            rescale_profile(base_profile, 0.0)
        with pytest.raises(RangeError):
            rescale_profile(base_profile, -2.0)


class TestSolveForEta:
    def test_hits_target(self, unit_eta_profile):
        assert unit_eta_profile.eta_origin == pytest.approx(1.0, rel=1e-10)

    def test_far_field_consistency(self, unit_eta_profile):
        p = unit_eta_profile.params
        C1 = (p.n - 2) / p.m - p.gamma
        s_last = float(unit_eta_profile.s_grid[-1])
        wt_last = float(unit_eta_profile.wt[-1])
        assert wt_last * math.exp(C1 * s_last) == pytest.approx(unit_eta_profile.eta_inf, rel=1e-8)

    def test_target_validation(self, params_ref):
        with pytest.raises(RangeError):
            solve_for_eta(params_ref, 0.0)
        with pytest.raises(RangeError):
            solve_for_eta(params_ref, -1.0)


class TestEndpointInsensitivity:
    def test_eta_origin_stable_under_window_changes(self, base_profile, fp_ref):
        # moving both integration endpoints must not move the origin
        # coefficient: the profile the pipeline selects is unique
        tail2 = picard_solve(fp_ref, s_max=fp_ref.b1 + 48.0)
        prof2 = recover_profile(continue_left(tail2, s_min=base_profile.s_grid[0] - 2.0))
        assert prof2.eta_origin == pytest.approx(base_profile.eta_origin, rel=1e-8)


class TestInterpolator:
    def test_matches_table_nodes(self, base_profile):
        f_of_r = profile_interpolator(base_profile)
        idx = np.linspace(0, base_profile.r_grid.size - 1, 17).astype(int)
        for k in idx:
            assert f_of_r(float(base_profile.r_grid[k])) == pytest.approx(
                float(base_profile.f[k]), rel=1e-12)

    def test_array_and_scalar_semantics(self, base_profile):
        f_of_r = profile_interpolator(base_profile)
        r = base_profile.r_grid[100:103]
        out = f_of_r(r)
        assert out.shape == r.shape
        assert isinstance(f_of_r(float(r[0])), float)

    def test_out_of_range(self, base_profile):
        f_of_r = profile_interpolator(base_profile)
        with pytest.raises(RangeError):
            f_of_r(float(base_profile.r_grid[0]) * 0.5)
        with pytest.raises(RangeError):
            f_of_r(float(base_profile.r_grid[-1]) * 1.5)
        with pytest.raises(RangeError):
            f_of_r(0.0)
        with pytest.raises(RangeError):
            f_of_r(-1.0)
