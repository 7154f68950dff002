"""Witness extraction from covariances, optimization, monogamy, thresholds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerkit import (
    collective_steering_value,
    inferred_variance,
    monogamy_check,
    noise_threshold,
    r_crossing,
    single_steering_value,
    steering_product,
    steering_region,
    threshold_r,
)
from steerkit.dynamics import A_1_OUT, A_2_OUT, A_M_OUT, W_OUT, OutputCovariance
from steerkit.errors import InvalidParams, NoThreshold, ZeroVariance

E2 = math.e ** 2


def two_mode_squeezed(s: float) -> OutputCovariance:
    c = 0.5 * math.cosh(2.0 * s)
    q = 0.5 * math.sinh(2.0 * s)
    sigma = np.array([
        [c, 0.0, q, 0.0],
        [0.0, c, 0.0, -q],
        [q, 0.0, c, 0.0],
        [0.0, -q, 0.0, c],
    ])
    return OutputCovariance(("alice", "bob"), sigma)


class TestInferredVariance:
    def test_uncorrelated_modes_gain_is_zero(self):
        oc = OutputCovariance(("alice", "bob"), np.diag([2.0, 2.0, 3.0, 3.0]))
        var, gain = inferred_variance(oc, ("alice", "X"), ("bob", "X"))
        assert var == 2.0 and gain == 0.0

    def test_epr_limit_of_two_mode_squeezing(self):
        for s in (0.5, 1.0, 2.0):
            oc = two_mode_squeezed(s)
            var, gain = inferred_variance(oc, ("alice", "X"), ("bob", "X"))
            assert var == pytest.approx(0.5 / math.cosh(2.0 * s), rel=1e-12)
            assert gain == pytest.approx(-math.tanh(2.0 * s), rel=1e-12)
        assert inferred_variance(two_mode_squeezed(8.0),
                                 ("alice", "X"), ("bob", "X"))[0] < 1e-6

    def test_collective_inference_value(self, oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.0, 0.0, 0.0)
        var, _ = inferred_variance(oc, (A_M_OUT, "X"), (W_OUT, "P"))
        assert var == pytest.approx(1.0 / (2.0 * (2.0 * E2 - 1.0)), rel=1e-9)

    def test_rotated_selector(self):
        oc = two_mode_squeezed(1.0)
        var_x, _ = inferred_variance(oc, ("alice", "X"), ("bob", 0.0))
        var_rot, _ = inferred_variance(oc, ("alice", 0.0), ("bob", "X"))
        assert var_x == pytest.approx(var_rot, rel=1e-12)

    def test_zero_variance_party_rejected(self):
        sigma = np.diag([1.0, 1.0, 0.0, 1.0])
        oc = OutputCovariance(("alice", "bob"), sigma)
        with pytest.raises(ZeroVariance):
            inferred_variance(oc, ("alice", "X"), ("bob", "X"))

    def test_gain_is_optimal_against_grid_search(self, oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.1, 0.5, 5.0)
        var, gain = inferred_variance(oc, (A_M_OUT, "X"), (W_OUT, "P"))
        vs = np.zeros(oc.sigma.shape[0])
        vs[oc.index(A_M_OUT, "X")] = 1.0
        vp = np.zeros_like(vs)
        vp[oc.index(W_OUT, "P")] = 1.0
        for u in gain + np.linspace(-0.1, 0.1, 41):
            trial = (vs + u * vp) @ oc.sigma @ (vs + u * vp)
            assert trial >= var - 1e-10


class TestSteeringProduct:
    def test_vacuum_pair_is_not_steerable(self):
        oc = OutputCovariance(("alice", "bob"), 0.5 * np.eye(4))
        report = steering_product(oc, "alice", "bob")
        assert report.E_value == pytest.approx(0.5, rel=1e-12)
        assert not report.is_steering

    def test_matches_closed_form_with_damping(self, oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.1, 0.0, 0.0)
        report = steering_product(oc, A_M_OUT, W_OUT)
        assert report.E_value == pytest.approx(
            collective_steering_value(1.0, 0.1, 0.0, 0.0), rel=1e-6)
        assert report.is_steering

    def test_balanced_couplings_never_steer_via_one_mode(self, oracle_cache):
        for r in (0.25, 1.0, 2.0):
            oc = oracle_cache.covariance(r, 0.1, 0.0, 0.0)
            report = steering_product(oc, A_M_OUT, A_1_OUT)
            assert report.E_value >= 0.5 - 1e-9

    def test_angle_optimization_cannot_beat_fixed_quadratures(self,
                                                              oracle_cache):
        # the X-against-P pairing is already optimal for every covariance
        # this model generates, including skewed gain splits with rotation
        for (r, x, n0, n, ratio) in ((1.0, 0.1, 0.5, 5.0, 2.0),
                                     (0.5, 0.0, 0.0, 0.0, 1.0),
                                     (2.0, 0.05, 5.0, 100.0, 2.0)):
            oc = oracle_cache.covariance(r, x, n0, n, ratio=ratio)
            for party in (W_OUT, A_1_OUT):
                fixed = steering_product(oc, A_M_OUT, party,
                                         optimize_angles=False)
                opt = steering_product(oc, A_M_OUT, party,
                                       optimize_angles=True)
                assert opt.E_value == pytest.approx(fixed.E_value, abs=1e-8)

    def test_report_contents(self, oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.0, 0.0, 0.0)
        report = steering_product(oc, A_M_OUT, W_OUT)
        assert report.steered_mode == A_M_OUT
        assert report.steering_party == W_OUT
        assert report.gain_X != 0.0 and report.gain_P != 0.0


class TestMonogamy:
    def test_balanced_couplings_leave_both_parties_blocked(self, oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.0, 0.0, 0.0)
        report = monogamy_check(oc, A_M_OUT, (A_1_OUT, A_2_OUT))
        assert report.E_values[0] >= 0.5 - 1e-10
        assert report.E_values[1] >= 0.5 - 1e-10
        assert report.is_consistent

    def test_unbalanced_coupling_steers_through_one_party_only(self,
                                                               oracle_cache):
        oc = oracle_cache.covariance(1.0, 0.0, 0.0, 0.0, ratio=2.0)
        report = monogamy_check(oc, A_M_OUT, (A_1_OUT, A_2_OUT))
        assert report.E_values[0] < 0.5
        assert report.E_values[1] > 0.5
        assert report.is_consistent

    @settings(max_examples=200, deadline=None)
    @given(r=st.floats(0.01, 5.0), x=st.floats(0.0, 0.5),
           n0=st.floats(0.0, 100.0), n=st.floats(0.0, 1000.0),
           f1_frac=st.floats(0.0, 1.0))
    def test_never_violated_across_model_family(self, r, x, n0, n, f1_frac):
        f1 = (1.0 + x) * f1_frac
        f2 = (1.0 + x) - f1
        e1 = single_steering_value(r, x, n0, n, f1)
        e2 = single_steering_value(r, x, n0, n, f2)
        assert not (e1 < 0.5 and e2 < 0.5)

    def test_never_violated_on_dense_grid(self):
        rng = np.random.default_rng(20240809)
        for _ in range(10_000):
            r = rng.uniform(0.01, 4.0)
            x = rng.uniform(0.0, 0.5)
            n0 = rng.uniform(0.0, 50.0)
            n = rng.uniform(0.0, 500.0)
            f1 = rng.uniform(0.0, 1.0 + x)
            e1 = single_steering_value(r, x, n0, n, f1)
            e2 = single_steering_value(r, x, n0, n, (1.0 + x) - f1)
            assert not (e1 < 0.5 and e2 < 0.5)


class TestNoiseThreshold:
    def test_moderate_damping_threshold_location(self):
        res = noise_threshold(0.1, 0.0)
        assert res.variable == "n"
        assert 500.0 <= res.value <= 700.0
        assert res.bracket[1] - res.bracket[0] <= 0.5

    def test_threshold_decreases_with_damping(self):
        values = [noise_threshold(x, 0.0).value for x in (0.05, 0.1, 0.2)]
        assert values[0] > values[1] > values[2]

    def test_weak_damping_escapes_the_cap(self):
        with pytest.raises(NoThreshold):
            noise_threshold(1e-4, 0.0, n_cap=1e4)

    def test_warm_mirror_has_no_all_pulse_threshold(self):
        # with n0 > 0 the witness starts above 1/2, so no bath occupation
        # can keep steering alive over the whole pulse-area range
        with pytest.raises(NoThreshold):
            noise_threshold(0.1, 5.0)

    def test_parameter_validation(self):
        with pytest.raises(InvalidParams):
            noise_threshold(0.0, 0.0)
        with pytest.raises(InvalidParams):
            noise_threshold(1.5, 0.0)


class TestPulseAreaCrossing:
    def test_undamped_crossing_matches_analytic_threshold(self):
        for n0 in (0.5, 5.0, 50.0):
            res = r_crossing(0.0, n0, 0.0)
            assert res.value == pytest.approx(threshold_r(n0), abs=1e-9)

    def test_noise_delays_the_crossing(self):
        res = r_crossing(0.1, 5.0, 5.0)
        assert res.value > threshold_r(5.0)

    def test_witness_is_half_at_the_crossing(self):
        res = r_crossing(0.1, 5.0, 5.0)
        assert collective_steering_value(res.value, 0.1, 5.0, 5.0) \
            == pytest.approx(0.5, abs=1e-7)


class TestSteeringRegion:
    def test_undamped_row_reduces_to_closed_identity(self):
        rs = np.linspace(0.0, 3.0, 31)
        region = steering_region(rs, [0.0, 0.1], 0.0, 0.0)
        expect = [(0.5 if r == 0 else
                   0.5 / (2.0 * math.expm1(2.0 * r) + 1.0)) for r in rs]
        assert region.E[0] == pytest.approx(expect, rel=1e-12)

    def test_witness_depends_only_on_total_gain_split_free(self, oracle_cache):
        # the collective witness ignores how the gain splits between modes
        a = oracle_cache.covariance(1.0, 0.1, 0.0, 5.0, ratio=1.0)
        b = oracle_cache.covariance(1.0, 0.1, 0.0, 5.0, ratio=2.0)
        ea = steering_product(a, A_M_OUT, W_OUT).E_value
        eb = steering_product(b, A_M_OUT, W_OUT).E_value
        assert ea == pytest.approx(eb, rel=1e-8)

    def test_contour_points_sit_on_the_boundary(self):
        rs = np.linspace(0.01, 1.0, 41)
        region = steering_region(rs, [0.0, 0.1, 0.2], 5.0, 5.0)
        assert region.contour
        for r, x in region.contour:
            assert collective_steering_value(r, x, 5.0, 5.0) \
                == pytest.approx(0.5, abs=1e-6)

    def test_small_damping_region_is_steerable(self):
        region = steering_region(np.linspace(0.1, 3.0, 30), [0.01, 0.05],
                                 0.0, 0.0)
        assert (region.E < 0.5).all()

    def test_rejects_bad_grids(self):
        with pytest.raises(InvalidParams):
            steering_region([], [0.1], 0.0, 0.0)
        with pytest.raises(InvalidParams):
            steering_region([0.1], [-0.2], 0.0, 0.0)
